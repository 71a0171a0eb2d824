#include "lunatrn/match.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lunatrn {

std::vector<ExpectedCrater> expected_craters(const CameraPose& estimate, const CameraModel& cam,
                                             const CraterCatalog& cat,
                                             const MatchParams& params) {
    const LatLonBox box = footprint_bounds(estimate, cam, params.footprint_margin);
    std::vector<ExpectedCrater> out;
    for (const auto& rec : cat.query_box(box, params.diameters)) {
        const Vec3 p = geodetic_to_lclf(rec.center);
        const auto px = project(p, estimate, cam, params.footprint_margin);
        if (!px) continue;
        ExpectedCrater e;
        e.record = rec;
        e.center_px = *px;
        const double range = (p - estimate.position).norm();
        e.diameter_px = cam.focal_px * rec.diameter_m / range;
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<CandidatePair> lms_pair(const std::vector<DetectedCrater>& detections,
                                    const std::vector<ExpectedCrater>& expected,
                                    const MatchParams& params) {
    struct Scored {
        double cost;
        std::size_t det;
        std::size_t exp;
    };
    std::vector<Scored> all;
    const double gate_cost = params.gate_px * params.gate_px;
    for (std::size_t d = 0; d < detections.size(); ++d) {
        for (std::size_t e = 0; e < expected.size(); ++e) {
            const Vec2 dc = expected[e].center_px - detections[d].center;
            const double dd = expected[e].diameter_px - detections[d].mean_diameter();
            const double cost = dc.squaredNorm() + params.cost_weight * dd * dd;
            if (cost > gate_cost) continue;
            all.push_back({cost, d, e});
        }
    }
    std::stable_sort(all.begin(), all.end(), [&expected](const Scored& a, const Scored& b) {
        if (a.cost != b.cost) return a.cost < b.cost;
        return expected[a.exp].record.id < expected[b.exp].record.id;
    });

    std::vector<char> det_used(detections.size(), 0);
    std::vector<char> exp_used(expected.size(), 0);
    std::vector<CandidatePair> pairs;
    for (const auto& s : all) {
        if (det_used[s.det] || exp_used[s.exp]) continue;
        det_used[s.det] = 1;
        exp_used[s.exp] = 1;
        CandidatePair p;
        p.detection_index = s.det;
        p.expected_index = s.exp;
        p.cost = s.cost;
        p.detected_center = detections[s.det].center;
        p.expected_center = expected[s.exp].center_px;
        p.translation = p.expected_center - p.detected_center;
        pairs.push_back(p);
    }
    // Deterministic output order regardless of the cost ranking above.
    std::sort(pairs.begin(), pairs.end(), [](const CandidatePair& a, const CandidatePair& b) {
        return a.detection_index < b.detection_index;
    });
    return pairs;
}

namespace {

std::size_t count_inliers_translation(const std::vector<CandidatePair>& pairs, const Vec2& t,
                                      double tol) {
    std::size_t n = 0;
    for (const auto& p : pairs) {
        if ((p.translation - t).norm() <= tol) ++n;
    }
    return n;
}

Vec2 mean_translation(const std::vector<CandidatePair>& pairs, const Vec2& model, double tol) {
    Vec2 sum = Vec2::Zero();
    std::size_t n = 0;
    for (const auto& p : pairs) {
        if ((p.translation - model).norm() <= tol) {
            sum += p.translation;
            ++n;
        }
    }
    return n ? Vec2(sum / static_cast<double>(n)) : model;
}

// Affine consensus: 2x3 transform mapping detected centers to expected
// centers, fit from a 3-pair sample.
struct Affine {
    Eigen::Matrix2d a = Eigen::Matrix2d::Identity();
    Vec2 b = Vec2::Zero();

    Vec2 apply(const Vec2& x) const { return a * x + b; }
};

bool fit_affine(const std::vector<CandidatePair>& pairs, const std::vector<std::size_t>& idx,
                Affine& out) {
    Eigen::Matrix<double, 6, 6> m = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> rhs = Eigen::Matrix<double, 6, 1>::Zero();
    for (std::size_t i : idx) {
        const Vec2& s = pairs[i].detected_center;
        const Vec2& t = pairs[i].expected_center;
        Eigen::Matrix<double, 2, 6> j = Eigen::Matrix<double, 2, 6>::Zero();
        j(0, 0) = s.x();
        j(0, 1) = s.y();
        j(0, 2) = 1.0;
        j(1, 3) = s.x();
        j(1, 4) = s.y();
        j(1, 5) = 1.0;
        m += j.transpose() * j;
        rhs += j.transpose() * t;
    }
    Eigen::FullPivLU<Eigen::Matrix<double, 6, 6>> lu(m);
    if (!lu.isInvertible()) return false;
    const Eigen::Matrix<double, 6, 1> c = lu.solve(rhs);
    out.a << c(0), c(1), c(3), c(4);
    out.b << c(2), c(5);
    return true;
}

}  // namespace

RansacResult ransac_filter(const std::vector<CandidatePair>& pairs, const MatchParams& params,
                           Rng& rng) {
    if (params.ransac_iterations < 1) throw Error("ransac_filter: iterations must be >= 1");
    RansacResult result;
    if (pairs.size() < static_cast<std::size_t>(params.ransac_min_pairs)) {
        result.inliers = pairs;
        result.low_confidence = true;
        if (!pairs.empty()) {
            result.consensus_translation = mean_translation(
                pairs, pairs.front().translation, std::numeric_limits<double>::infinity());
        }
        return result;
    }

    const double tol = params.ransac_tol_px;

    // Translation consensus: sample one pair as the model hypothesis.
    Vec2 best_model = pairs.front().translation;
    std::size_t best_count = 0;
    for (int it = 0; it < params.ransac_iterations; ++it) {
        const Vec2 t = pairs[rng.index(pairs.size())].translation;
        const std::size_t n = count_inliers_translation(pairs, t, tol);
        if (n > best_count) {
            best_count = n;
            best_model = t;
        }
    }
    Vec2 model = mean_translation(pairs, best_model, tol);

    bool classified = false;
    if (params.use_affine && pairs.size() >= 6) {
        // Affine consensus over 3-pair samples; falls back to the
        // translation model if no affine sample beats its consensus.
        Affine best_affine;
        std::size_t best_affine_count = 0;
        for (int it = 0; it < params.ransac_iterations; ++it) {
            std::vector<std::size_t> sample;
            while (sample.size() < 3) {
                const std::size_t k = rng.index(pairs.size());
                if (std::find(sample.begin(), sample.end(), k) == sample.end()) {
                    sample.push_back(k);
                }
            }
            Affine a;
            if (!fit_affine(pairs, sample, a)) continue;
            std::size_t n = 0;
            for (const auto& p : pairs) {
                if ((a.apply(p.detected_center) - p.expected_center).norm() <= tol) ++n;
            }
            if (n > best_affine_count) {
                best_affine_count = n;
                best_affine = a;
            }
        }
        if (best_affine_count > best_count) {
            for (const auto& p : pairs) {
                if ((best_affine.apply(p.detected_center) - p.expected_center).norm() <= tol) {
                    result.inliers.push_back(p);
                } else {
                    result.outliers.push_back(p);
                }
            }
            classified = true;
            result.consensus_translation = model;
        }
    }

    if (!classified) {
        for (const auto& p : pairs) {
            if ((p.translation - model).norm() <= tol) {
                result.inliers.push_back(p);
            } else {
                result.outliers.push_back(p);
            }
        }
        result.consensus_translation = model;
    }
    result.low_confidence = result.inliers.size() < static_cast<std::size_t>(params.ransac_min_pairs);
    return result;
}

std::vector<CraterMatch> identify(const std::vector<DetectedCrater>& detections,
                                  const CameraPose& estimate, const CameraModel& cam,
                                  const CraterCatalog& cat, const MatchParams& params, Rng& rng,
                                  MatchDiagnostics* diagnostics) {
    MatchDiagnostics diag;
    diag.n_detections = detections.size();

    const auto expected = expected_craters(estimate, cam, cat, params);
    diag.n_expected = expected.size();

    const auto pairs = lms_pair(detections, expected, params);
    diag.n_candidates = pairs.size();

    const auto consensus = ransac_filter(pairs, params, rng);
    diag.n_inliers = consensus.inliers.size();
    diag.n_outliers = consensus.outliers.size();
    diag.low_confidence = consensus.low_confidence;

    std::vector<CraterMatch> matches;
    matches.reserve(consensus.inliers.size());
    for (const auto& p : consensus.inliers) {
        CraterMatch m;
        m.detection = detections[p.detection_index];
        m.detection_index = p.detection_index;
        m.record = expected[p.expected_index].record;
        m.translation = p.translation;
        m.cost = p.cost;
        m.expected_center = expected[p.expected_index].center_px;
        matches.push_back(std::move(m));
    }
    if (diagnostics) *diagnostics = diag;
    return matches;
}

}  // namespace lunatrn
