#include "lunatrn/match.hpp"

#include "lunatrn/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <string>
#include <vector>

using namespace lunatrn;

namespace {

constexpr double kR = constants::kMoonRadiusM;

ExpectedCrater make_expected(const std::string& id, double u, double v, double diam_px) {
    ExpectedCrater e;
    e.record.id = id;
    e.record.diameter_m = diam_px * 400.0;  // arbitrary but consistent
    e.center_px = Vec2(u, v);
    e.diameter_px = diam_px;
    return e;
}

DetectedCrater make_detection(double u, double v, double diam_px) {
    DetectedCrater d;
    d.center = Vec2(u, v);
    d.major_axis = diam_px;
    d.minor_axis = diam_px;
    return d;
}

// Exhaustive one-to-one assignment under the gate, maximizing match count
// and minimizing total cost; reference oracle for lms_pair.
std::vector<int> brute_force_assignment(const std::vector<DetectedCrater>& dets,
                                        const std::vector<ExpectedCrater>& exps,
                                        const MatchParams& params) {
    const double gate_cost = params.gate_px * params.gate_px;
    const std::size_t nd = dets.size(), ne = exps.size();
    std::vector<std::vector<double>> cost(nd, std::vector<double>(ne));
    for (std::size_t d = 0; d < nd; ++d) {
        for (std::size_t e = 0; e < ne; ++e) {
            const Vec2 dc = exps[e].center_px - dets[d].center;
            const double dd = exps[e].diameter_px - dets[d].mean_diameter();
            cost[d][e] = dc.squaredNorm() + params.cost_weight * dd * dd;
        }
    }
    std::vector<int> best(nd, -1);
    double best_score = 1e300;
    int best_count = -1;
    std::vector<int> current(nd, -1);
    std::vector<char> used(ne, 0);
    std::function<void(std::size_t, int, double)> recurse = [&](std::size_t d, int count,
                                                                double total) {
        if (d == nd) {
            if (count > best_count || (count == best_count && total < best_score)) {
                best_count = count;
                best_score = total;
                best = current;
            }
            return;
        }
        recurse(d + 1, count, total);  // leave detection d unmatched
        for (std::size_t e = 0; e < ne; ++e) {
            if (used[e] || cost[d][e] > gate_cost) continue;
            used[e] = 1;
            current[d] = static_cast<int>(e);
            recurse(d + 1, count + 1, total + cost[d][e]);
            current[d] = -1;
            used[e] = 0;
        }
    };
    recurse(0, 0, 0.0);
    return best;
}

// A small scene: catalog craters dotted around a ground point.
CraterCatalog scene_catalog(Rng& rng, int n, double lat0, double lon0, double spread_rad) {
    std::vector<CraterRecord> recs;
    for (int i = 0; i < n; ++i) {
        CraterRecord r;
        r.id = "scene-" + std::string(1, static_cast<char>('a' + i / 10)) + std::to_string(i % 10);
        r.center = Geodetic(lat0 + rng.uniform(-spread_rad, spread_rad),
                            lon0 + rng.uniform(-spread_rad, spread_rad), kR);
        r.diameter_m = rng.uniform(6'000.0, 40'000.0);
        recs.push_back(r);
    }
    return CraterCatalog(std::move(recs));
}

}  // namespace

TEST_CASE("expected_craters basics") {
    const CameraModel cam = CameraModel::square(256.0, 256);
    const double alt = 100'000.0;
    const CameraPose pose = nadir_pose(Vec3(kR + alt, 0.0, 0.0), Vec3::UnitZ());

    SUBCASE("empty catalog yields nothing") {
        CHECK(expected_craters(pose, cam, CraterCatalog{}).empty());
    }

    SUBCASE("crater at the nadir point appears at the principal point with pinhole diameter") {
        std::vector<CraterRecord> recs(1);
        recs[0].id = "nadir";
        recs[0].center = Geodetic(0.0, 0.0, kR);
        recs[0].diameter_m = 10'000.0;
        const CraterCatalog cat(std::move(recs));
        const auto expected = expected_craters(pose, cam, cat);
        REQUIRE(expected.size() == 1);
        CHECK(expected[0].center_px.x() == doctest::Approx(cam.cx));
        CHECK(expected[0].center_px.y() == doctest::Approx(cam.cy));
        // d_px = focal * D / range, range = altitude at nadir.
        CHECK(expected[0].diameter_px == doctest::Approx(256.0 * 10'000.0 / alt).epsilon(1e-9));
    }

    SUBCASE("craters outside the footprint are absent") {
        std::vector<CraterRecord> recs(1);
        recs[0].id = "far";
        recs[0].center = Geodetic(deg2rad(45.0), deg2rad(120.0), kR);
        recs[0].diameter_m = 10'000.0;
        const CraterCatalog cat(std::move(recs));
        CHECK(expected_craters(pose, cam, cat).empty());
    }
}

TEST_CASE("lms_pair identity, ties, and determinism") {
    MatchParams params;
    params.gate_px = 38.4;

    SUBCASE("exact detections pair with zero cost") {
        std::vector<ExpectedCrater> exps{make_expected("a", 50, 50, 12),
                                         make_expected("b", 150, 90, 20),
                                         make_expected("c", 200, 200, 16)};
        std::vector<DetectedCrater> dets;
        for (const auto& e : exps) {
            dets.push_back(make_detection(e.center_px.x(), e.center_px.y(), e.diameter_px));
        }
        const auto pairs = lms_pair(dets, exps, params);
        REQUIRE(pairs.size() == 3);
        for (const auto& p : pairs) {
            CHECK(p.detection_index == p.expected_index);
            CHECK(p.cost == doctest::Approx(0.0));
        }
    }

    SUBCASE("equidistant tie goes to the lower id") {
        std::vector<ExpectedCrater> exps{make_expected("zz", 90, 100, 15),
                                         make_expected("aa", 110, 100, 15)};
        const std::vector<DetectedCrater> dets{make_detection(100, 100, 15)};
        const auto pairs = lms_pair(dets, exps, params);
        REQUIRE(pairs.size() == 1);
        CHECK(exps[pairs[0].expected_index].record.id == "aa");
    }

    SUBCASE("output independent of detection order") {
        std::vector<ExpectedCrater> exps{make_expected("a", 40, 40, 10),
                                         make_expected("b", 120, 80, 14),
                                         make_expected("c", 210, 160, 18)};
        std::vector<DetectedCrater> dets{make_detection(42, 41, 10), make_detection(118, 82, 13),
                                         make_detection(212, 158, 19)};
        const auto direct = lms_pair(dets, exps, params);
        std::vector<DetectedCrater> reversed(dets.rbegin(), dets.rend());
        const auto flipped = lms_pair(reversed, exps, params);
        REQUIRE(direct.size() == flipped.size());
        // Compare as (expected id, detected center) sets.
        std::set<std::pair<std::string, double>> a, b;
        for (const auto& p : direct) {
            a.insert({exps[p.expected_index].record.id, dets[p.detection_index].center.x()});
        }
        for (const auto& p : flipped) {
            b.insert({exps[p.expected_index].record.id, reversed[p.detection_index].center.x()});
        }
        CHECK(a == b);
    }

    SUBCASE("pairs beyond the gate are dropped") {
        std::vector<ExpectedCrater> exps{make_expected("a", 10, 10, 10)};
        const std::vector<DetectedCrater> dets{make_detection(200, 200, 10)};
        CHECK(lms_pair(dets, exps, params).empty());
    }
}

TEST_CASE("lms_pair equals the exhaustive assignment oracle on small instances") {
    Rng rng(41);
    int agreements = 0;
    const int instances = 500;
    for (int inst = 0; inst < instances; ++inst) {
        // Realistic frames: well-separated expected craters, detections
        // perturbed by a few px, some craters undetected, some spurious.
        const int ne = 2 + static_cast<int>(rng.index(5));  // 2..6
        std::vector<ExpectedCrater> exps;
        int guard = 0;
        while (static_cast<int>(exps.size()) < ne && guard++ < 200) {
            const Vec2 c(rng.uniform(20.0, 236.0), rng.uniform(20.0, 236.0));
            bool ok = true;
            for (const auto& e : exps) {
                if ((e.center_px - c).norm() < 45.0) ok = false;
            }
            if (!ok) continue;
            exps.push_back(make_expected("e" + std::to_string(exps.size()), c.x(), c.y(),
                                         rng.uniform(10.0, 30.0)));
        }
        std::vector<DetectedCrater> dets;
        for (const auto& e : exps) {
            if (rng.uniform() < 0.75) {
                dets.push_back(make_detection(e.center_px.x() + rng.gaussian(0.0, 2.0),
                                              e.center_px.y() + rng.gaussian(0.0, 2.0),
                                              e.diameter_px * (1.0 + rng.gaussian(0.0, 0.05))));
            }
        }
        if (rng.uniform() < 0.3) {
            dets.push_back(make_detection(rng.uniform(0.0, 256.0), rng.uniform(0.0, 256.0),
                                          rng.uniform(8.0, 30.0)));
        }

        MatchParams params;
        const auto greedy = lms_pair(dets, exps, params);
        const auto oracle = brute_force_assignment(dets, exps, params);

        std::vector<int> greedy_assign(dets.size(), -1);
        for (const auto& p : greedy) {
            greedy_assign[p.detection_index] = static_cast<int>(p.expected_index);
        }
        if (greedy_assign == oracle) ++agreements;
    }
    CHECK(agreements == instances);
}

TEST_CASE("ransac_filter consensus behaviour") {
    MatchParams params;
    params.ransac_tol_px = 5.0;
    params.ransac_iterations = 64;

    auto pair_with_translation = [](double tx, double ty, std::size_t idx) {
        CandidatePair p;
        p.detection_index = idx;
        p.expected_index = idx;
        p.detected_center = Vec2(20.0 * static_cast<double>(idx) + 10.0, 100.0);
        p.expected_center = p.detected_center + Vec2(tx, ty);
        p.translation = Vec2(tx, ty);
        return p;
    };

    SUBCASE("identical translations are all inliers") {
        std::vector<CandidatePair> pairs;
        for (std::size_t i = 0; i < 8; ++i) pairs.push_back(pair_with_translation(2.0, -1.0, i));
        Rng rng(1);
        const auto res = ransac_filter(pairs, params, rng);
        CHECK(res.inliers.size() == 8);
        CHECK(res.outliers.empty());
        CHECK(!res.low_confidence);
        CHECK(res.consensus_translation.isApprox(Vec2(2.0, -1.0), 1e-12));
    }

    SUBCASE("a single 50 px offset pair is the sole outlier") {
        std::vector<CandidatePair> pairs;
        for (std::size_t i = 0; i < 7; ++i) {
            pairs.push_back(pair_with_translation(2.0 + 0.3 * static_cast<double>(i), -1.0, i));
        }
        pairs.push_back(pair_with_translation(52.0, -1.0, 7));
        Rng rng(2);
        const auto res = ransac_filter(pairs, params, rng);
        REQUIRE(res.outliers.size() == 1);
        CHECK(res.outliers[0].detection_index == 7);
        CHECK(res.inliers.size() == 7);

        // Brute-force consensus-count oracle: the best achievable
        // translation consensus covers exactly the 7 consistent pairs.
        std::size_t best = 0;
        for (const auto& a : pairs) {
            std::size_t n = 0;
            for (const auto& b : pairs) {
                if ((a.translation - b.translation).norm() <= params.ransac_tol_px) ++n;
            }
            best = std::max(best, n);
        }
        CHECK(best == 7);
    }

    SUBCASE("fewer than min_pairs passes through with the low-confidence flag") {
        std::vector<CandidatePair> pairs{pair_with_translation(1.0, 1.0, 0),
                                         pair_with_translation(40.0, -30.0, 1)};
        Rng rng(3);
        const auto res = ransac_filter(pairs, params, rng);
        CHECK(res.inliers.size() == 2);
        CHECK(res.outliers.empty());
        CHECK(res.low_confidence);
    }

    SUBCASE("inlier translations never spread more than 2x the tolerance") {
        Rng rng(4);
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<CandidatePair> pairs;
            const std::size_t n = 3 + rng.index(8);
            for (std::size_t i = 0; i < n; ++i) {
                pairs.push_back(
                    pair_with_translation(rng.uniform(-20.0, 20.0), rng.uniform(-20.0, 20.0), i));
            }
            const auto res = ransac_filter(pairs, params, rng);
            for (const auto& a : res.inliers) {
                for (const auto& b : res.inliers) {
                    CHECK((a.translation - b.translation).norm() <=
                          2.0 * params.ransac_tol_px + 1e-9);
                }
            }
        }
    }

    SUBCASE("affine consensus accepts a frame with a slight scale change") {
        MatchParams affine_params = params;
        affine_params.use_affine = true;
        std::vector<CandidatePair> pairs;
        for (std::size_t i = 0; i < 8; ++i) {
            CandidatePair p;
            p.detection_index = i;
            p.expected_index = i;
            p.detected_center = Vec2(30.0 * static_cast<double>(i % 4) + 20.0,
                                     60.0 * static_cast<double>(i / 4) + 40.0);
            // 4% scale change about the image center plus a shift; a pure
            // translation model cannot cover all corners.
            p.expected_center = Vec2(128.0, 128.0) +
                                1.04 * (p.detected_center - Vec2(128.0, 128.0)) + Vec2(30.0, -12.0);
            p.translation = p.expected_center - p.detected_center;
            pairs.push_back(p);
        }
        Rng rng(5);
        const auto res = ransac_filter(pairs, affine_params, rng);
        CHECK(res.inliers.size() == 8);
    }
}

TEST_CASE("identify closed loop") {
    const CameraModel cam = CameraModel::square(256.0, 256);
    MatchParams params;

    SUBCASE("zero detections give an empty result with zero diagnostics") {
        Rng rng(1);
        const CameraPose pose = nadir_pose(Vec3(kR + 1e5, 0.0, 0.0));
        MatchDiagnostics diag;
        const auto matches = identify({}, pose, cam, CraterCatalog{}, params, rng, &diag);
        CHECK(matches.empty());
        CHECK(diag.n_expected == 0);
        CHECK(diag.n_candidates == 0);
        CHECK(diag.n_outliers == 0);
    }

    SUBCASE("true pose and zero noise give a bijective correct matching (100 frames)") {
        Rng rng(55);
        for (int frame = 0; frame < 100; ++frame) {
            const double lat0 = rng.uniform(-0.3, 0.3);
            const double lon0 = rng.uniform(-2.0, 2.0);
            const CraterCatalog cat = scene_catalog(rng, 12, lat0, lon0, 0.05);
            const Vec3 pos = geodetic_to_lclf(Geodetic(lat0, lon0, kR + 1e5));
            const CameraPose pose = nadir_pose(pos);

            MatchParams strict = params;
            strict.footprint_margin = 0.0;
            std::vector<DetectedCrater> dets;
            std::vector<std::string> truth_ids;
            for (const auto& e : expected_craters(pose, cam, cat, strict)) {
                dets.push_back(make_detection(e.center_px.x(), e.center_px.y(), e.diameter_px));
                truth_ids.push_back(e.record.id);
            }
            if (dets.empty()) continue;

            const auto matches = identify(dets, pose, cam, cat, params, rng);
            REQUIRE(matches.size() == dets.size());
            std::set<std::string> matched_ids;
            for (const auto& m : matches) {
                matched_ids.insert(m.record.id);
                CHECK(m.cost == doctest::Approx(0.0).epsilon(1e-9));
            }
            CHECK(matched_ids.size() == truth_ids.size());  // bijective
            for (const auto& id : truth_ids) CHECK(matched_ids.count(id) == 1);
        }
    }

    SUBCASE("planted inconsistent pairs are rejected by the translation consensus") {
        // Frames of 7 consistent pairs + 30% planted offsets; >= 95% of
        // the plants must be filtered out (tol 5 px, translation model).
        Rng rng(66);
        int planted = 0, rejected = 0;
        for (int frame = 0; frame < 100; ++frame) {
            std::vector<CandidatePair> pairs;
            const Vec2 common(rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0));
            const std::size_t n_true = 7;
            const std::size_t n_false = 3;
            for (std::size_t i = 0; i < n_true; ++i) {
                CandidatePair p;
                p.detection_index = i;
                p.expected_index = i;
                p.detected_center = Vec2(rng.uniform(10.0, 246.0), rng.uniform(10.0, 246.0));
                p.translation = common + Vec2(rng.gaussian(0.0, 0.8), rng.gaussian(0.0, 0.8));
                p.expected_center = p.detected_center + p.translation;
                pairs.push_back(p);
            }
            for (std::size_t i = 0; i < n_false; ++i) {
                CandidatePair p;
                p.detection_index = n_true + i;
                p.expected_index = n_true + i;
                p.detected_center = Vec2(rng.uniform(10.0, 246.0), rng.uniform(10.0, 246.0));
                const double ang = rng.uniform(0.0, 2.0 * constants::kPi);
                const double mag = rng.uniform(12.0, 35.0);
                p.translation = common + mag * Vec2(std::cos(ang), std::sin(ang));
                p.expected_center = p.detected_center + p.translation;
                pairs.push_back(p);
                ++planted;
            }
            MatchParams rp;
            rp.ransac_tol_px = 5.0;
            const auto res = ransac_filter(pairs, rp, rng);
            for (const auto& out : res.outliers) {
                if (out.detection_index >= n_true) ++rejected;
            }
        }
        CHECK(static_cast<double>(rejected) / planted >= 0.95);
    }

    SUBCASE("identify tolerates a small pose-estimate offset") {
        Rng rng(77);
        const double lat0 = 0.1, lon0 = 0.4;
        const CraterCatalog cat = scene_catalog(rng, 10, lat0, lon0, 0.05);
        const Vec3 true_pos = geodetic_to_lclf(Geodetic(lat0, lon0, kR + 1e5));
        const CameraPose true_pose = nadir_pose(true_pos);

        MatchParams strict = params;
        strict.footprint_margin = 0.0;
        std::vector<DetectedCrater> dets;
        std::set<std::string> truth_ids;
        for (const auto& e : expected_craters(true_pose, cam, cat, strict)) {
            dets.push_back(make_detection(e.center_px.x(), e.center_px.y(), e.diameter_px));
            truth_ids.insert(e.record.id);
        }
        REQUIRE(!dets.empty());

        // A 2 km ground offset at 100 km altitude shifts the expected
        // centers ~5 px, well inside the gate; matching must still hold.
        const Vec3 offset_pos = geodetic_to_lclf(Geodetic(lat0 + 2000.0 / kR, lon0, kR + 1e5));
        const CameraPose est_pose = nadir_pose(offset_pos);
        const auto matches = identify(dets, est_pose, cam, cat, params, rng);
        CHECK(matches.size() == dets.size());
        for (const auto& m : matches) {
            CHECK(truth_ids.count(m.record.id) == 1);
        }
    }
}
