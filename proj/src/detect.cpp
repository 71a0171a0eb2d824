#include "lunatrn/detect.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>

namespace lunatrn {

namespace {

inline bool fg(const PredictionMask& m, int x, int y) {
    return m.in_bounds(x, y) && m.at(x, y) != 0;
}

}  // namespace

PredictionMask threshold_mask(const PredictionMask& m, double certainty) {
    if (!(certainty > 0.0 && certainty < 1.0)) {
        throw Error("threshold_mask: certainty must lie in (0, 1)");
    }
    const double cutoff = certainty * 255.0;
    PredictionMask out(m.width, m.height);
    for (std::size_t i = 0; i < m.pixels.size(); ++i) {
        out.pixels[i] = static_cast<double>(m.pixels[i]) > cutoff ? 255 : 0;
    }
    return out;
}

PredictionMask erode_to_rims(const PredictionMask& binary) {
    PredictionMask cur(binary.width, binary.height);
    for (std::size_t i = 0; i < binary.pixels.size(); ++i) {
        cur.pixels[i] = binary.pixels[i] ? 1 : 0;
    }

    // Zhang-Suen thinning. Neighbourhood indexed P2..P9 clockwise from north.
    auto neighbours = [](const PredictionMask& m, int x, int y, int p[8]) {
        p[0] = fg(m, x, y - 1);      // P2 N
        p[1] = fg(m, x + 1, y - 1);  // P3 NE
        p[2] = fg(m, x + 1, y);      // P4 E
        p[3] = fg(m, x + 1, y + 1);  // P5 SE
        p[4] = fg(m, x, y + 1);      // P6 S
        p[5] = fg(m, x - 1, y + 1);  // P7 SW
        p[6] = fg(m, x - 1, y);      // P8 W
        p[7] = fg(m, x - 1, y - 1);  // P9 NW
    };

    std::vector<std::size_t> to_clear;
    bool changed = true;
    while (changed) {
        changed = false;
        for (int pass = 0; pass < 2; ++pass) {
            to_clear.clear();
            for (int y = 0; y < cur.height; ++y) {
                for (int x = 0; x < cur.width; ++x) {
                    if (!cur.at(x, y)) continue;
                    int p[8];
                    neighbours(cur, x, y, p);
                    int b = 0;
                    for (int v : p) b += v;
                    if (b < 2 || b > 6) continue;
                    int transitions = 0;
                    for (int i = 0; i < 8; ++i) {
                        if (!p[i] && p[(i + 1) % 8]) ++transitions;
                    }
                    if (transitions != 1) continue;
                    if (pass == 0) {
                        if (p[0] && p[2] && p[4]) continue;  // P2*P4*P6
                        if (p[2] && p[4] && p[6]) continue;  // P4*P6*P8
                    } else {
                        if (p[0] && p[2] && p[6]) continue;  // P2*P4*P8
                        if (p[0] && p[4] && p[6]) continue;  // P2*P6*P8
                    }
                    to_clear.push_back(static_cast<std::size_t>(y) * cur.width + x);
                }
            }
            if (!to_clear.empty()) changed = true;
            for (std::size_t idx : to_clear) cur.pixels[idx] = 0;
        }
    }

    for (auto& px : cur.pixels) px = px ? 255 : 0;
    return cur;
}

std::vector<std::vector<PixelCoord>> extract_contours(const PredictionMask& skeleton,
                                                      int min_pixels) {
    std::vector<std::vector<PixelCoord>> chains;
    std::vector<char> visited(skeleton.pixels.size(), 0);
    const int dx[8] = {0, 1, 1, 1, 0, -1, -1, -1};
    const int dy[8] = {-1, -1, 0, 1, 1, 1, 0, -1};

    for (int y = 0; y < skeleton.height; ++y) {
        for (int x = 0; x < skeleton.width; ++x) {
            const std::size_t idx = static_cast<std::size_t>(y) * skeleton.width + x;
            if (!skeleton.pixels[idx] || visited[idx]) continue;
            std::vector<PixelCoord> chain;
            std::deque<PixelCoord> queue{{x, y}};
            visited[idx] = 1;
            while (!queue.empty()) {
                const PixelCoord p = queue.front();
                queue.pop_front();
                chain.push_back(p);
                for (int k = 0; k < 8; ++k) {
                    const int nx = p.x + dx[k];
                    const int ny = p.y + dy[k];
                    if (!skeleton.in_bounds(nx, ny)) continue;
                    const std::size_t nidx = static_cast<std::size_t>(ny) * skeleton.width + nx;
                    if (!skeleton.pixels[nidx] || visited[nidx]) continue;
                    visited[nidx] = 1;
                    queue.push_back({nx, ny});
                }
            }
            if (static_cast<int>(chain.size()) >= min_pixels) {
                chains.push_back(std::move(chain));
            }
        }
    }
    return chains;
}

std::optional<DetectedCrater> fit_ellipse_chain(const std::vector<PixelCoord>& chain) {
    if (chain.size() < 5) return std::nullopt;
    const std::size_t n = chain.size();

    double mx = 0.0, my = 0.0;
    for (const auto& p : chain) {
        mx += p.x;
        my += p.y;
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);

    // Halir-Flusser partitioned direct least-squares conic fit with the
    // ellipse constraint 4AC - B^2 > 0; coordinates are mean-centered for
    // conditioning.
    Eigen::MatrixXd d1(n, 3), d2(n, 3);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = chain[i].x - mx;
        const double y = chain[i].y - my;
        d1(static_cast<Eigen::Index>(i), 0) = x * x;
        d1(static_cast<Eigen::Index>(i), 1) = x * y;
        d1(static_cast<Eigen::Index>(i), 2) = y * y;
        d2(static_cast<Eigen::Index>(i), 0) = x;
        d2(static_cast<Eigen::Index>(i), 1) = y;
        d2(static_cast<Eigen::Index>(i), 2) = 1.0;
    }
    const Mat3 s1 = d1.transpose() * d1;
    const Mat3 s2 = d1.transpose() * d2;
    const Mat3 s3 = d2.transpose() * d2;
    Eigen::FullPivLU<Mat3> lu(s3);
    if (!lu.isInvertible()) return std::nullopt;
    const Mat3 t = -lu.solve(s2.transpose());
    const Mat3 m_full = s1 + s2 * t;
    Mat3 m;
    m.row(0) = m_full.row(2) / 2.0;
    m.row(1) = -m_full.row(1);
    m.row(2) = m_full.row(0) / 2.0;

    Eigen::EigenSolver<Mat3> es(m);
    if (es.info() != Eigen::Success) return std::nullopt;

    Vec3 conic_quad = Vec3::Zero();
    bool found = false;
    for (int i = 0; i < 3; ++i) {
        if (std::abs(es.eigenvalues()[i].imag()) > 1e-9) continue;
        const Vec3 v = es.eigenvectors().col(i).real();
        const double cond = 4.0 * v(0) * v(2) - v(1) * v(1);
        if (cond > 0.0) {
            conic_quad = v;
            found = true;
            break;
        }
    }
    if (!found) return std::nullopt;
    const Vec3 conic_lin = t * conic_quad;

    const double a = conic_quad(0), b = conic_quad(1), c = conic_quad(2);
    const double d = conic_lin(0), e = conic_lin(1), f = conic_lin(2);

    // Geometric parameters from the quadratic form about the center.
    Eigen::Matrix2d quad;
    quad << a, b / 2.0, b / 2.0, c;
    const double det = quad.determinant();
    if (det <= 0.0) return std::nullopt;
    const Vec2 center_local = quad.ldlt().solve(Vec2(-d / 2.0, -e / 2.0));
    const double k = d / 2.0 * center_local.x() + e / 2.0 * center_local.y() + f;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eq(quad);
    if (eq.info() != Eigen::Success) return std::nullopt;
    const double l0 = eq.eigenvalues()(0);
    const double l1 = eq.eigenvalues()(1);
    const double s0 = -k / l0;
    const double s1v = -k / l1;
    if (!(s0 > 0.0) || !(s1v > 0.0)) return std::nullopt;
    const double semi0 = std::sqrt(s0);
    const double semi1 = std::sqrt(s1v);

    DetectedCrater out;
    out.center = Vec2(center_local.x() + mx, center_local.y() + my);
    const int major_idx = semi0 >= semi1 ? 0 : 1;
    const double semi_major = std::max(semi0, semi1);
    const double semi_minor = std::min(semi0, semi1);
    out.major_axis = 2.0 * semi_major;
    out.minor_axis = 2.0 * semi_minor;
    const Vec2 axis = eq.eigenvectors().col(major_idx);
    double theta = std::atan2(axis.y(), axis.x());
    if (theta >= constants::kPi / 2.0) theta -= constants::kPi;
    if (theta < -constants::kPi / 2.0) theta += constants::kPi;
    out.orientation = theta;
    if (!std::isfinite(out.center.x()) || !std::isfinite(out.center.y()) ||
        !std::isfinite(out.major_axis) || !(out.minor_axis > 0.0)) {
        return std::nullopt;
    }
    return out;
}

std::vector<DetectedCrater> fit_ellipses(const std::vector<std::vector<PixelCoord>>& chains,
                                         double min_axis_ratio) {
    std::vector<DetectedCrater> out;
    for (const auto& chain : chains) {
        if (chain.size() < 5) continue;
        const auto fit = fit_ellipse_chain(chain);
        if (!fit) continue;
        if (fit->minor_axis / fit->major_axis < min_axis_ratio) continue;
        out.push_back(*fit);
    }
    return out;
}

std::vector<DetectedCrater> detect_from_mask(const PredictionMask& m) {
    return fit_ellipses(extract_contours(erode_to_rims(threshold_mask(m))));
}

PredictionMask render_rim_mask(const std::vector<RingSpec>& rings, int width, int height,
                               double thickness_px, std::uint8_t intensity) {
    PredictionMask mask(width, height);
    for (const auto& ring : rings) {
        if (!(ring.radius_px > 0.0)) throw Error("render_rim_mask: radius must be positive");
        if (ring.center.x() - ring.radius_px < 0.0 ||
            ring.center.x() + ring.radius_px > width - 1.0 ||
            ring.center.y() - ring.radius_px < 0.0 ||
            ring.center.y() + ring.radius_px > height - 1.0) {
            throw Error("render_rim_mask: ring extends outside the image");
        }
        const double half = thickness_px / 2.0;
        const int x_lo = static_cast<int>(std::floor(ring.center.x() - ring.radius_px - half));
        const int x_hi = static_cast<int>(std::ceil(ring.center.x() + ring.radius_px + half));
        const int y_lo = static_cast<int>(std::floor(ring.center.y() - ring.radius_px - half));
        const int y_hi = static_cast<int>(std::ceil(ring.center.y() + ring.radius_px + half));
        for (int y = std::max(y_lo, 0); y <= std::min(y_hi, height - 1); ++y) {
            for (int x = std::max(x_lo, 0); x <= std::min(x_hi, width - 1); ++x) {
                const double dist = std::hypot(x - ring.center.x(), y - ring.center.y());
                if (std::abs(dist - ring.radius_px) <= half) {
                    mask.at(x, y) = std::max(mask.at(x, y), intensity);
                }
            }
        }
    }
    return mask;
}

PredictionMask read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open PGM file '" + path + "'");

    auto next_token = [&in, &path]() -> std::string {
        std::string tok;
        char c;
        while (in.get(c)) {
            if (c == '#') {
                while (in.get(c) && c != '\n') {
                }
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c))) {
                if (!tok.empty()) return tok;
                continue;
            }
            tok += c;
        }
        if (tok.empty()) throw IoError("truncated PGM header in '" + path + "'");
        return tok;
    };

    if (next_token() != "P5") throw IoError("'" + path + "' is not a binary PGM (P5) file");
    int width = 0, height = 0, maxval = 0;
    try {
        width = std::stoi(next_token());
        height = std::stoi(next_token());
        maxval = std::stoi(next_token());
    } catch (const std::exception&) {
        throw IoError("malformed PGM header in '" + path + "'");
    }
    if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 255) {
        throw IoError("unsupported PGM geometry/maxval in '" + path + "'");
    }
    PredictionMask m(width, height);
    in.read(reinterpret_cast<char*>(m.pixels.data()),
            static_cast<std::streamsize>(m.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(m.pixels.size())) {
        throw IoError("truncated PGM pixel data in '" + path + "'");
    }
    return m;
}

void write_pgm(const PredictionMask& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write PGM file '" + path + "'");
    out << "P5\n" << m.width << " " << m.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(m.pixels.data()),
              static_cast<std::streamsize>(m.pixels.size()));
    if (!out) throw IoError("error writing PGM file '" + path + "'");
}

void DetectorProfile::validate() const {
    auto prob = [this](double p, const char* what) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw ConfigError("profile '" + name + "': " + what + " must lie in [0, 1]");
        }
    };
    prob(p_detect_new, "p_detect_new");
    prob(p_redetect, "p_redetect");
    prob(mismatch_rate, "mismatch_rate");
    if (center_noise_px < 0.0 || diameter_noise_rel < 0.0 || false_rate < 0.0 ||
        mismatch_radius_px < 0.0) {
        throw ConfigError("profile '" + name + "': noise and rate parameters must be >= 0");
    }
    for (const auto& r : brightness_response) {
        if (r.p_detect_new < 0.0 || r.p_redetect < 0.0 || r.center_noise < 0.0 ||
            r.diameter_noise < 0.0 || r.false_rate < 0.0 || r.mismatch_rate < 0.0) {
            throw ConfigError("profile '" + name + "': brightness multipliers must be >= 0");
        }
    }
}

EffectiveProfile DetectorProfile::at_brightness(double offset) const {
    EffectiveProfile eff;
    eff.p_detect_new = p_detect_new;
    eff.p_redetect = p_redetect;
    eff.center_noise_px = center_noise_px;
    eff.diameter_noise_rel = diameter_noise_rel;
    eff.false_rate = false_rate;
    eff.mismatch_rate = mismatch_rate;
    eff.mismatch_radius_px = mismatch_radius_px;
    if (brightness_response.empty()) {
        return eff;  // identity response
    }
    for (const auto& r : brightness_response) {
        if (std::abs(r.offset - offset) <= 1e-9) {
            eff.p_detect_new = std::clamp(eff.p_detect_new * r.p_detect_new, 0.0, 1.0);
            eff.p_redetect = std::clamp(eff.p_redetect * r.p_redetect, 0.0, 1.0);
            eff.center_noise_px *= r.center_noise;
            eff.diameter_noise_rel *= r.diameter_noise;
            eff.false_rate *= r.false_rate;
            eff.mismatch_rate = std::clamp(eff.mismatch_rate * r.mismatch_rate, 0.0, 1.0);
            eff.mismatch_radius_px *= r.mismatch_radius;
            return eff;
        }
    }
    throw ConfigError("profile '" + name + "': no brightness_response entry for offset " +
                      std::to_string(offset));
}

std::vector<SimulatedDetection> simulate_detections(const std::vector<VisibleCrater>& visible,
                                                    const std::set<std::string>& tracked_ids,
                                                    const DetectorProfile& profile,
                                                    double brightness, Rng& rng,
                                                    const CameraModel& cam) {
    const EffectiveProfile eff = profile.at_brightness(brightness);
    std::vector<SimulatedDetection> out;
    out.reserve(visible.size());

    for (const auto& vc : visible) {
        const bool tracked = tracked_ids.count(vc.record.id) > 0;
        const double p = tracked ? eff.p_redetect : eff.p_detect_new;
        if (!rng.chance(p)) continue;
        DetectedCrater det;
        det.center = vc.center_px + Vec2(rng.gaussian(0.0, eff.center_noise_px),
                                         rng.gaussian(0.0, eff.center_noise_px));
        const double diam =
            std::max(1.0, vc.diameter_px * (1.0 + rng.gaussian(0.0, eff.diameter_noise_rel)));
        det.major_axis = diam;
        det.minor_axis = diam;
        out.push_back({det, vc.record.id});
    }

    const int n_false = rng.poisson(eff.false_rate);
    for (int i = 0; i < n_false; ++i) {
        DetectedCrater det;
        const bool near_wrong = !visible.empty() && rng.chance(eff.mismatch_rate);
        if (near_wrong) {
            const auto& wrong = visible[rng.index(visible.size())];
            const double ang = rng.uniform(0.0, 2.0 * constants::kPi);
            const double rad = eff.mismatch_radius_px * std::sqrt(rng.uniform());
            det.center = wrong.center_px + rad * Vec2(std::cos(ang), std::sin(ang));
            const double noise = std::max(eff.diameter_noise_rel, 0.05);
            det.major_axis = std::max(1.0, wrong.diameter_px * (1.0 + rng.gaussian(0.0, noise)));
        } else {
            det.center = Vec2(rng.uniform(0.0, cam.width_px), rng.uniform(0.0, cam.height_px));
            det.major_axis = rng.uniform(8.0, 40.0);
        }
        det.minor_axis = det.major_axis;
        out.push_back({det, std::nullopt});
    }
    return out;
}

}  // namespace lunatrn
