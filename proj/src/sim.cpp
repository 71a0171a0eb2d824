#include "lunatrn/sim.hpp"

#include "lunatrn/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <thread>

namespace lunatrn {
namespace sim {

void TrialConfig::validate() const {
    if (!(dt_s > 0.0)) throw ConfigError("dt_s must be positive");
    if (!(duration_s >= dt_s)) throw ConfigError("duration_s must be at least dt_s");
    if (!(orbit.altitude_m > 0.0)) throw ConfigError("altitude_m must be positive");
    if (!(imu_accel_noise_mps2 >= 0.0)) throw ConfigError("imu_accel_noise_mps2 must be >= 0");
    if (!(bail_out_m > 0.0)) throw ConfigError("bail_out_m must be positive");
    camera.validate();
    filter.validate();
    profile.validate();
    if (catalog == nullptr) throw ConfigError("catalog is not loaded");
}

std::vector<TruthStep> generate_trajectory(const TrialConfig& cfg) {
    cfg.validate();
    const double r = constants::kMoonRadiusM + cfg.orbit.altitude_m;
    const Vec3 p0 = geodetic_to_lclf(Geodetic(cfg.orbit.start_lat_rad, cfg.orbit.start_lon_rad, r));

    const Vec3 up = p0.normalized();
    Vec3 east = Vec3::UnitZ().cross(up);
    const double en = east.norm();
    if (en < 1e-9) throw ConfigError("start_lat_deg puts the orbit start at a pole");
    east /= en;
    const Vec3 north = up.cross(east);

    const Vec3 v_dir = std::cos(cfg.orbit.heading_rad) * north + std::sin(cfg.orbit.heading_rad) * east;
    const double speed = std::sqrt(constants::kMoonMuM3S2 / r);

    const int n = cfg.n_steps();
    std::vector<TruthStep> out(static_cast<std::size_t>(n) + 1);
    out[0].t = 0.0;
    out[0].position = p0;
    out[0].velocity = speed * v_dir;

    // Truth is defined by the same discrete recursion the filter uses, with
    // the step acceleration sampled from gravity at the step midpoint; the
    // filter propagating with the exact accelerations therefore reproduces
    // the truth bitwise.
    const double dt = cfg.dt_s;
    for (int k = 1; k <= n; ++k) {
        const TruthStep& prev = out[static_cast<std::size_t>(k) - 1];
        const Vec3 mid = prev.position + prev.velocity * (dt / 2.0);
        const double rm = mid.norm();
        const Vec3 accel = -constants::kMoonMuM3S2 / (rm * rm * rm) * mid;
        TruthStep& cur = out[static_cast<std::size_t>(k)];
        cur.t = k * dt;
        cur.accel = accel;
        cur.velocity = prev.velocity + accel * dt;
        cur.position = prev.position + prev.velocity * dt + accel * (dt * dt / 2.0);
    }
    return out;
}

double TrialResult::mean_track_length() const {
    if (track_hits.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [id, hits] : track_hits) sum += hits;
    return sum / static_cast<double>(track_hits.size());
}

TrialResult run_trial(const TrialConfig& cfg) {
    cfg.validate();
    const auto truth = generate_trajectory(cfg);
    Rng rng(cfg.seed);

    ekf::NavState state = init_state(truth[0].velocity, truth[0].position, cfg.filter);

    MatchParams visible_params = cfg.match;
    visible_params.footprint_margin = 0.0;  // "visible" means strictly in-image

    std::set<std::string> detector_seen;
    std::set<std::string> truly_matched;
    TrialResult result;
    result.steps.reserve(truth.size() - 1);

    for (std::size_t k = 1; k < truth.size(); ++k) {
        const TruthStep& ts = truth[k];

        const Vec3 u_meas = ts.accel + Vec3(rng.gaussian(0.0, cfg.imu_accel_noise_mps2),
                                            rng.gaussian(0.0, cfg.imu_accel_noise_mps2),
                                            rng.gaussian(0.0, cfg.imu_accel_noise_mps2));
        ekf::propagate(state, u_meas, cfg.dt_s, cfg.filter);

        const CameraPose true_pose = nadir_pose(ts.position);
        std::vector<VisibleCrater> visible;
        for (const auto& e : expected_craters(true_pose, cfg.camera, *cfg.catalog, visible_params)) {
            visible.push_back({e.record, e.center_px, e.diameter_px});
        }

        const auto tagged = simulate_detections(visible, detector_seen, cfg.profile,
                                                cfg.brightness, rng, cfg.camera);
        std::vector<DetectedCrater> detections;
        detections.reserve(tagged.size());
        for (const auto& t : tagged) {
            if (t.true_id) detector_seen.insert(*t.true_id);
            detections.push_back(t.det);
        }

        const CameraPose est_pose = nadir_pose(state.position());
        MatchDiagnostics diag;
        const auto matches =
            identify(detections, est_pose, cfg.camera, *cfg.catalog, cfg.match, rng, &diag);

        std::vector<ekf::Observation> observations;
        observations.reserve(matches.size());
        for (const auto& m : matches) {
            const auto& true_id = tagged[m.detection_index].true_id;
            if (true_id && *true_id == m.record.id) {
                truly_matched.insert(m.record.id);
            } else {
                result.false_accepted += 1;
            }
            const auto mm = ekf::measure_from_match(state, m, cfg.camera, est_pose, cfg.filter);
            observations.push_back({mm.feature, mm.z});
        }
        ekf::update(state, observations, cfg.filter);

        StepRecord rec;
        rec.trial = cfg.trial_index;
        rec.t_s = ts.t;
        rec.pos_err_m = (state.position() - ts.position).norm();
        rec.vel_err_mps = (state.velocity() - ts.velocity).norm();
        rec.n_matched = static_cast<int>(matches.size());
        rec.n_rejected = static_cast<int>(diag.n_outliers);
        rec.state_dim = static_cast<int>(state.dim());
        if (rec.pos_err_m > cfg.bail_out_m) {
            rec.flag = 1;
            result.steps.push_back(rec);
            result.diverged = true;
            break;
        }
        result.steps.push_back(rec);
    }

    if (!result.steps.empty()) {
        result.final_pos_err_m = result.steps.back().pos_err_m;
        result.final_vel_err_mps = result.steps.back().vel_err_mps;
    }
    for (const auto& [id, stats] : state.tracks) {
        if (stats.total > 0) result.track_hits[id] = stats.total;
    }
    result.distinct_craters = static_cast<int>(truly_matched.size());
    return result;
}

namespace {

struct Moments {
    double mean = 0.0;
    double sigma = 0.0;
};

// Population standard deviation: a single trial aggregates with sigma 0.
Moments moments(const std::vector<double>& values) {
    Moments m;
    if (values.empty()) return m;
    for (double v : values) m.mean += v;
    m.mean /= static_cast<double>(values.size());
    double acc = 0.0;
    for (double v : values) acc += (v - m.mean) * (v - m.mean);
    m.sigma = std::sqrt(acc / static_cast<double>(values.size()));
    return m;
}

}  // namespace

McSummary aggregate(const std::vector<TrialResult>& trials, const std::string& profile,
                    double brightness, bool include_divergent) {
    McSummary s;
    s.profile = profile;
    s.brightness = brightness;
    s.trials = static_cast<int>(trials.size());
    for (const auto& t : trials) {
        if (t.diverged) ++s.diverged;
    }

    std::vector<const TrialResult*> included;
    for (const auto& t : trials) {
        if (!include_divergent && t.diverged) continue;
        included.push_back(&t);
    }
    if (included.empty()) return s;

    std::size_t max_steps = 0;
    for (const auto* t : included) max_steps = std::max(max_steps, t->steps.size());

    s.per_step.resize(max_steps);
    for (std::size_t j = 0; j < max_steps; ++j) {
        std::vector<double> pos, vel;
        double t_s = 0.0;
        for (const auto* t : included) {
            if (j >= t->steps.size()) continue;
            pos.push_back(t->steps[j].pos_err_m);
            vel.push_back(t->steps[j].vel_err_mps);
            t_s = t->steps[j].t_s;
        }
        const Moments mp = moments(pos);
        const Moments mv = moments(vel);
        s.per_step[j] = {t_s, mp.mean, mp.sigma, mv.mean, mv.sigma, static_cast<int>(pos.size())};
    }

    std::vector<double> fpos, fvel;
    double track_sum = 0.0;
    double track_count = 0.0;
    double craters_sum = 0.0;
    for (const auto* t : included) {
        fpos.push_back(t->final_pos_err_m);
        fvel.push_back(t->final_vel_err_mps);
        for (const auto& [id, hits] : t->track_hits) {
            track_sum += hits;
            track_count += 1.0;
        }
        craters_sum += t->craters_detected();
    }
    const Moments mp = moments(fpos);
    const Moments mv = moments(fvel);
    s.final_pos_err_mean_m = mp.mean;
    s.final_pos_err_sigma_m = mp.sigma;
    s.final_vel_err_mean_mps = mv.mean;
    s.final_vel_err_sigma_mps = mv.sigma;
    s.mean_track_len = track_count > 0.0 ? track_sum / track_count : 0.0;
    s.mean_craters = craters_sum / static_cast<double>(included.size());
    return s;
}

McSummary monte_carlo(const TrialConfig& cfg, int n_trials, bool include_divergent,
                      std::vector<TrialResult>* trials_out) {
    if (n_trials < 1) throw ConfigError("trials must be >= 1");

    std::vector<TrialConfig> configs;
    configs.reserve(static_cast<std::size_t>(n_trials));
    for (int i = 0; i < n_trials; ++i) {
        TrialConfig tc = cfg;
        tc.trial_index = i;
        tc.seed = Rng::derive(cfg.seed, static_cast<std::uint64_t>(i));
        // Deterministic per-trial trajectory jitter.
        Rng jitter(Rng::derive(tc.seed, 0xA11CEull));
        tc.orbit.start_lon_rad =
            wrap_longitude(cfg.orbit.start_lon_rad + jitter.uniform(0.0, cfg.orbit.lon_spread_rad));
        tc.orbit.heading_rad = cfg.orbit.heading_rad +
                               jitter.uniform(-cfg.orbit.heading_spread_rad / 2.0,
                                              cfg.orbit.heading_spread_rad / 2.0);
        tc.orbit.lon_spread_rad = 0.0;
        tc.orbit.heading_spread_rad = 0.0;
        configs.push_back(tc);
    }

    std::vector<TrialResult> results(static_cast<std::size_t>(n_trials));
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned n_threads = std::min<unsigned>(hw, static_cast<unsigned>(n_trials));
    std::atomic<int> next{0};
    std::vector<std::thread> workers;
    workers.reserve(n_threads);
    for (unsigned w = 0; w < n_threads; ++w) {
        workers.emplace_back([&configs, &results, &next]() {
            while (true) {
                const int i = next.fetch_add(1);
                if (i >= static_cast<int>(configs.size())) break;
                results[static_cast<std::size_t>(i)] = run_trial(configs[static_cast<std::size_t>(i)]);
            }
        });
    }
    for (auto& w : workers) w.join();

    McSummary summary = aggregate(results, cfg.profile.name, cfg.brightness, include_divergent);
    if (trials_out) *trials_out = std::move(results);
    return summary;
}

std::vector<McSummary> compare_profiles(const TrialConfig& cfg,
                                        const std::vector<DetectorProfile>& profiles,
                                        const std::vector<double>& brightness_offsets,
                                        int n_trials, bool include_divergent) {
    std::vector<McSummary> out;
    for (const auto& profile : profiles) {
        for (double b : brightness_offsets) {
            TrialConfig cell = cfg;
            cell.profile = profile;
            cell.brightness = b;
            cell.filter.meas_noise_std =
                std::max(profile.at_brightness(b).center_noise_px, 0.5) / cfg.camera.focal_px;
            out.push_back(monte_carlo(cell, n_trials, include_divergent));
        }
    }
    return out;
}

namespace {

void write_double(std::string& line, double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    line += buf;
}

}  // namespace

void write_steps_csv(const std::vector<TrialResult>& trials, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "trial,t_s,pos_err_m,vel_err_mps,n_matched,n_rejected,state_dim,flag\n";
    for (const auto& t : trials) {
        for (const auto& r : t.steps) {
            std::string line = std::to_string(r.trial);
            line += ',';
            write_double(line, r.t_s);
            line += ',';
            write_double(line, r.pos_err_m);
            line += ',';
            write_double(line, r.vel_err_mps);
            line += ',';
            line += std::to_string(r.n_matched);
            line += ',';
            line += std::to_string(r.n_rejected);
            line += ',';
            line += std::to_string(r.state_dim);
            line += ',';
            line += std::to_string(r.flag);
            line += '\n';
            out << line;
        }
    }
    if (!out) throw IoError("error writing '" + path + "'");
}

void write_summary_csv(const std::vector<McSummary>& summaries, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "profile,brightness,trials,final_pos_err_mean_m,final_pos_err_sigma_m,"
           "final_vel_err_mean_mps,final_vel_err_sigma_mps,mean_track_len,mean_craters\n";
    for (const auto& s : summaries) {
        std::string line = s.profile;
        line += ',';
        write_double(line, s.brightness);
        line += ',';
        line += std::to_string(s.trials);
        line += ',';
        write_double(line, s.final_pos_err_mean_m);
        line += ',';
        write_double(line, s.final_pos_err_sigma_m);
        line += ',';
        write_double(line, s.final_vel_err_mean_mps);
        line += ',';
        write_double(line, s.final_vel_err_sigma_mps);
        line += ',';
        write_double(line, s.mean_track_len);
        line += ',';
        write_double(line, s.mean_craters);
        line += '\n';
        out << line;
    }
    if (!out) throw IoError("error writing '" + path + "'");
}

}  // namespace sim
}  // namespace lunatrn
