#pragma once

#include "lunatrn/catalog.hpp"
#include "lunatrn/detect.hpp"
#include "lunatrn/ekf.hpp"
#include "lunatrn/geometry.hpp"
#include "lunatrn/match.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace lunatrn {
namespace sim {

struct OrbitConfig {
    double altitude_m = 100'000.0;
    double start_lat_rad = 0.0;
    double start_lon_rad = 0.0;
    double heading_rad = deg2rad(90.0);  // azimuth east of north
    // Per-trial jitter so Monte-Carlo trials fly distinct trajectories.
    double lon_spread_rad = deg2rad(3.0);
    double heading_spread_rad = deg2rad(4.0);
};

struct TrialConfig {
    double duration_s = 500.0;
    double dt_s = 2.5;
    double imu_accel_noise_mps2 = 0.1;
    double brightness = 0.0;
    std::uint64_t seed = 1;
    int trial_index = 0;
    double bail_out_m = 10'000.0;

    OrbitConfig orbit;
    CameraModel camera = CameraModel::square(256.0, 256);
    ekf::FilterParams filter;
    MatchParams match;
    DetectorProfile profile;
    const CraterCatalog* catalog = nullptr;

    int n_steps() const { return static_cast<int>(duration_s / dt_s); }
    void validate() const;
};

/// One truth sample: state at step k plus the acceleration over the step
/// ending at k (accel[0] is unused).
struct TruthStep {
    double t = 0.0;
    Vec3 position = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
    Vec3 accel = Vec3::Zero();
};

/// Near-circular orbit segment constructed directly from the discrete
/// constant-acceleration recursion, with the per-step acceleration taken
/// as the gravitational acceleration at the step midpoint. The sequence is
/// bitwise self-consistent under the filter's propagation equations.
std::vector<TruthStep> generate_trajectory(const TrialConfig& cfg);

struct StepRecord {
    int trial = 0;
    double t_s = 0.0;
    double pos_err_m = 0.0;
    double vel_err_mps = 0.0;
    int n_matched = 0;
    int n_rejected = 0;
    int state_dim = 0;
    int flag = 0;  // 1 on the step where divergence is detected
};

struct TrialResult {
    std::vector<StepRecord> steps;
    double final_pos_err_m = 0.0;
    double final_vel_err_mps = 0.0;
    std::map<std::string, int> track_hits;  // accepted observations per crater id
    int distinct_craters = 0;               // records with >= 1 correctly matched detection
    int false_accepted = 0;                 // accepted matches of spurious/misassigned detections
    bool diverged = false;

    double mean_track_length() const;

    /// Craters the system banked over the trajectory: truly matched
    /// records plus every accepted false match (each spurious acceptance
    /// is a "crater" as far as the pipeline can tell).
    int craters_detected() const { return distinct_craters + false_accepted; }
};

/// Closed-loop execution of one trajectory: noisy-IMU propagation,
/// simulated detections from the truth geometry, identification against
/// the estimated pose, and the EKF update. Deterministic given the config.
TrialResult run_trial(const TrialConfig& cfg);

struct StepStat {
    double t_s = 0.0;
    double pos_mean = 0.0;
    double pos_sigma = 0.0;
    double vel_mean = 0.0;
    double vel_sigma = 0.0;
    int n = 0;  // trials with a record at this step
};

struct McSummary {
    std::string profile;
    double brightness = 0.0;
    int trials = 0;
    int diverged = 0;
    std::vector<StepStat> per_step;
    double final_pos_err_mean_m = 0.0;
    double final_pos_err_sigma_m = 0.0;
    double final_vel_err_mean_mps = 0.0;
    double final_vel_err_sigma_mps = 0.0;
    double mean_track_len = 0.0;
    double mean_craters = 0.0;
};

/// Independent trials from a template config. Trial i runs with a seed
/// derived from (cfg.seed, i) plus per-trial orbit jitter. Divergent
/// trials are flagged and included in the aggregates unless
/// include_divergent is false.
McSummary monte_carlo(const TrialConfig& cfg, int n_trials, bool include_divergent = true,
                      std::vector<TrialResult>* trials_out = nullptr);

/// Aggregate pre-computed trial results (exposed for oracle tests).
McSummary aggregate(const std::vector<TrialResult>& trials, const std::string& profile,
                    double brightness, bool include_divergent = true);

/// Cross product of profiles x brightness offsets, one Monte-Carlo summary
/// per cell.
std::vector<McSummary> compare_profiles(const TrialConfig& cfg,
                                        const std::vector<DetectorProfile>& profiles,
                                        const std::vector<double>& brightness_offsets,
                                        int n_trials, bool include_divergent = true);

/// Per-step CSV: trial,t_s,pos_err_m,vel_err_mps,n_matched,n_rejected,state_dim,flag
void write_steps_csv(const std::vector<TrialResult>& trials, const std::string& path);

/// Summary CSV: profile,brightness,trials,final_pos_err_mean_m,... ,mean_craters
void write_summary_csv(const std::vector<McSummary>& summaries, const std::string& path);

}  // namespace sim
}  // namespace lunatrn
