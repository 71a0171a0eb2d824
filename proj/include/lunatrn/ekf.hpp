#pragma once

#include "lunatrn/catalog.hpp"
#include "lunatrn/geometry.hpp"
#include "lunatrn/match.hpp"
#include "lunatrn/types.hpp"

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace lunatrn {
namespace ekf {

struct FilterParams {
    double accel_noise_mps2 = 0.1;   // IMU acceleration noise std, per axis per step
    double meas_noise_std = 1.5 / 256.0;  // unit-vector component std
    double init_vel_std_mps = 0.5;
    double init_pos_std_m = 50.0;
    double feature_std_m = 100.0;    // initial feature position std

    void validate() const;
};

/// Per-crater bookkeeping of how often a feature has been observed.
struct TrackStats {
    int total = 0;        // frames with an accepted observation
    int consecutive = 0;  // current consecutive-frame streak
    long last_seen = -1;  // step index of the last observation
};

/// Filter state over [V_c, X_c, X_F1 ... X_FN], with covariance and the
/// feature registry mapping crater ids to state slots.
///
/// Layout: x = [velocity(3), position(3), feature_0(3), feature_1(3), ...].
struct NavState {
    VecX x;
    MatX P;
    long k = 0;  // step index

    std::vector<std::string> feature_ids;  // registry order == state order
    std::unordered_map<std::string, std::size_t> feature_slot;
    std::map<std::string, TrackStats> tracks;

    Eigen::Index dim() const { return x.size(); }
    std::size_t feature_count() const { return feature_ids.size(); }

    Vec3 velocity() const { return x.segment<3>(0); }
    Vec3 position() const { return x.segment<3>(3); }
    Vec3 feature(std::size_t i) const { return x.segment<3>(6 + 3 * static_cast<Eigen::Index>(i)); }

    bool has_feature(const std::string& id) const { return feature_slot.count(id) > 0; }
};

/// Filter initialized at the given velocity/position with a block-diagonal
/// prior from params and no features.
NavState init_state(const Vec3& velocity, const Vec3& position, const FilterParams& params);

/// Constant-acceleration propagation over one step:
/// V(k) = V(k-1) + U dT,  X(k) = X(k-1) + V(k-1) dT + U dT^2/2.
/// Features are static. Covariance follows the linear transition with
/// process noise from the acceleration-noise spectral level.
void propagate(NavState& s, const Vec3& accel_mps2, double dt_s, const FilterParams& params);

/// Register a catalog crater as a new feature at its surface position.
/// Returns the feature slot. Throws Error on duplicate ids.
std::size_t initialize_feature(NavState& s, const CraterRecord& record,
                               const FilterParams& params);

/// Predicted measurement: the unit line-of-sight vector
/// (X_Fi - X_c) / ||X_Fi - X_c||. Throws Error when the feature and the
/// camera coincide.
Vec3 predict_measurement(const NavState& s, std::size_t i);

/// 3 x dim Jacobian of predict_measurement(i) w.r.t. the full state.
/// Velocity columns are zero; feature columns are the negative of the
/// camera-position columns.
MatX measurement_jacobian(const NavState& s, std::size_t i);

struct Observation {
    std::size_t feature = 0;
    Vec3 z = Vec3::Zero();  // unit vector, feature -> camera, LCLF
};

struct UpdateOutcome {
    bool applied = false;
    int n_observations = 0;
    std::string note;
};

/// Stacked EKF update over the observed features only (unobserved features
/// are retained and carried through). Joseph-form covariance update with
/// re-symmetrization. A numerically singular innovation covariance skips
/// the update and reports it in the outcome.
UpdateOutcome update(NavState& s, std::vector<Observation> observations,
                     const FilterParams& params);

struct MatchMeasurement {
    std::size_t feature = 0;
    Vec3 z = Vec3::Zero();
    bool newly_initialized = false;
};

/// Convert an accepted crater match into a unit-vector observation:
/// back-project the detected ellipse center through the estimated pose,
/// oriented to match predict_measurement. First sightings register the
/// crater as a new feature; track statistics are updated either way.
MatchMeasurement measure_from_match(NavState& s, const CraterMatch& match,
                                    const CameraModel& cam, const CameraPose& estimated_pose,
                                    const FilterParams& params);

}  // namespace ekf
}  // namespace lunatrn
