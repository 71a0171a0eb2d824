#include "lunatrn/ekf.hpp"

#include <algorithm>
#include <cmath>

namespace lunatrn {
namespace ekf {

void FilterParams::validate() const {
    if (!(accel_noise_mps2 > 0.0) || !(meas_noise_std > 0.0) || !(init_vel_std_mps > 0.0) ||
        !(init_pos_std_m > 0.0) || !(feature_std_m > 0.0)) {
        throw ConfigError("FilterParams: all noise standard deviations must be positive");
    }
}

NavState init_state(const Vec3& velocity, const Vec3& position, const FilterParams& params) {
    params.validate();
    NavState s;
    s.x = VecX::Zero(6);
    s.x.segment<3>(0) = velocity;
    s.x.segment<3>(3) = position;
    s.P = MatX::Zero(6, 6);
    s.P.block<3, 3>(0, 0) = params.init_vel_std_mps * params.init_vel_std_mps * Mat3::Identity();
    s.P.block<3, 3>(3, 3) = params.init_pos_std_m * params.init_pos_std_m * Mat3::Identity();
    return s;
}

void propagate(NavState& s, const Vec3& accel_mps2, double dt_s, const FilterParams& params) {
    if (!(dt_s > 0.0)) throw Error("propagate: dt must be positive");
    const Eigen::Index n = s.dim();

    const Vec3 v_prev = s.velocity();
    s.x.segment<3>(0) = v_prev + accel_mps2 * dt_s;
    s.x.segment<3>(3) += v_prev * dt_s + accel_mps2 * (dt_s * dt_s / 2.0);

    // P <- F P F^T + Q with F = I + N, N having only the position<-velocity
    // block dT*I, so F P F^T = P + N P + P N^T + N P N^T. Expanding keeps
    // the cost at O(dim^2) instead of O(dim^3).
    const Mat3 p_vv = s.P.block<3, 3>(0, 0);
    const MatX p_vrows = s.P.block(0, 0, 3, n);
    s.P.block(3, 0, 3, n) += dt_s * p_vrows;
    s.P.block(0, 3, n, 3) += dt_s * p_vrows.transpose();
    s.P.block<3, 3>(3, 3) += dt_s * dt_s * p_vv;

    // Process noise from the acceleration disturbance: dV = a dT, dX = a dT^2/2.
    const double sa2 = params.accel_noise_mps2 * params.accel_noise_mps2;
    const double g_v = dt_s;
    const double g_x = dt_s * dt_s / 2.0;
    s.P.block<3, 3>(0, 0) += sa2 * g_v * g_v * Mat3::Identity();
    s.P.block<3, 3>(0, 3) += sa2 * g_v * g_x * Mat3::Identity();
    s.P.block<3, 3>(3, 0) += sa2 * g_v * g_x * Mat3::Identity();
    s.P.block<3, 3>(3, 3) += sa2 * g_x * g_x * Mat3::Identity();

    s.P = 0.5 * (s.P + s.P.transpose()).eval();
    s.k += 1;
}

std::size_t initialize_feature(NavState& s, const CraterRecord& record,
                               const FilterParams& params) {
    if (s.has_feature(record.id)) {
        throw Error("initialize_feature: feature '" + record.id + "' already registered");
    }
    const Vec3 pos = geodetic_to_lclf(record.center);
    const Eigen::Index n = s.dim();

    VecX x_new(n + 3);
    x_new.head(n) = s.x;
    x_new.tail<3>() = pos;
    s.x = std::move(x_new);

    MatX p_new = MatX::Zero(n + 3, n + 3);
    p_new.topLeftCorner(n, n) = s.P;
    p_new.bottomRightCorner(3, 3) =
        params.feature_std_m * params.feature_std_m * Mat3::Identity();
    s.P = std::move(p_new);

    const std::size_t slot = s.feature_ids.size();
    s.feature_ids.push_back(record.id);
    s.feature_slot[record.id] = slot;
    s.tracks[record.id];  // default-initialized stats
    return slot;
}

namespace {

// Direction from the camera to feature i and its norm; shared by the
// prediction and the Jacobian.
Vec3 feature_offset(const NavState& s, std::size_t i) {
    if (i >= s.feature_count()) {
        throw Error("ekf: feature index " + std::to_string(i) + " not registered");
    }
    return s.feature(i) - s.position();
}

}  // namespace

Vec3 predict_measurement(const NavState& s, std::size_t i) {
    const Vec3 d = feature_offset(s, i);
    const double r = d.norm();
    if (r <= 1e-9) {
        throw Error("predict_measurement: feature coincides with the camera position");
    }
    return d / r;
}

MatX measurement_jacobian(const NavState& s, std::size_t i) {
    const Vec3 d = feature_offset(s, i);
    const double r = d.norm();
    if (r <= 1e-9) {
        throw Error("measurement_jacobian: feature coincides with the camera position");
    }
    const Vec3 z = d / r;
    const Mat3 projector = (Mat3::Identity() - z * z.transpose()) / r;

    MatX h = MatX::Zero(3, s.dim());
    h.block<3, 3>(0, 3) = -projector;  // d z / d X_c
    h.block(0, 6 + 3 * static_cast<Eigen::Index>(i), 3, 3) = projector;  // d z / d X_Fi
    return h;
}

UpdateOutcome update(NavState& s, std::vector<Observation> observations,
                     const FilterParams& params) {
    UpdateOutcome outcome;
    outcome.n_observations = static_cast<int>(observations.size());
    if (observations.empty()) {
        outcome.applied = false;
        outcome.note = "no observations";
        return outcome;
    }
    for (const auto& obs : observations) {
        if (obs.feature >= s.feature_count()) {
            throw Error("update: observation references unknown feature index " +
                        std::to_string(obs.feature));
        }
        if (std::abs(obs.z.norm() - 1.0) > 1e-6) {
            throw Error("update: observed vector is not unit-norm");
        }
    }
    // Deterministic stacking order: ascending feature registry order.
    std::sort(observations.begin(), observations.end(),
              [](const Observation& a, const Observation& b) { return a.feature < b.feature; });

    const Eigen::Index n = s.dim();
    const Eigen::Index m = 3 * static_cast<Eigen::Index>(observations.size());

    MatX h = MatX::Zero(m, n);
    VecX residual(m);
    for (std::size_t i = 0; i < observations.size(); ++i) {
        const auto& obs = observations[i];
        const Vec3 predicted = predict_measurement(s, obs.feature);
        residual.segment<3>(3 * static_cast<Eigen::Index>(i)) = obs.z - predicted;
        h.block(3 * static_cast<Eigen::Index>(i), 0, 3, n) =
            measurement_jacobian(s, obs.feature);
    }

    const double r_var = params.meas_noise_std * params.meas_noise_std;
    MatX innovation_cov = h * s.P * h.transpose();
    innovation_cov.diagonal().array() += r_var;

    Eigen::LDLT<MatX> ldlt(innovation_cov);
    if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-14) {
        outcome.applied = false;
        outcome.note = "innovation covariance numerically singular; update skipped";
        return outcome;
    }

    const MatX gain = s.P * h.transpose() * ldlt.solve(MatX::Identity(m, m));
    s.x += gain * residual;

    // Joseph form keeps P positive semidefinite at desk tolerances.
    const MatX a = MatX::Identity(n, n) - gain * h;
    s.P = a * s.P * a.transpose() + r_var * gain * gain.transpose();
    s.P = 0.5 * (s.P + s.P.transpose()).eval();

    outcome.applied = true;
    return outcome;
}

MatchMeasurement measure_from_match(NavState& s, const CraterMatch& match,
                                    const CameraModel& cam, const CameraPose& estimated_pose,
                                    const FilterParams& params) {
    MatchMeasurement out;

    const Vec2 px = match.detection.center;
    if (!std::isfinite(px.x()) || !std::isfinite(px.y())) {
        throw Error("measure_from_match: detection center is not finite");
    }
    // Line of sight through the detected center, oriented camera -> crater
    // to match the filter's (X_Fi - X_c) measurement convention.
    const Vec3 dir_cam((px.x() - cam.cx) / cam.focal_px, (px.y() - cam.cy) / cam.focal_px, 1.0);
    out.z = (estimated_pose.lclf_to_camera.transpose() * dir_cam).normalized();

    if (!s.has_feature(match.record.id)) {
        out.feature = initialize_feature(s, match.record, params);
        out.newly_initialized = true;
    } else {
        out.feature = s.feature_slot.at(match.record.id);
    }

    TrackStats& stats = s.tracks[match.record.id];
    stats.total += 1;
    stats.consecutive = (stats.last_seen == s.k - 1) ? stats.consecutive + 1 : 1;
    stats.last_seen = s.k;
    return out;
}

}  // namespace ekf
}  // namespace lunatrn
