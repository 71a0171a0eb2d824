#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace lunatrn {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

namespace constants {

/// Spherical lunar reference radius [m].
inline constexpr double kMoonRadiusM = 1'737'400.0;

/// Lunar gravitational parameter GM [m^3/s^2].
inline constexpr double kMoonMuM3S2 = 4.9028000661e12;

inline constexpr double kPi = 3.141592653589793238462643383279502884;

}  // namespace constants

inline double deg2rad(double deg) { return deg * constants::kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / constants::kPi; }

/// Wrap an angle into (-pi, pi].
inline double wrap_longitude(double lon) {
    const double two_pi = 2.0 * constants::kPi;
    double w = std::fmod(lon, two_pi);
    if (w <= -constants::kPi) w += two_pi;
    if (w > constants::kPi) w -= two_pi;
    return w;
}

/// Base class for toolkit errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Bad or inconsistent configuration; CLI maps this to exit code 1.
struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(what) {}
};

/// File access or format problems; CLI maps this to exit code 2.
struct IoError : Error {
    explicit IoError(const std::string& what) : Error(what) {}
};

}  // namespace lunatrn
