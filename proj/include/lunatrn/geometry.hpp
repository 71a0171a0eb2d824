#pragma once

#include "lunatrn/types.hpp"

#include <optional>

namespace lunatrn {

/// Spherical geodetic coordinates on the Moon.
///
/// - `lat`: [-pi/2, +pi/2] radians
/// - `lon`: (-pi, +pi] radians, normalized on construction
/// - `radius`: distance from the body center [m], > 0
struct Geodetic {
    double lat = 0.0;
    double lon = 0.0;
    double radius = constants::kMoonRadiusM;

    Geodetic() = default;
    Geodetic(double lat_rad, double lon_rad, double radius_m);
};

/// Pinhole camera intrinsics. Pixel convention: origin at the top-left
/// corner, u rightward, v downward; principal point defaults to the image
/// center.
struct CameraModel {
    double focal_px = 256.0;
    int width_px = 256;
    int height_px = 256;
    double cx = 128.0;
    double cy = 128.0;

    static CameraModel square(double focal, int size_px);
    void validate() const;
};

/// Camera extrinsics: position in LCLF plus the rotation taking LCLF
/// directions into the camera frame. Boresight is camera +Z.
struct CameraPose {
    Vec3 position = Vec3::Zero();
    Mat3 lclf_to_camera = Mat3::Identity();

    /// Unit boresight direction expressed in LCLF.
    Vec3 boresight() const { return lclf_to_camera.row(2).transpose(); }
};

/// Latitude/longitude bounding box. The longitude interval runs eastward
/// from `lon_min` to `lon_max`; `lon_min > lon_max` means the box crosses
/// the date line.
struct LatLonBox {
    double lat_min = 0.0;
    double lat_max = 0.0;
    double lon_min = 0.0;
    double lon_max = 0.0;

    bool contains(double lat, double lon) const;
    bool wraps() const { return lon_min > lon_max; }
};

/// Geodetic -> lunar-centered lunar-fixed Cartesian [m].
Vec3 geodetic_to_lclf(const Geodetic& g);

/// Cartesian -> geodetic. Throws Error on the zero vector.
Geodetic lclf_to_geodetic(const Vec3& p);

/// Nadir-pointing pose at `position`: boresight toward the body center,
/// image "up" (-v) aligned with the projection of `reference_north` onto
/// the image plane. Throws Error when the geometry degenerates (position
/// at the center, or radially aligned with `reference_north`).
CameraPose nadir_pose(const Vec3& position, const Vec3& reference_north = Vec3::UnitZ());

/// Pinhole projection to pixel coordinates. Returns nullopt when the point
/// is at/behind the camera plane or lands outside the image rectangle
/// inflated by `margin_frac` of the width/height on each side.
std::optional<Vec2> project(const Vec3& point, const CameraPose& pose,
                            const CameraModel& cam, double margin_frac = 0.0);

/// Lat/lon bounding box of the viewing footprint on the sphere of radius
/// `surface_radius`, inflated by `margin_frac` of the box extent on each
/// side. Throws Error when the boresight misses the sphere.
LatLonBox footprint_bounds(const CameraPose& pose, const CameraModel& cam,
                           double margin_frac = 0.10,
                           double surface_radius = constants::kMoonRadiusM);

/// First intersection of the ray `origin + t*dir` with the sphere of the
/// given radius centered at the origin, or nullopt if the ray misses.
std::optional<Vec3> ray_sphere_intersect(const Vec3& origin, const Vec3& dir,
                                         double radius);

}  // namespace lunatrn
