#include "lunatrn/geometry.hpp"

#include <cmath>

namespace lunatrn {

namespace {

constexpr double kTiny = 1e-12;

}  // namespace

Geodetic::Geodetic(double lat_rad, double lon_rad, double radius_m)
    : lat(lat_rad), lon(wrap_longitude(lon_rad)), radius(radius_m) {
    if (!std::isfinite(lat) || !std::isfinite(lon) || !std::isfinite(radius)) {
        throw Error("Geodetic: non-finite component");
    }
    if (lat < -constants::kPi / 2.0 - 1e-12 || lat > constants::kPi / 2.0 + 1e-12) {
        throw Error("Geodetic: latitude out of [-pi/2, pi/2]");
    }
    if (radius <= 0.0) {
        throw Error("Geodetic: radius must be positive");
    }
}

CameraModel CameraModel::square(double focal, int size_px) {
    CameraModel cam;
    cam.focal_px = focal;
    cam.width_px = size_px;
    cam.height_px = size_px;
    cam.cx = size_px / 2.0;
    cam.cy = size_px / 2.0;
    return cam;
}

void CameraModel::validate() const {
    if (!(focal_px > 0.0)) throw Error("CameraModel: focal_px must be positive");
    if (width_px <= 0 || height_px <= 0) throw Error("CameraModel: image dimensions must be positive");
    if (cx < 0.0 || cx > width_px || cy < 0.0 || cy > height_px) {
        throw Error("CameraModel: principal point outside image");
    }
}

bool LatLonBox::contains(double lat, double lon) const {
    if (lat < lat_min || lat > lat_max) return false;
    const double w = wrap_longitude(lon);
    if (wraps()) {
        return w >= lon_min || w <= lon_max;
    }
    return w >= lon_min && w <= lon_max;
}

Vec3 geodetic_to_lclf(const Geodetic& g) {
    const double clat = std::cos(g.lat);
    return {g.radius * clat * std::cos(g.lon),
            g.radius * clat * std::sin(g.lon),
            g.radius * std::sin(g.lat)};
}

Geodetic lclf_to_geodetic(const Vec3& p) {
    const double r = p.norm();
    if (r <= kTiny) {
        throw Error("lclf_to_geodetic: zero vector has no geodetic image");
    }
    const double lat = std::asin(std::clamp(p.z() / r, -1.0, 1.0));
    const double lon = std::atan2(p.y(), p.x());
    return Geodetic(lat, lon, r);
}

CameraPose nadir_pose(const Vec3& position, const Vec3& reference_north) {
    const double r = position.norm();
    if (r <= kTiny) {
        throw Error("nadir_pose: position at body center");
    }
    const Vec3 z_cam = -position / r;  // boresight toward the center
    Vec3 north_in_plane = reference_north - reference_north.dot(z_cam) * z_cam;
    const double n = north_in_plane.norm();
    if (n <= 1e-9 * reference_north.norm()) {
        throw Error("nadir_pose: position radially aligned with reference north");
    }
    // Image "up" (-v) carries north, so camera +Y (v, downward) is -north.
    const Vec3 y_cam = -north_in_plane / n;
    const Vec3 x_cam = y_cam.cross(z_cam);

    CameraPose pose;
    pose.position = position;
    pose.lclf_to_camera.row(0) = x_cam.transpose();
    pose.lclf_to_camera.row(1) = y_cam.transpose();
    pose.lclf_to_camera.row(2) = z_cam.transpose();
    return pose;
}

std::optional<Vec2> project(const Vec3& point, const CameraPose& pose,
                            const CameraModel& cam, double margin_frac) {
    const Vec3 p_cam = pose.lclf_to_camera * (point - pose.position);
    if (p_cam.z() <= kTiny) {
        return std::nullopt;
    }
    const double u = cam.cx + cam.focal_px * p_cam.x() / p_cam.z();
    const double v = cam.cy + cam.focal_px * p_cam.y() / p_cam.z();
    const double mu = margin_frac * cam.width_px;
    const double mv = margin_frac * cam.height_px;
    if (u < -mu || u > cam.width_px + mu || v < -mv || v > cam.height_px + mv) {
        return std::nullopt;
    }
    return Vec2(u, v);
}

std::optional<Vec3> ray_sphere_intersect(const Vec3& origin, const Vec3& dir,
                                         double radius) {
    const Vec3 d = dir.normalized();
    const double tca = -origin.dot(d);
    const double d2 = origin.squaredNorm() - tca * tca;
    const double r2 = radius * radius;
    if (d2 > r2) return std::nullopt;
    const double thc = std::sqrt(r2 - d2);
    const double t0 = tca - thc;
    const double t1 = tca + thc;
    const double t = t0 > kTiny ? t0 : (t1 > kTiny ? t1 : -1.0);
    if (t < 0.0) return std::nullopt;
    return origin + t * d;
}

LatLonBox footprint_bounds(const CameraPose& pose, const CameraModel& cam,
                           double margin_frac, double surface_radius) {
    cam.validate();
    const Vec3 boresight = pose.boresight();
    const auto center_hit = ray_sphere_intersect(pose.position, boresight, surface_radius);
    if (!center_hit) {
        throw Error("footprint_bounds: boresight does not intersect the surface");
    }
    const Geodetic center_geo = lclf_to_geodetic(*center_hit);

    const Mat3 cam_to_lclf = pose.lclf_to_camera.transpose();

    double lat_min = center_geo.lat, lat_max = center_geo.lat;
    double dlon_min = 0.0, dlon_max = 0.0;

    // Walk the image border; where a ray misses the sphere, fall back to
    // the limb point nearest the ray.
    const int samples_per_edge = 8;
    for (int e = 0; e < 4; ++e) {
        for (int s = 0; s <= samples_per_edge; ++s) {
            const double f = static_cast<double>(s) / samples_per_edge;
            double u = 0.0, v = 0.0;
            switch (e) {
                case 0: u = f * cam.width_px; v = 0.0; break;
                case 1: u = f * cam.width_px; v = cam.height_px; break;
                case 2: u = 0.0; v = f * cam.height_px; break;
                default: u = cam.width_px; v = f * cam.height_px; break;
            }
            const Vec3 dir_cam((u - cam.cx) / cam.focal_px, (v - cam.cy) / cam.focal_px, 1.0);
            const Vec3 dir = (cam_to_lclf * dir_cam).normalized();

            Vec3 ground;
            if (auto hit = ray_sphere_intersect(pose.position, dir, surface_radius)) {
                ground = *hit;
            } else {
                const double t = -pose.position.dot(dir);
                const Vec3 closest = pose.position + std::max(t, 0.0) * dir;
                ground = closest.normalized() * surface_radius;
            }
            const Geodetic g = lclf_to_geodetic(ground);
            lat_min = std::min(lat_min, g.lat);
            lat_max = std::max(lat_max, g.lat);
            const double dlon = wrap_longitude(g.lon - center_geo.lon);
            dlon_min = std::min(dlon_min, dlon);
            dlon_max = std::max(dlon_max, dlon);
        }
    }

    const double lat_margin = margin_frac * (lat_max - lat_min);
    const double lon_margin = margin_frac * (dlon_max - dlon_min);

    LatLonBox box;
    box.lat_min = std::max(lat_min - lat_margin, -constants::kPi / 2.0);
    box.lat_max = std::min(lat_max + lat_margin, constants::kPi / 2.0);
    if ((dlon_max - dlon_min) + 2.0 * lon_margin >= 2.0 * constants::kPi) {
        box.lon_min = -constants::kPi + 1e-15;
        box.lon_max = constants::kPi;
    } else {
        box.lon_min = wrap_longitude(center_geo.lon + dlon_min - lon_margin);
        box.lon_max = wrap_longitude(center_geo.lon + dlon_max + lon_margin);
    }
    return box;
}

}  // namespace lunatrn
