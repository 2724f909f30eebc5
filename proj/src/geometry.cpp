#include "vantage/geometry.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace vantage {

double wrap_angle(double theta) {
    if (!std::isfinite(theta)) {
        throw ConfigError("wrap_angle: non-finite angle");
    }
    double r = std::fmod(theta + M_PI, 2.0 * M_PI);
    if (r <= 0.0) r += 2.0 * M_PI;
    return r - M_PI;
}

RigidTransformSE3 se3_from_quat_wxyz(double w, double x, double y, double z,
                                     const Eigen::Vector3d& translation) {
    const double n = std::sqrt(w * w + x * x + y * y + z * z);
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw ConfigError("se3_from_quat_wxyz: quaternion has zero or non-finite norm");
    }
    const Eigen::Quaterniond q(w / n, x / n, y / n, z / n);
    return {q.toRotationMatrix(), translation};
}

void CameraIntrinsics::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) {
        throw ConfigError("intrinsics: fx and fy must be positive");
    }
    if (width <= 0 || height <= 0) {
        throw ConfigError("intrinsics: width and height must be positive");
    }
    if (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height) {
        throw ConfigError("intrinsics: principal point outside the image");
    }
}

PixelProjection project_point(const Eigen::Vector3d& p_cam, const CameraIntrinsics& K) {
    if (!(p_cam.z() > 0.0)) {
        throw NumericsError("project_point: point behind camera (z <= 0)");
    }
    return {K.cx + K.fx * p_cam.x() / p_cam.z(),
            K.cy + K.fy * p_cam.y() / p_cam.z(),
            p_cam.z()};
}

Eigen::Vector3d unproject_pixel(double u, double v, double depth, const CameraIntrinsics& K) {
    return {(u - K.cx) * depth / K.fx, (v - K.cy) * depth / K.fy, depth};
}

RigidTransformSE3 pose_to_se3(const Pose2D& p, double height_offset) {
    const double c = std::cos(p.theta);
    const double s = std::sin(p.theta);
    RigidTransformSE3 t;
    t.rotation << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
    t.translation = {p.x, p.y, height_offset};
    return t;
}

RigidTransformSE3 base_to_camera(const Pose2D& p, const RigidTransformSE3& rig,
                                 double height_offset) {
    return pose_to_se3(p, height_offset) * rig;
}

CameraConfig load_camera_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("camera config not found: " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ParseError("camera config " + path.string() + ": " + e.what());
    }
    CameraConfig cfg;
    try {
        cfg.intrinsics.fx = j.at("fx").get<double>();
        cfg.intrinsics.fy = j.at("fy").get<double>();
        cfg.intrinsics.cx = j.at("cx").get<double>();
        cfg.intrinsics.cy = j.at("cy").get<double>();
        cfg.intrinsics.width = j.at("width").get<int>();
        cfg.intrinsics.height = j.at("height").get<int>();
        const auto q = j.at("rig_rotation").get<std::vector<double>>();
        const auto t = j.at("rig_translation").get<std::vector<double>>();
        if (q.size() != 4 || t.size() != 3) {
            throw ParseError("camera config: rig_rotation needs 4 values (wxyz), "
                             "rig_translation needs 3");
        }
        cfg.rig = se3_from_quat_wxyz(q[0], q[1], q[2], q[3], {t[0], t[1], t[2]});
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("camera config " + path.string() + ": " + e.what());
    }
    cfg.intrinsics.validate();
    return cfg;
}

} // namespace vantage
