#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <filesystem>

#include "vantage/error.hpp"

namespace vantage {

/// Normalize an angle into (-pi, pi]. Throws ConfigError on non-finite input.
double wrap_angle(double theta);

/// Planar robot base pose (SE(2)).
struct Pose2D {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;

    Pose2D normalized() const { return {x, y, wrap_angle(theta)}; }

    double distance_to(const Pose2D& other) const {
        const double dx = x - other.x;
        const double dy = y - other.y;
        return std::sqrt(dx * dx + dy * dy);
    }
};

/// Rigid transform in SE(3). Rotation is expected orthonormal with det +1;
/// composition and inverse preserve that.
struct RigidTransformSE3 {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    RigidTransformSE3 operator*(const RigidTransformSE3& rhs) const {
        return {rotation * rhs.rotation, rotation * rhs.translation + translation};
    }

    Eigen::Vector3d operator*(const Eigen::Vector3d& p) const {
        return rotation * p + translation;
    }

    RigidTransformSE3 inverse() const {
        return {rotation.transpose(), -(rotation.transpose() * translation)};
    }

    Eigen::Matrix4d matrix() const {
        Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
        m.topLeftCorner<3, 3>() = rotation;
        m.topRightCorner<3, 1>() = translation;
        return m;
    }

    bool is_rigid(double tol = 1e-9) const {
        const Eigen::Matrix3d err = rotation * rotation.transpose() - Eigen::Matrix3d::Identity();
        return err.cwiseAbs().maxCoeff() <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
    }
};

/// Build an SE(3) transform from a (w, x, y, z) quaternion and translation.
/// The quaternion is normalized; a zero quaternion is rejected.
RigidTransformSE3 se3_from_quat_wxyz(double w, double x, double y, double z,
                                     const Eigen::Vector3d& translation);

/// Pinhole camera. Convention: +z forward, +x right, +y down. Pixel (row r,
/// col c) samples the image plane at (u = c, v = r).
struct CameraIntrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;

    void validate() const;

    /// Intrinsics for the same field of view at a different resolution.
    CameraIntrinsics scaled(int new_width, int new_height) const {
        const double sx = static_cast<double>(new_width) / width;
        const double sy = static_cast<double>(new_height) / height;
        return {fx * sx, fy * sy, cx * sx, cy * sy, new_width, new_height};
    }
};

struct PixelProjection {
    double u = 0.0;
    double v = 0.0;
    double depth = 0.0;
};

/// Project a camera-frame point. Throws NumericsError when z <= 0.
PixelProjection project_point(const Eigen::Vector3d& p_cam, const CameraIntrinsics& K);

/// Inverse of project_point given the depth.
Eigen::Vector3d unproject_pixel(double u, double v, double depth, const CameraIntrinsics& K);

/// Lift a planar pose to SE(3): rotation about world +z by theta, translation
/// (x, y, height_offset).
RigidTransformSE3 pose_to_se3(const Pose2D& p, double height_offset = 0.0);

/// World-frame camera pose for a base pose and a fixed base-to-camera rig.
RigidTransformSE3 base_to_camera(const Pose2D& p, const RigidTransformSE3& rig,
                                 double height_offset = 0.0);

struct CameraConfig {
    CameraIntrinsics intrinsics;
    RigidTransformSE3 rig;
};

/// Load intrinsics + rig from a JSON file with keys fx, fy, cx, cy, width,
/// height, rig_rotation (quaternion wxyz), rig_translation (xyz meters).
CameraConfig load_camera_config(const std::filesystem::path& path);

} // namespace vantage
