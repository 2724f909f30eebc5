#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vantage/geometry.hpp"
#include "vantage/image.hpp"

namespace vantage {

struct Aabb {
    Eigen::Vector3d min = Eigen::Vector3d::Constant(std::numeric_limits<double>::max());
    Eigen::Vector3d max = Eigen::Vector3d::Constant(std::numeric_limits<double>::lowest());

    void expand(const Eigen::Vector3d& p) {
        min = min.cwiseMin(p);
        max = max.cwiseMax(p);
    }
    void expand(const Aabb& other) {
        min = min.cwiseMin(other.min);
        max = max.cwiseMax(other.max);
    }
    bool contains(const Eigen::Vector3d& p) const {
        return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
    }
    bool valid() const { return (min.array() <= max.array()).all(); }
    Eigen::Vector3d center() const { return 0.5 * (min + max); }
    Eigen::Vector3d extent() const { return max - min; }
};

/// One anisotropic Gaussian. Covariance is symmetric positive definite
/// (eigenvalues clamped at 1e-8 on ingestion). Color is stored as spherical
/// harmonic coefficients: sh_dc is the degree-0 term, sh_rest holds the
/// optional higher-degree coefficients (3, 8, or 15 per channel).
struct Gaussian3D {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    Eigen::Matrix3d covariance = Eigen::Matrix3d::Identity();
    double opacity = 1.0;
    Eigen::Vector3f sh_dc = Eigen::Vector3f::Zero();
    std::vector<Eigen::Vector3f> sh_rest;
};

/// Degree-0 SH normalization constant; color = 0.5 + kShC0 * dc (+ higher terms).
constexpr double kShC0 = 0.28209479177387814;

/// Evaluate a Gaussian's color toward a (world-frame, normalized) viewing
/// direction, clamped to [0, 1] per channel.
Eigen::Vector3f evaluate_sh(const Gaussian3D& g, const Eigen::Vector3d& view_dir);

struct SplatScene {
    std::vector<Gaussian3D> gaussians;
    Aabb world_bounds;
    Eigen::Vector3f background = Eigen::Vector3f::Zero();
    /// Indices of Gaussians belonging to the tagged object-of-interest region.
    std::vector<std::uint32_t> object_indices;
    std::optional<Aabb> object_bounds;

    size_t size() const { return gaussians.size(); }
};

/// Load a binary little-endian 3DGS PLY (x y z opacity-logit, log scales,
/// wxyz quaternion, f_dc, optional f_rest). Throws ParseError with the record
/// index on malformed input.
SplatScene load_splat_file(const std::filesystem::path& path);

/// Serialize in the same PLY layout. Scales/rotations recovered from the
/// covariance eigendecomposition, opacities mapped back through the logit.
void save_splat_file(const SplatScene& scene, const std::filesystem::path& path);

/// Tag every Gaussian whose mean lies inside the box as object-of-interest.
void tag_object_region(SplatScene& scene, const Aabb& region);

/// Screen-space footprint of one Gaussian.
struct ProjectedGaussian {
    double u = 0.0;
    double v = 0.0;
    Eigen::Matrix2d cov2d = Eigen::Matrix2d::Identity();
    double depth = 0.0;
    double opacity = 0.0;
};

/// EWA projection of a Gaussian into the image plane; cov2d eigenvalues are
/// clamped below at 0.3 px^2. Returns nullopt when the mean is behind the
/// camera (culled).
std::optional<ProjectedGaussian> project_gaussian(const Gaussian3D& g,
                                                  const RigidTransformSE3& cam,
                                                  const CameraIntrinsics& K);

struct RenderResult {
    ImageRGB rgb;
    /// Alpha-weighted mean depth over the blended contributions.
    ImageDepth depth;
    /// Depth of the Gaussian at which accumulated opacity first reaches 0.5;
    /// immune to the silhouette mixing the weighted mean suffers from, which
    /// is what occupancy mapping needs.
    ImageDepth surface_depth;
    /// Per-pixel accumulated alpha contributed by tagged object Gaussians.
    ImageGray object_weight;
};

/// Forward splatting: Gaussians sorted front-to-back by camera-space mean
/// depth (index tie-break), alpha-blended over the background. Contributions
/// are limited to 3 sigma of the projected footprint. Parallelized over image
/// rows; output is independent of thread count.
RenderResult render(const SplatScene& scene, const RigidTransformSE3& cam,
                    const CameraIntrinsics& K);

/// Naive pixel-major reference renderer with the same blending contract.
/// Slow; kept for validating the production path in tests and benchmarks.
RenderResult render_reference(const SplatScene& scene, const RigidTransformSE3& cam,
                              const CameraIntrinsics& K);

// --- synthetic scenes -------------------------------------------------------

struct PrimitiveSpec {
    enum class Type { Box, Sphere };
    Type type = Type::Box;
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    Eigen::Vector3d size = Eigen::Vector3d::Ones(); // boxes: full edge lengths
    double radius = 0.5;                            // spheres
    double yaw = 0.0;                               // boxes: rotation about +z
    Eigen::Vector3f color = Eigen::Vector3f::Constant(0.5f);
    double density = 500.0; // surface points per square meter
    double opacity = 0.9;
    bool object_of_interest = false;
};

struct SceneSpec {
    std::uint64_t seed = 0;
    Eigen::Vector3f background = Eigen::Vector3f::Zero();
    std::optional<Aabb> bounds;
    std::vector<PrimitiveSpec> primitives;
};

SceneSpec load_scene_spec(const std::filesystem::path& path);

/// Deterministic conversion of primitives into surface-sampled Gaussian
/// clouds. Same spec and seed give a byte-identical scene.
SplatScene synthesize_scene(const SceneSpec& spec);

/// World-space AABB of a primitive (box corners rotated by yaw).
Aabb primitive_bounds(const PrimitiveSpec& prim);

} // namespace vantage
