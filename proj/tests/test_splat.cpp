#include <doctest.h>

#include <Eigen/Dense>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "vantage/rng.hpp"
#include "vantage/splat.hpp"

using namespace vantage;

namespace {

// Independent projection + alpha-blend oracle used to validate the renderer.
struct OracleProjection {
    double u, v;
    Eigen::Matrix2d cov2d;
    double depth;
};

OracleProjection oracle_project(const Gaussian3D& g, const RigidTransformSE3& cam,
                                const CameraIntrinsics& K) {
    const Eigen::Matrix3d W = cam.rotation.transpose();
    const Eigen::Vector3d p = W * (g.mean - cam.translation);
    Eigen::Matrix<double, 2, 3> J;
    J << K.fx / p.z(), 0.0, -K.fx * p.x() / (p.z() * p.z()), 0.0, K.fy / p.z(),
        -K.fy * p.y() / (p.z() * p.z());
    Eigen::Matrix2d cov2d = J * (W * g.covariance * W.transpose()) * J.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov2d);
    const Eigen::Vector2d lambda = es.eigenvalues().cwiseMax(0.3);
    cov2d = es.eigenvectors() * lambda.asDiagonal() * es.eigenvectors().transpose();
    return {K.cx + K.fx * p.x() / p.z(), K.cy + K.fy * p.y() / p.z(), cov2d, p.z()};
}

double oracle_alpha(const OracleProjection& proj, double opacity, double px, double py) {
    const Eigen::Vector2d d(px - proj.u, py - proj.v);
    const double m2 = d.dot(proj.cov2d.inverse() * d);
    if (m2 > 9.0) return 0.0;
    return opacity * std::exp(-0.5 * m2);
}

Eigen::Vector3d dc_color(const Gaussian3D& g) {
    return (Eigen::Vector3d::Constant(0.5) + kShC0 * g.sh_dc.cast<double>())
        .cwiseMax(0.0)
        .cwiseMin(1.0);
}

Gaussian3D make_gaussian(const Eigen::Vector3d& mean, double sigma, double opacity,
                         const Eigen::Vector3f& color) {
    Gaussian3D g;
    g.mean = mean;
    g.covariance = sigma * sigma * Eigen::Matrix3d::Identity();
    g.opacity = opacity;
    g.sh_dc = ((color.cast<double>() - Eigen::Vector3d::Constant(0.5)) / kShC0).cast<float>();
    return g;
}

RigidTransformSE3 identity_cam() { return {}; } // at origin, +z forward

const CameraIntrinsics kTestK{100.0, 100.0, 64.0, 48.0, 128, 96};

// Minimal binary 3DGS PLY writer for loader tests.
void write_test_ply(const std::filesystem::path& path,
                    const std::vector<std::array<float, 14>>& rows, bool drop_opacity = false) {
    std::ofstream out(path, std::ios::binary);
    out << "ply\nformat binary_little_endian 1.0\n";
    out << "element vertex " << rows.size() << "\n";
    out << "property float x\nproperty float y\nproperty float z\n";
    if (!drop_opacity) out << "property float opacity\n";
    out << "property float scale_0\nproperty float scale_1\nproperty float scale_2\n";
    out << "property float rot_0\nproperty float rot_1\nproperty float rot_2\nproperty float "
           "rot_3\n";
    out << "property float f_dc_0\nproperty float f_dc_1\nproperty float f_dc_2\n";
    out << "end_header\n";
    for (const auto& row : rows) {
        if (drop_opacity) {
            out.write(reinterpret_cast<const char*>(row.data()), 3 * sizeof(float));
            out.write(reinterpret_cast<const char*>(row.data() + 4), 10 * sizeof(float));
        } else {
            out.write(reinterpret_cast<const char*>(row.data()), 14 * sizeof(float));
        }
    }
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

} // namespace

TEST_SUITE("splat") {

TEST_CASE("ply loader maps raw fields to gaussian parameters") {
    const auto path = temp_file("splat_one.ply");
    // x y z opacity s0 s1 s2 rw rx ry rz dc0 dc1 dc2
    write_test_ply(path, {{1.0f, 2.0f, 3.0f, 0.0f, 0.0f, 0.0f, 0.0f, 1.0f, 0.0f, 0.0f, 0.0f, 0.5f,
                           -0.5f, 0.25f}});
    const SplatScene scene = load_splat_file(path);
    REQUIRE(scene.size() == 1);
    const auto& g = scene.gaussians[0];
    CHECK(g.opacity == doctest::Approx(0.5)); // sigmoid(0)
    CHECK((g.covariance - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(g.mean == Eigen::Vector3d(1.0, 2.0, 3.0));
    CHECK(g.sh_dc[0] == doctest::Approx(0.5f));
    CHECK(scene.world_bounds.contains(g.mean));
}

TEST_CASE("ply loader: empty file renders background") {
    const auto path = temp_file("splat_empty.ply");
    write_test_ply(path, {});
    const SplatScene scene = load_splat_file(path);
    CHECK(scene.size() == 0);
    auto result = render(scene, identity_cam(), kTestK);
    for (size_t i = 0; i < result.rgb.data.size(); ++i) {
        CHECK(result.rgb.data[i] == 0.0f);
    }
    for (float d : result.depth.data) CHECK(d == ImageDepth::kNoHit);
}

TEST_CASE("ply loader error paths") {
    SUBCASE("missing property") {
        const auto path = temp_file("splat_noop.ply");
        write_test_ply(path, {{0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0}}, true);
        CHECK_THROWS_AS(load_splat_file(path), ParseError);
    }
    SUBCASE("non-finite value carries the record index") {
        const auto path = temp_file("splat_nan.ply");
        write_test_ply(path, {{0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0},
                              {std::nanf(""), 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0}});
        CHECK_THROWS_WITH_AS(load_splat_file(path), doctest::Contains("record 1"), ParseError);
    }
    SUBCASE("truncated payload") {
        const auto path = temp_file("splat_trunc.ply");
        write_test_ply(path, {{0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0}});
        std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
        CHECK_THROWS_AS(load_splat_file(path), ParseError);
    }
    SUBCASE("ascii format rejected") {
        const auto path = temp_file("splat_ascii.ply");
        std::ofstream out(path);
        out << "ply\nformat ascii 1.0\nelement vertex 0\nend_header\n";
        out.close();
        CHECK_THROWS_AS(load_splat_file(path), ParseError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_splat_file("/nonexistent/scene.ply"), ConfigError);
    }
}

TEST_CASE("ply round trip preserves the scene") {
    SceneSpec spec;
    spec.seed = 11;
    PrimitiveSpec box;
    box.center = {0.4, -0.2, 0.3};
    box.size = {0.5, 0.4, 0.6};
    box.yaw = 0.7;
    box.color = {0.8f, 0.3f, 0.2f};
    box.density = 200.0;
    spec.primitives.push_back(box);
    const SplatScene scene = synthesize_scene(spec);

    const auto path = temp_file("splat_roundtrip.ply");
    save_splat_file(scene, path);
    const SplatScene loaded = load_splat_file(path);
    REQUIRE(loaded.size() == scene.size());
    for (size_t i = 0; i < scene.size(); ++i) {
        CHECK((loaded.gaussians[i].mean - scene.gaussians[i].mean).norm() < 1e-5);
        CHECK((loaded.gaussians[i].covariance - scene.gaussians[i].covariance)
                  .cwiseAbs()
                  .maxCoeff() < 1e-6);
        CHECK(loaded.gaussians[i].opacity ==
              doctest::Approx(scene.gaussians[i].opacity).epsilon(1e-4));
        CHECK((loaded.gaussians[i].sh_dc - scene.gaussians[i].sh_dc).norm() < 1e-5);
    }
}

TEST_CASE("project_gaussian") {
    SUBCASE("isotropic gaussian on the optical axis") {
        const double s = 0.1;
        const double z = 2.0;
        const auto g = make_gaussian({0, 0, z}, s, 1.0, {1, 0, 0});
        const auto proj = project_gaussian(g, identity_cam(), kTestK);
        REQUIRE(proj.has_value());
        const double expected = (kTestK.fx * s / z) * (kTestK.fx * s / z);
        CHECK(proj->cov2d(0, 0) == doctest::Approx(expected).epsilon(1e-9));
        CHECK(proj->cov2d(1, 1) == doctest::Approx(expected).epsilon(1e-9));
        CHECK(std::abs(proj->cov2d(0, 1)) < 1e-9);
        CHECK(proj->depth == doctest::Approx(z));
    }
    SUBCASE("point-like gaussian clamps to the 0.3 px^2 floor") {
        const auto g = make_gaussian({0, 0, 2.0}, 1e-9, 1.0, {1, 0, 0});
        const auto proj = project_gaussian(g, identity_cam(), kTestK);
        REQUIRE(proj.has_value());
        CHECK(proj->cov2d(0, 0) == doctest::Approx(0.3));
        CHECK(proj->cov2d(1, 1) == doctest::Approx(0.3));
    }
    SUBCASE("behind camera is culled") {
        const auto g = make_gaussian({0, 0, -1.0}, 0.1, 1.0, {1, 0, 0});
        CHECK_FALSE(project_gaussian(g, identity_cam(), kTestK).has_value());
    }
}

TEST_CASE("render: single opaque gaussian hits its dc color at the center pixel") {
    SplatScene scene;
    scene.gaussians.push_back(make_gaussian({0, 0, 2.0}, 0.05, 1.0, {0.8f, 0.3f, 0.1f}));
    scene.world_bounds.expand(scene.gaussians[0].mean);
    const auto result = render(scene, identity_cam(), kTestK);
    // Projected center is exactly pixel (cy, cx) = (48, 64).
    const float* px = result.rgb.px(48, 64);
    CHECK(px[0] == doctest::Approx(0.8).epsilon(1e-6));
    CHECK(px[1] == doctest::Approx(0.3).epsilon(1e-6));
    CHECK(px[2] == doctest::Approx(0.1).epsilon(1e-6));
    CHECK(result.depth.at(48, 64) == doctest::Approx(2.0));
}

TEST_CASE("render: two-gaussian blend at a shared center") {
    SplatScene scene;
    scene.background = {0.0f, 0.0f, 0.0f};
    scene.gaussians.push_back(make_gaussian({0, 0, 1.0}, 0.05, 0.5, {1, 0, 0})); // red, front
    scene.gaussians.push_back(make_gaussian({0, 0, 2.0}, 0.10, 1.0, {0, 0, 1})); // blue, back
    for (const auto& g : scene.gaussians) scene.world_bounds.expand(g.mean);
    const auto result = render(scene, identity_cam(), kTestK);
    const float* px = result.rgb.px(48, 64);
    CHECK(px[0] == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(px[1] == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(px[2] == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("render matches the analytic blend oracle at every pixel") {
    Rng rng(21);
    for (int trial = 0; trial < 5; ++trial) {
        SplatScene scene;
        scene.background = {0.2f, 0.1f, 0.3f};
        const int n = 1 + static_cast<int>(rng.uniform(0.0, 3.0));
        for (int i = 0; i < n; ++i) {
            scene.gaussians.push_back(make_gaussian(
                {rng.uniform(-0.5, 0.5), rng.uniform(-0.4, 0.4), rng.uniform(1.0, 3.0)},
                rng.uniform(0.05, 0.3), rng.uniform(0.2, 1.0),
                {static_cast<float>(rng.uniform(0.1, 0.9)),
                 static_cast<float>(rng.uniform(0.1, 0.9)),
                 static_cast<float>(rng.uniform(0.1, 0.9))}));
            scene.world_bounds.expand(scene.gaussians.back().mean);
        }
        const auto result = render(scene, identity_cam(), kTestK);

        // Sort by depth as the contract specifies, then blend analytically.
        std::vector<size_t> order(scene.size());
        std::iota(order.begin(), order.end(), size_t{0});
        std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            return scene.gaussians[a].mean.z() < scene.gaussians[b].mean.z();
        });
        std::vector<OracleProjection> projections;
        for (const auto& g : scene.gaussians) {
            projections.push_back(oracle_project(g, identity_cam(), kTestK));
        }

        double worst = 0.0;
        for (int r = 0; r < kTestK.height; ++r) {
            for (int c = 0; c < kTestK.width; ++c) {
                Eigen::Vector3d color = Eigen::Vector3d::Zero();
                double transmittance = 1.0;
                for (size_t idx : order) {
                    if (transmittance < 1e-7) continue;
                    const double alpha =
                        oracle_alpha(projections[idx], scene.gaussians[idx].opacity, c, r);
                    color += alpha * transmittance * dc_color(scene.gaussians[idx]);
                    transmittance *= 1.0 - alpha;
                }
                color += transmittance * scene.background.cast<double>();
                const float* px = result.rgb.px(r, c);
                for (int ch = 0; ch < 3; ++ch) {
                    worst = std::max(worst, std::abs(px[ch] - color[ch]));
                }
            }
        }
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("render properties: range, determinism, permutation invariance") {
    SceneSpec spec;
    spec.seed = 5;
    spec.background = {0.3f, 0.3f, 0.35f};
    PrimitiveSpec box;
    box.center = {0.8, 0.0, 0.3};
    box.size = {0.6, 0.6, 0.6};
    box.color = {0.9f, 0.4f, 0.1f};
    box.density = 300.0;
    spec.primitives.push_back(box);
    PrimitiveSpec ball;
    ball.type = PrimitiveSpec::Type::Sphere;
    ball.center = {0.6, 0.4, 0.2};
    ball.radius = 0.2;
    ball.color = {0.1f, 0.5f, 0.9f};
    ball.density = 400.0;
    spec.primitives.push_back(ball);
    SplatScene scene = synthesize_scene(spec);

    Pose2D pose{-1.0, 0.0, 0.0};
    RigidTransformSE3 rig;
    rig.translation = {0.0, 0.0, 0.4};
    const auto cam = base_to_camera(pose, rig);

    const auto a = render(scene, cam, kTestK);
    SUBCASE("channel values stay in [0, 1]") {
        for (float v : a.rgb.data) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
    }
    SUBCASE("bit-identical across repeated renders") {
        const auto b = render(scene, cam, kTestK);
        CHECK(std::memcmp(a.rgb.data.data(), b.rgb.data.data(),
                          a.rgb.data.size() * sizeof(float)) == 0);
        CHECK(std::memcmp(a.depth.data.data(), b.depth.data.data(),
                          a.depth.data.size() * sizeof(float)) == 0);
    }
    SUBCASE("permuting the input list does not change the image") {
        Rng rng(99);
        SplatScene shuffled = scene;
        for (size_t i = shuffled.size(); i > 1; --i) {
            std::swap(shuffled.gaussians[i - 1], shuffled.gaussians[rng.uniform_index(i)]);
        }
        const auto b = render(shuffled, cam, kTestK);
        CHECK(std::memcmp(a.rgb.data.data(), b.rgb.data.data(),
                          a.rgb.data.size() * sizeof(float)) == 0);
    }
    SUBCASE("reference renderer agrees bitwise") {
        const auto b = render_reference(scene, cam, kTestK);
        CHECK(std::memcmp(a.rgb.data.data(), b.rgb.data.data(),
                          a.rgb.data.size() * sizeof(float)) == 0);
    }
}

TEST_CASE("synthesize_scene: counting and determinism") {
    SceneSpec spec;
    spec.seed = 123;
    PrimitiveSpec cube;
    cube.center = {0, 0, 0.5};
    cube.size = {1.0, 1.0, 1.0};
    cube.density = 1000.0;
    spec.primitives.push_back(cube);

    const SplatScene a = synthesize_scene(spec);
    CHECK(a.size() == 6000); // 1000 per face
    const SplatScene b = synthesize_scene(spec);
    REQUIRE(b.size() == a.size());
    bool identical = true;
    for (size_t i = 0; i < a.size(); ++i) {
        identical = identical && a.gaussians[i].mean == b.gaussians[i].mean &&
                    a.gaussians[i].covariance == b.gaussians[i].covariance;
    }
    CHECK(identical);
    CHECK_THROWS_AS(synthesize_scene(SceneSpec{}), ConfigError);
}

TEST_CASE("synthesized object region is visible from a facing pose") {
    SceneSpec spec;
    spec.seed = 4;
    PrimitiveSpec object;
    object.center = {1.0, 0.0, 0.3};
    object.size = {0.3, 0.3, 0.3};
    object.color = {0.9f, 0.1f, 0.1f};
    object.density = 1500.0;
    object.object_of_interest = true;
    spec.primitives.push_back(object);
    const SplatScene scene = synthesize_scene(spec);
    REQUIRE_FALSE(scene.object_indices.empty());
    REQUIRE(scene.object_bounds.has_value());

    // Ray-test oracle: the center-pixel ray from a camera one meter away,
    // aimed at the object, intersects the primitive's box, so the rendered
    // object mask must be non-empty there.
    RigidTransformSE3 cam;
    cam.translation = {0.0, 0.0, 0.3};
    cam.rotation.col(0) = Eigen::Vector3d(0, -1, 0);
    cam.rotation.col(1) = Eigen::Vector3d(0, 0, -1);
    cam.rotation.col(2) = Eigen::Vector3d(1, 0, 0); // +z toward +x world
    const Eigen::Vector3d ray_dir = cam.rotation.col(2);
    const Aabb& box = *scene.object_bounds;
    double t_enter = -1e9, t_exit = 1e9;
    for (int axis = 0; axis < 3; ++axis) {
        if (std::abs(ray_dir[axis]) < 1e-12) continue;
        double t0 = (box.min[axis] - cam.translation[axis]) / ray_dir[axis];
        double t1 = (box.max[axis] - cam.translation[axis]) / ray_dir[axis];
        if (t0 > t1) std::swap(t0, t1);
        t_enter = std::max(t_enter, t0);
        t_exit = std::min(t_exit, t1);
    }
    REQUIRE(t_enter <= t_exit); // the ray does hit the primitive

    const auto result = render(scene, cam, kTestK);
    CHECK(result.object_weight.at(kTestK.height / 2, static_cast<int>(kTestK.cx)) > 0.5f);
}

TEST_CASE("sh degree > 0 shifts color with viewing direction") {
    Gaussian3D g = make_gaussian({0, 0, 2.0}, 0.05, 1.0, {0.5f, 0.5f, 0.5f});
    g.sh_rest.assign(3, Eigen::Vector3f::Zero());
    g.sh_rest[2] = {0.4f, 0.0f, 0.0f}; // coefficient multiplying -x
    const Eigen::Vector3f from_front = evaluate_sh(g, Eigen::Vector3d(0, 0, 1));
    const Eigen::Vector3f from_left = evaluate_sh(g, Eigen::Vector3d(-1, 0, 0));
    CHECK(from_front[0] == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(from_left[0] > from_front[0]);
}

} // TEST_SUITE
