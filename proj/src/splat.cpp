#include "vantage/splat.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "vantage/rng.hpp"

namespace vantage {

namespace {

// Real SH basis constants, degree 1..3.
constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                           -1.0925484305920792, 0.5462742152960396};
constexpr double kC3[7] = {-0.5900435899266435, 2.890611442640554,  -0.4570457994644658,
                           0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                           -0.5900435899266435};

} // namespace

Eigen::Vector3f evaluate_sh(const Gaussian3D& g, const Eigen::Vector3d& view_dir) {
    Eigen::Vector3d c = Eigen::Vector3d::Constant(0.5) + kShC0 * g.sh_dc.cast<double>();
    if (!g.sh_rest.empty()) {
        const double x = view_dir.x();
        const double y = view_dir.y();
        const double z = view_dir.z();
        const auto& sh = g.sh_rest;
        c += kC1 * (-y * sh[0].cast<double>() + z * sh[1].cast<double>() -
                    x * sh[2].cast<double>());
        if (sh.size() >= 8) {
            const double xx = x * x, yy = y * y, zz = z * z;
            c += kC2[0] * x * y * sh[3].cast<double>() + kC2[1] * y * z * sh[4].cast<double>() +
                 kC2[2] * (2.0 * zz - xx - yy) * sh[5].cast<double>() +
                 kC2[3] * x * z * sh[6].cast<double>() + kC2[4] * (xx - yy) * sh[7].cast<double>();
            if (sh.size() >= 15) {
                c += kC3[0] * y * (3.0 * xx - yy) * sh[8].cast<double>() +
                     kC3[1] * x * y * z * sh[9].cast<double>() +
                     kC3[2] * y * (4.0 * zz - xx - yy) * sh[10].cast<double>() +
                     kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy) * sh[11].cast<double>() +
                     kC3[4] * x * (4.0 * zz - xx - yy) * sh[12].cast<double>() +
                     kC3[5] * z * (xx - yy) * sh[13].cast<double>() +
                     kC3[6] * x * (xx - 3.0 * yy) * sh[14].cast<double>();
            }
        }
    }
    return c.cwiseMax(0.0).cwiseMin(1.0).cast<float>();
}

// --- PLY ingestion -----------------------------------------------------------

namespace {

constexpr double kCovarianceEigenFloor = 1e-8;
constexpr double kCov2dEigenFloor = 0.3;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double p) {
    const double c = std::clamp(p, 1e-6, 1.0 - 1e-6);
    return std::log(c / (1.0 - c));
}

struct PlyProperty {
    std::string type;
    std::string name;
    size_t offset = 0;
};

size_t ply_type_size(const std::string& t) {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "float" || t == "int32" || t == "uint32" ||
        t == "float32")
        return 4;
    if (t == "double" || t == "float64") return 8;
    throw ParseError("ply: unsupported property type '" + t + "'");
}

struct PlyLayout {
    size_t stride = 0;
    size_t vertex_count = 0;
    std::vector<PlyProperty> properties;

    const PlyProperty* find(const std::string& name) const {
        for (const auto& p : properties) {
            if (p.name == name) return &p;
        }
        return nullptr;
    }

    size_t require_float(const std::string& name) const {
        const PlyProperty* p = find(name);
        if (!p) throw ParseError("ply: missing property '" + name + "'");
        if (p->type != "float" && p->type != "float32") {
            throw ParseError("ply: property '" + name + "' must be float");
        }
        return p->offset;
    }
};

PlyLayout parse_ply_header(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "ply") {
        throw ParseError("ply: missing magic line");
    }
    PlyLayout layout;
    bool format_ok = false;
    bool in_vertex_element = false;
    bool saw_end = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "comment") continue;
        if (tok == "format") {
            std::string fmt, version;
            ls >> fmt >> version;
            if (fmt != "binary_little_endian") {
                throw ParseError("ply: only binary_little_endian is supported, got '" + fmt + "'");
            }
            format_ok = true;
        } else if (tok == "element") {
            std::string name;
            size_t count = 0;
            ls >> name >> count;
            if (name == "vertex") {
                layout.vertex_count = count;
                in_vertex_element = true;
            } else {
                in_vertex_element = false;
                if (count != 0) {
                    throw ParseError("ply: unsupported non-empty element '" + name + "'");
                }
            }
        } else if (tok == "property") {
            std::string type, name;
            ls >> type;
            if (type == "list") {
                throw ParseError("ply: list properties are not supported");
            }
            ls >> name;
            if (name.empty()) throw ParseError("ply: malformed property line: " + line);
            if (in_vertex_element) {
                layout.properties.push_back({type, name, layout.stride});
                layout.stride += ply_type_size(type);
            }
        } else if (tok == "end_header") {
            saw_end = true;
            break;
        } else if (!tok.empty()) {
            throw ParseError("ply: unexpected header line: " + line);
        }
    }
    if (!saw_end) throw ParseError("ply: header missing end_header");
    if (!format_ok) throw ParseError("ply: header missing format line");
    return layout;
}

float read_f32(const std::uint8_t* record, size_t offset) {
    float v;
    std::memcpy(&v, record + offset, sizeof(float));
    return v;
}

} // namespace

SplatScene load_splat_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("splat file not found: " + path.string());
    }
    const PlyLayout layout = parse_ply_header(in);

    const size_t off_x = layout.require_float("x");
    const size_t off_y = layout.require_float("y");
    const size_t off_z = layout.require_float("z");
    const size_t off_op = layout.require_float("opacity");
    size_t off_scale[3];
    size_t off_rot[4];
    size_t off_dc[3];
    for (int i = 0; i < 3; ++i) off_scale[i] = layout.require_float("scale_" + std::to_string(i));
    for (int i = 0; i < 4; ++i) off_rot[i] = layout.require_float("rot_" + std::to_string(i));
    for (int i = 0; i < 3; ++i) off_dc[i] = layout.require_float("f_dc_" + std::to_string(i));

    size_t n_rest = 0;
    while (layout.find("f_rest_" + std::to_string(n_rest))) ++n_rest;
    size_t rest_per_channel = 0;
    std::vector<size_t> off_rest(n_rest);
    if (n_rest > 0) {
        if (n_rest != 9 && n_rest != 24 && n_rest != 45) {
            throw ParseError("ply: f_rest count must be 9, 24 or 45, got " +
                             std::to_string(n_rest));
        }
        rest_per_channel = n_rest / 3;
        for (size_t i = 0; i < n_rest; ++i) {
            off_rest[i] = layout.require_float("f_rest_" + std::to_string(i));
        }
    }

    SplatScene scene;
    scene.gaussians.reserve(layout.vertex_count);
    std::vector<std::uint8_t> record(layout.stride);
    for (size_t rec = 0; rec < layout.vertex_count; ++rec) {
        in.read(reinterpret_cast<char*>(record.data()), static_cast<std::streamsize>(record.size()));
        if (!in) {
            throw ParseError("ply: truncated payload at record " + std::to_string(rec));
        }
        auto finite_or_throw = [&](float v, const char* what) {
            if (!std::isfinite(v)) {
                throw ParseError("ply: record " + std::to_string(rec) + ": non-finite value in " +
                                 what);
            }
            return static_cast<double>(v);
        };

        Gaussian3D g;
        g.mean = {finite_or_throw(read_f32(record.data(), off_x), "x"),
                  finite_or_throw(read_f32(record.data(), off_y), "y"),
                  finite_or_throw(read_f32(record.data(), off_z), "z")};
        g.opacity = sigmoid(finite_or_throw(read_f32(record.data(), off_op), "opacity"));

        Eigen::Vector3d lambda;
        for (int i = 0; i < 3; ++i) {
            const double s = finite_or_throw(read_f32(record.data(), off_scale[i]), "scale");
            lambda[i] = std::max(std::exp(2.0 * s), kCovarianceEigenFloor);
        }
        double qw = finite_or_throw(read_f32(record.data(), off_rot[0]), "rot");
        double qx = finite_or_throw(read_f32(record.data(), off_rot[1]), "rot");
        double qy = finite_or_throw(read_f32(record.data(), off_rot[2]), "rot");
        double qz = finite_or_throw(read_f32(record.data(), off_rot[3]), "rot");
        const double qn = std::sqrt(qw * qw + qx * qx + qy * qy + qz * qz);
        if (!(qn > 0.0)) {
            throw ParseError("ply: record " + std::to_string(rec) + ": zero quaternion");
        }
        const Eigen::Matrix3d R =
            Eigen::Quaterniond(qw / qn, qx / qn, qy / qn, qz / qn).toRotationMatrix();
        g.covariance = R * lambda.asDiagonal() * R.transpose();

        for (int i = 0; i < 3; ++i) {
            g.sh_dc[i] =
                static_cast<float>(finite_or_throw(read_f32(record.data(), off_dc[i]), "f_dc"));
        }
        if (rest_per_channel > 0) {
            g.sh_rest.resize(rest_per_channel);
            for (size_t i = 0; i < rest_per_channel; ++i) {
                for (size_t ch = 0; ch < 3; ++ch) {
                    g.sh_rest[i][static_cast<int>(ch)] = static_cast<float>(finite_or_throw(
                        read_f32(record.data(), off_rest[ch * rest_per_channel + i]), "f_rest"));
                }
            }
        }
        scene.world_bounds.expand(g.mean);
        scene.gaussians.push_back(std::move(g));
    }
    if (scene.gaussians.empty()) {
        scene.world_bounds = Aabb{Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()};
    }
    return scene;
}

void save_splat_file(const SplatScene& scene, const std::filesystem::path& path) {
    size_t rest_per_channel = 0;
    for (const auto& g : scene.gaussians) {
        rest_per_channel = std::max(rest_per_channel, g.sh_rest.size());
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("save_splat_file: cannot open " + path.string());
    }
    out << "ply\nformat binary_little_endian 1.0\n";
    out << "element vertex " << scene.gaussians.size() << "\n";
    for (const char* n : {"x", "y", "z", "nx", "ny", "nz"}) {
        out << "property float " << n << "\n";
    }
    for (int i = 0; i < 3; ++i) out << "property float f_dc_" << i << "\n";
    for (size_t i = 0; i < rest_per_channel * 3; ++i) out << "property float f_rest_" << i << "\n";
    out << "property float opacity\n";
    for (int i = 0; i < 3; ++i) out << "property float scale_" << i << "\n";
    for (int i = 0; i < 4; ++i) out << "property float rot_" << i << "\n";
    out << "end_header\n";

    std::vector<float> record;
    for (const auto& g : scene.gaussians) {
        record.clear();
        record.push_back(static_cast<float>(g.mean.x()));
        record.push_back(static_cast<float>(g.mean.y()));
        record.push_back(static_cast<float>(g.mean.z()));
        record.insert(record.end(), {0.0f, 0.0f, 0.0f});
        for (int i = 0; i < 3; ++i) record.push_back(g.sh_dc[i]);
        for (size_t ch = 0; ch < 3; ++ch) {
            for (size_t i = 0; i < rest_per_channel; ++i) {
                record.push_back(i < g.sh_rest.size() ? g.sh_rest[i][static_cast<int>(ch)] : 0.0f);
            }
        }
        record.push_back(static_cast<float>(logit(g.opacity)));

        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(g.covariance);
        Eigen::Vector3d lambda = es.eigenvalues().cwiseMax(kCovarianceEigenFloor);
        Eigen::Matrix3d R = es.eigenvectors();
        if (R.determinant() < 0.0) R.col(0) *= -1.0;
        for (int i = 0; i < 3; ++i) record.push_back(static_cast<float>(0.5 * std::log(lambda[i])));
        const Eigen::Quaterniond q(R);
        record.push_back(static_cast<float>(q.w()));
        record.push_back(static_cast<float>(q.x()));
        record.push_back(static_cast<float>(q.y()));
        record.push_back(static_cast<float>(q.z()));
        out.write(reinterpret_cast<const char*>(record.data()),
                  static_cast<std::streamsize>(record.size() * sizeof(float)));
    }
    if (!out) {
        throw ConfigError("save_splat_file: write failed for " + path.string());
    }
}

void tag_object_region(SplatScene& scene, const Aabb& region) {
    scene.object_indices.clear();
    for (size_t i = 0; i < scene.gaussians.size(); ++i) {
        if (region.contains(scene.gaussians[i].mean)) {
            scene.object_indices.push_back(static_cast<std::uint32_t>(i));
        }
    }
    scene.object_bounds = region;
}

// --- rendering ---------------------------------------------------------------

namespace {

// Clamp the eigenvalues of a 2x2 symmetric matrix from below.
Eigen::Matrix2d clamp_eigenvalues(const Eigen::Matrix2d& m, double floor) {
    const double a = m(0, 0);
    const double b = 0.5 * (m(0, 1) + m(1, 0));
    const double c = m(1, 1);
    const double mid = 0.5 * (a + c);
    const double h = std::sqrt(std::max(0.0, 0.25 * (a - c) * (a - c) + b * b));
    double l1 = mid - h;
    double l2 = mid + h;
    if (l1 >= floor) {
        Eigen::Matrix2d sym;
        sym << a, b, b, c;
        return sym;
    }
    Eigen::Vector2d v2;
    if (std::abs(b) > 1e-300) {
        v2 = Eigen::Vector2d(b, l2 - a).normalized();
    } else {
        v2 = a >= c ? Eigen::Vector2d(1, 0) : Eigen::Vector2d(0, 1);
    }
    const Eigen::Vector2d v1(-v2.y(), v2.x());
    l1 = std::max(l1, floor);
    l2 = std::max(l2, floor);
    return l2 * v2 * v2.transpose() + l1 * v1 * v1.transpose();
}

constexpr double kMahalanobisCutoff = 9.0; // 3 sigma
constexpr double kMinTransmittance = 1e-7;
// The EWA linearization degenerates for means almost in the camera plane
// (the Jacobian scales with 1/z^2), so culling uses a real near plane.
constexpr double kNearPlane = 0.05;

struct DrawGaussian {
    double u, v;
    double depth;
    double opacity;
    double inv_a, inv_b, inv_d; // inverse 2d covariance (symmetric)
    int r0, r1, c0, c1;         // inclusive pixel bounds of the 3-sigma box
    Eigen::Vector3f color;
    bool is_object;
};

struct PixelAccum {
    double r = 0.0, g = 0.0, b = 0.0;
    double transmittance = 1.0;
    double weight = 0.0;
    double weighted_depth = 0.0;
    double object_weight = 0.0;
    double surface_depth = -1.0;
};

inline void composite(PixelAccum& px, const DrawGaussian& dg, double dx, double dy) {
    const double m2 = dg.inv_a * dx * dx + 2.0 * dg.inv_b * dx * dy + dg.inv_d * dy * dy;
    if (m2 > kMahalanobisCutoff) return;
    const double alpha = dg.opacity * std::exp(-0.5 * m2);
    const double w = alpha * px.transmittance;
    px.r += w * dg.color[0];
    px.g += w * dg.color[1];
    px.b += w * dg.color[2];
    px.weight += w;
    px.weighted_depth += w * dg.depth;
    if (dg.is_object) px.object_weight += w;
    const double next_transmittance = px.transmittance * (1.0 - alpha);
    if (px.transmittance > 0.5 && next_transmittance <= 0.5) {
        px.surface_depth = dg.depth;
    }
    px.transmittance = next_transmittance;
}

std::vector<DrawGaussian> prepare_draw_list(const SplatScene& scene,
                                            const RigidTransformSE3& cam,
                                            const CameraIntrinsics& K) {
    const size_t n = scene.gaussians.size();
    std::vector<std::uint8_t> is_object(n, 0);
    for (auto idx : scene.object_indices) {
        if (idx < n) is_object[idx] = 1;
    }

    std::vector<DrawGaussian> draws(n);
    std::vector<std::uint8_t> visible(n, 0);

    // Gaussians whose projected center falls outside an expanded frustum are
    // culled: the affine EWA footprint is meaningless that far off-axis.
    const double margin_x = K.width;
    const double margin_y = K.height;

#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        const auto& g = scene.gaussians[static_cast<size_t>(i)];
        const auto proj = project_gaussian(g, cam, K);
        if (!proj) continue;
        if (proj->u < -margin_x || proj->u > K.width + margin_x || proj->v < -margin_y ||
            proj->v > K.height + margin_y) {
            continue;
        }
        DrawGaussian dg;
        dg.u = proj->u;
        dg.v = proj->v;
        dg.depth = proj->depth;
        dg.opacity = proj->opacity;
        const Eigen::Matrix2d& cov = proj->cov2d;
        const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
        if (!(det > 0.0)) continue;
        dg.inv_a = cov(1, 1) / det;
        dg.inv_b = -cov(0, 1) / det;
        dg.inv_d = cov(0, 0) / det;
        const double mid = 0.5 * (cov(0, 0) + cov(1, 1));
        const double h =
            std::sqrt(std::max(0.0, mid * mid - det)); // = sqrt(((a-d)/2)^2 + b^2)
        const double radius = 3.0 * std::sqrt(mid + h);
        dg.c0 = std::max(0, static_cast<int>(std::ceil(dg.u - radius)));
        dg.c1 = std::min(K.width - 1, static_cast<int>(std::floor(dg.u + radius)));
        dg.r0 = std::max(0, static_cast<int>(std::ceil(dg.v - radius)));
        dg.r1 = std::min(K.height - 1, static_cast<int>(std::floor(dg.v + radius)));
        if (dg.c0 > dg.c1 || dg.r0 > dg.r1) continue;
        const Eigen::Vector3d dir = (g.mean - cam.translation).normalized();
        dg.color = evaluate_sh(g, dir);
        dg.is_object = is_object[static_cast<size_t>(i)] != 0;
        draws[static_cast<size_t>(i)] = dg;
        visible[static_cast<size_t>(i)] = 1;
    }

    std::vector<std::uint32_t> order;
    order.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        if (visible[i]) order.push_back(i);
    }
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (draws[a].depth != draws[b].depth) return draws[a].depth < draws[b].depth;
        return a < b;
    });

    std::vector<DrawGaussian> sorted;
    sorted.reserve(order.size());
    for (auto i : order) sorted.push_back(draws[i]);
    return sorted;
}

void finalize_pixel(const PixelAccum& px, const Eigen::Vector3f& bg, float* rgb, float& depth,
                    float& surface_depth, float& object_weight) {
    rgb[0] = static_cast<float>(px.r + px.transmittance * bg[0]);
    rgb[1] = static_cast<float>(px.g + px.transmittance * bg[1]);
    rgb[2] = static_cast<float>(px.b + px.transmittance * bg[2]);
    depth = px.weight > 0.0 ? static_cast<float>(px.weighted_depth / px.weight)
                            : ImageDepth::kNoHit;
    surface_depth =
        px.surface_depth > 0.0 ? static_cast<float>(px.surface_depth) : ImageDepth::kNoHit;
    object_weight = static_cast<float>(px.object_weight);
}

// Composite rows [row_begin, row_end) against the sorted draw list.
void render_rows(const std::vector<DrawGaussian>& draws, const Eigen::Vector3f& bg,
                 const CameraIntrinsics& K, int row_begin, int row_end, RenderResult& out) {
    const int band_rows = row_end - row_begin;
    if (band_rows <= 0) return;
    std::vector<PixelAccum> accum(static_cast<size_t>(band_rows) * K.width);

    for (const auto& dg : draws) {
        const int r0 = std::max(dg.r0, row_begin);
        const int r1 = std::min(dg.r1, row_end - 1);
        for (int r = r0; r <= r1; ++r) {
            PixelAccum* row = accum.data() + static_cast<size_t>(r - row_begin) * K.width;
            const double dy = static_cast<double>(r) - dg.v;
            for (int c = dg.c0; c <= dg.c1; ++c) {
                PixelAccum& px = row[c];
                if (px.transmittance < kMinTransmittance) continue;
                composite(px, dg, static_cast<double>(c) - dg.u, dy);
            }
        }
    }

    for (int r = row_begin; r < row_end; ++r) {
        for (int c = 0; c < K.width; ++c) {
            const PixelAccum& px = accum[static_cast<size_t>(r - row_begin) * K.width + c];
            finalize_pixel(px, bg, out.rgb.px(r, c), out.depth.at(r, c),
                           out.surface_depth.at(r, c), out.object_weight.at(r, c));
        }
    }
}

} // namespace

std::optional<ProjectedGaussian> project_gaussian(const Gaussian3D& g,
                                                  const RigidTransformSE3& cam,
                                                  const CameraIntrinsics& K) {
    const Eigen::Matrix3d W = cam.rotation.transpose();
    const Eigen::Vector3d p = W * (g.mean - cam.translation);
    if (!(p.z() > kNearPlane)) {
        return std::nullopt;
    }
    const double z = p.z();
    const double inv_z = 1.0 / z;
    Eigen::Matrix<double, 2, 3> J;
    J << K.fx * inv_z, 0.0, -K.fx * p.x() * inv_z * inv_z, 0.0, K.fy * inv_z,
        -K.fy * p.y() * inv_z * inv_z;
    const Eigen::Matrix3d cov_cam = W * g.covariance * W.transpose();
    const Eigen::Matrix2d cov2d = clamp_eigenvalues(J * cov_cam * J.transpose(), kCov2dEigenFloor);

    ProjectedGaussian out;
    out.u = K.cx + K.fx * p.x() * inv_z;
    out.v = K.cy + K.fy * p.y() * inv_z;
    out.cov2d = cov2d;
    out.depth = z;
    out.opacity = g.opacity;
    return out;
}

RenderResult render(const SplatScene& scene, const RigidTransformSE3& cam,
                    const CameraIntrinsics& K) {
    K.validate();
    RenderResult out;
    out.rgb = ImageRGB(K.height, K.width);
    out.depth = ImageDepth(K.height, K.width);
    out.surface_depth = ImageDepth(K.height, K.width);
    out.object_weight = ImageGray(K.height, K.width);

    const auto draws = prepare_draw_list(scene, cam, K);

    // Bands are disjoint row ranges, so the result is identical for any
    // thread count and schedule.
    const int band = std::max(1, K.height / 64);
    const int n_bands = (K.height + band - 1) / band;
#pragma omp parallel for schedule(dynamic)
    for (int bi = 0; bi < n_bands; ++bi) {
        const int r0 = bi * band;
        const int r1 = std::min(K.height, r0 + band);
        render_rows(draws, scene.background, K, r0, r1, out);
    }
    return out;
}

RenderResult render_reference(const SplatScene& scene, const RigidTransformSE3& cam,
                              const CameraIntrinsics& K) {
    K.validate();
    RenderResult out;
    out.rgb = ImageRGB(K.height, K.width);
    out.depth = ImageDepth(K.height, K.width);
    out.surface_depth = ImageDepth(K.height, K.width);
    out.object_weight = ImageGray(K.height, K.width);

    const auto draws = prepare_draw_list(scene, cam, K);
    for (int r = 0; r < K.height; ++r) {
        for (int c = 0; c < K.width; ++c) {
            PixelAccum px;
            for (const auto& dg : draws) {
                if (px.transmittance < kMinTransmittance) break;
                if (r < dg.r0 || r > dg.r1 || c < dg.c0 || c > dg.c1) continue;
                composite(px, dg, static_cast<double>(c) - dg.u, static_cast<double>(r) - dg.v);
            }
            finalize_pixel(px, scene.background, out.rgb.px(r, c), out.depth.at(r, c),
                           out.surface_depth.at(r, c), out.object_weight.at(r, c));
        }
    }
    return out;
}

// --- synthetic scenes --------------------------------------------------------

namespace {

Eigen::Matrix3d yaw_rotation(double yaw) {
    const double c = std::cos(yaw);
    const double s = std::sin(yaw);
    Eigen::Matrix3d R;
    R << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
    return R;
}

// Splat spread relative to sample spacing. Tight enough that surface-depth
// crossings stay within ~one spacing of the true surface, wide enough that
// surfaces render without holes.
constexpr double kSurfaceSigmaFactor = 0.5;

Eigen::Vector3f color_to_dc(const Eigen::Vector3f& color) {
    return (color.cast<double>() - Eigen::Vector3d::Constant(0.5)).cast<float>() /
           static_cast<float>(kShC0);
}

Gaussian3D make_surface_gaussian(const Eigen::Vector3d& point, const Eigen::Vector3d& tangent1,
                                 const Eigen::Vector3d& tangent2, const Eigen::Vector3d& normal,
                                 double sigma_t1, double sigma_t2, const Eigen::Vector3f& color,
                                 double opacity) {
    const double sigma_normal = std::max(0.25 * std::min(sigma_t1, sigma_t2), 1e-4);
    Gaussian3D g;
    g.mean = point;
    g.covariance = sigma_t1 * sigma_t1 * tangent1 * tangent1.transpose() +
                   sigma_t2 * sigma_t2 * tangent2 * tangent2.transpose() +
                   sigma_normal * sigma_normal * normal * normal.transpose();
    g.opacity = opacity;
    g.sh_dc = color_to_dc(color);
    return g;
}

void sample_box(const PrimitiveSpec& prim, Rng& rng, std::vector<Gaussian3D>& out) {
    const Eigen::Matrix3d R = yaw_rotation(prim.yaw);
    const Eigen::Vector3d half = 0.5 * prim.size;
    for (int axis = 0; axis < 3; ++axis) {
        const int a1 = (axis + 1) % 3;
        const int a2 = (axis + 2) % 3;
        const double area = prim.size[a1] * prim.size[a2];
        const long count = std::lround(prim.density * area);
        if (count <= 0) continue;
        const double spacing = std::sqrt(area / static_cast<double>(count));
        // Tangent spread never exceeds the face extent (thin faces stay thin).
        const double sigma_t1 = std::min(kSurfaceSigmaFactor * spacing, 0.35 * prim.size[a1]);
        const double sigma_t2 = std::min(kSurfaceSigmaFactor * spacing, 0.35 * prim.size[a2]);
        for (int sign = -1; sign <= 1; sign += 2) {
            const Eigen::Vector3d normal = R.col(axis) * sign;
            const Eigen::Vector3d t1 = R.col(a1);
            const Eigen::Vector3d t2 = R.col(a2);
            for (long i = 0; i < count; ++i) {
                Eigen::Vector3d local = Eigen::Vector3d::Zero();
                local[axis] = sign * half[axis];
                local[a1] = rng.uniform(-half[a1], half[a1]);
                local[a2] = rng.uniform(-half[a2], half[a2]);
                out.push_back(make_surface_gaussian(prim.center + R * local, t1, t2, normal,
                                                    sigma_t1, sigma_t2, prim.color,
                                                    prim.opacity));
            }
        }
    }
}

void sample_sphere(const PrimitiveSpec& prim, Rng& rng, std::vector<Gaussian3D>& out) {
    const double area = 4.0 * M_PI * prim.radius * prim.radius;
    const long count = std::lround(prim.density * area);
    if (count <= 0) return;
    const double spacing = std::sqrt(area / static_cast<double>(count));
    const double sigma_t = kSurfaceSigmaFactor * spacing;
    for (long i = 0; i < count; ++i) {
        Eigen::Vector3d dir;
        do {
            dir = {rng.normal(), rng.normal(), rng.normal()};
        } while (dir.squaredNorm() < 1e-12);
        dir.normalize();
        const Eigen::Vector3d ref =
            std::abs(dir.z()) < 0.9 ? Eigen::Vector3d::UnitZ() : Eigen::Vector3d::UnitX();
        const Eigen::Vector3d t1 = dir.cross(ref).normalized();
        const Eigen::Vector3d t2 = dir.cross(t1);
        out.push_back(make_surface_gaussian(prim.center + prim.radius * dir, t1, t2, dir, sigma_t,
                                            sigma_t, prim.color, prim.opacity));
    }
}

} // namespace

Aabb primitive_bounds(const PrimitiveSpec& prim) {
    Aabb box;
    if (prim.type == PrimitiveSpec::Type::Sphere) {
        box.expand(prim.center - Eigen::Vector3d::Constant(prim.radius));
        box.expand(prim.center + Eigen::Vector3d::Constant(prim.radius));
        return box;
    }
    const Eigen::Matrix3d R = yaw_rotation(prim.yaw);
    const Eigen::Vector3d half = 0.5 * prim.size;
    for (int i = 0; i < 8; ++i) {
        const Eigen::Vector3d corner((i & 1) ? half.x() : -half.x(),
                                     (i & 2) ? half.y() : -half.y(),
                                     (i & 4) ? half.z() : -half.z());
        box.expand(prim.center + R * corner);
    }
    return box;
}

SplatScene synthesize_scene(const SceneSpec& spec) {
    if (spec.primitives.empty()) {
        throw ConfigError("synthesize_scene: spec has no primitives");
    }
    Rng rng(spec.seed);
    SplatScene scene;
    scene.background = spec.background;
    Aabb object_box;
    bool has_object = false;

    for (const auto& prim : spec.primitives) {
        const size_t first = scene.gaussians.size();
        if (prim.type == PrimitiveSpec::Type::Box) {
            sample_box(prim, rng, scene.gaussians);
        } else {
            sample_sphere(prim, rng, scene.gaussians);
        }
        if (prim.object_of_interest) {
            has_object = true;
            object_box.expand(primitive_bounds(prim));
            for (size_t i = first; i < scene.gaussians.size(); ++i) {
                scene.object_indices.push_back(static_cast<std::uint32_t>(i));
            }
        }
    }

    Aabb bounds;
    if (spec.bounds) bounds = *spec.bounds;
    for (const auto& g : scene.gaussians) bounds.expand(g.mean);
    scene.world_bounds = bounds;
    if (has_object) scene.object_bounds = object_box;
    return scene;
}

SceneSpec load_scene_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("scene spec not found: " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ParseError("scene spec " + path.string() + ": " + e.what());
    }

    auto vec3d = [](const nlohmann::json& a) {
        return Eigen::Vector3d(a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>());
    };
    auto vec3f = [&](const nlohmann::json& a) { return vec3d(a).cast<float>().eval(); };

    SceneSpec spec;
    try {
        spec.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("background")) spec.background = vec3f(j.at("background"));
        if (j.contains("bounds")) {
            Aabb b;
            b.min = vec3d(j.at("bounds").at("min"));
            b.max = vec3d(j.at("bounds").at("max"));
            spec.bounds = b;
        }
        for (const auto& p : j.at("primitives")) {
            PrimitiveSpec prim;
            const std::string type = p.at("type").get<std::string>();
            if (type == "box") {
                prim.type = PrimitiveSpec::Type::Box;
                prim.size = vec3d(p.at("size"));
                prim.yaw = p.value("yaw", 0.0);
            } else if (type == "sphere") {
                prim.type = PrimitiveSpec::Type::Sphere;
                prim.radius = p.at("radius").get<double>();
            } else {
                throw ParseError("scene spec: unknown primitive type '" + type + "'");
            }
            prim.center = vec3d(p.at("center"));
            if (p.contains("color")) prim.color = vec3f(p.at("color"));
            prim.density = p.value("density", prim.density);
            prim.opacity = p.value("opacity", prim.opacity);
            prim.object_of_interest = p.value("object_of_interest", false);
            spec.primitives.push_back(prim);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("scene spec " + path.string() + ": " + e.what());
    }
    return spec;
}

} // namespace vantage
