#include "vantage/scoring.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "vantage/image_io.hpp"

namespace vantage {

bool MaskVisibilityBackend::visible(const RenderResult& view) const {
    const ImageGray weights = resize_bilinear(view.object_weight, 224, 224);
    const ImageMask mask = threshold_mask(weights, 0.5f);
    return mask.count() >= min_pixels_;
}

bool ExternalVisibilityBackend::visible(const RenderResult& view) const {
    static std::atomic<std::uint64_t> counter{0};
    const auto png = std::filesystem::temp_directory_path() /
                     ("vantage_view_" + std::to_string(counter.fetch_add(1)) + ".png");
    write_png(png, resize_bilinear(view.rgb, 224, 224));
    const std::string cmd = command_ + " '" + png.string() + "' '" + query_ + "'";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) {
        throw ConfigError("external visibility backend: cannot run: " + command_);
    }
    std::string output;
    char buf[256];
    while (fgets(buf, sizeof(buf), pipe)) output += buf;
    pclose(pipe);
    std::filesystem::remove(png);
    std::transform(output.begin(), output.end(), output.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return output.find("yes") != std::string::npos;
}

nlohmann::json score_result_to_json(const ScoreResult& r) {
    nlohmann::json j{{"pose", {{"x", r.pose.x}, {"y", r.pose.y}, {"theta", r.pose.theta}}},
                     {"height", r.height},
                     {"k_id", r.k_id},
                     {"k_obj", r.k_obj},
                     {"k_col", r.k_col},
                     {"combined", r.combined},
                     {"id_skipped", r.id_skipped}};
    if (!r.per_view.empty()) {
        nlohmann::json views = nlohmann::json::array();
        for (const auto& v : r.per_view) {
            views.push_back({{"view", v.view}, {"k_id", v.k_id}, {"k_obj", v.k_obj}});
        }
        j["per_view"] = std::move(views);
    }
    return j;
}

ScoreResult score_result_from_json(const nlohmann::json& j) {
    ScoreResult r;
    r.pose = {j.at("pose").at("x").get<double>(), j.at("pose").at("y").get<double>(),
              j.at("pose").at("theta").get<double>()};
    r.height = j.value("height", 0.0);
    r.k_id = j.at("k_id").get<double>();
    r.k_obj = j.at("k_obj").get<int>();
    r.k_col = j.at("k_col").get<int>();
    r.combined = j.at("combined").get<double>();
    r.id_skipped = j.value("id_skipped", false);
    if (j.contains("per_view")) {
        for (const auto& v : j.at("per_view")) {
            r.per_view.push_back({v.at("view").get<std::string>(), v.at("k_id").get<double>(),
                                  v.at("k_obj").get<int>()});
        }
    }
    return r;
}

std::string trace_to_jsonl(const std::vector<ScoreResult>& trace) {
    std::string out;
    for (const auto& r : trace) {
        out += score_result_to_json(r).dump();
        out += '\n';
    }
    return out;
}

std::vector<ScoreResult> load_trace_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("trace file not found: " + path.string());
    }
    std::vector<ScoreResult> trace;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            trace.push_back(score_result_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            throw ParseError("trace " + path.string() + " line " + std::to_string(line_no) +
                             ": " + e.what());
        }
    }
    return trace;
}

void ScoringContext::validate() const {
    if (!scene || !grid || !dataset || !descriptor || !visibility) {
        throw ConfigError("scoring context: missing scene, grid, dataset, or backend");
    }
    if (views.empty()) {
        throw ConfigError("scoring context: at least one camera view is required");
    }
    if (knn_k < 1 || static_cast<size_t>(knn_k) > dataset->count()) {
        throw ConfigError("scoring context: knn_k must be in [1, dataset size]");
    }
    if (dynamic_cast<const MaskVisibilityBackend*>(visibility) &&
        scene->object_indices.empty()) {
        throw ConfigError("scoring context: mask visibility backend requires a scene "
                          "with a tagged object region");
    }
}

int object_visible(const SplatScene& scene, const RigidTransformSE3& cam,
                   const CameraIntrinsics& K, const VisibilityBackend& backend) {
    if (dynamic_cast<const MaskVisibilityBackend*>(&backend) && scene.object_indices.empty()) {
        throw ConfigError("object_visible: mask backend requires a tagged object region");
    }
    return backend.visible(render(scene, cam, K)) ? 1 : 0;
}

namespace {

struct ViewEvaluation {
    double k_id = 0.0;
    int k_obj = 0;
    bool id_evaluated = false;
};

ViewEvaluation evaluate_view(const Pose2D& pose, const ViewConfig& view,
                             const ScoringContext& ctx, double height_offset,
                             bool want_id_when_gated) {
    const RigidTransformSE3 cam = base_to_camera(pose, view.rig, height_offset);
    const RenderResult rendered = render(*ctx.scene, cam, view.intrinsics);
    ViewEvaluation ev;
    ev.k_obj = ctx.visibility->visible(rendered) ? 1 : 0;
    if (ev.k_obj == 1 || want_id_when_gated) {
        const DescriptorTensor desc = compute_descriptor(rendered.rgb, *ctx.descriptor);
        const double dist = knn_distance(desc, *ctx.dataset, ctx.knn_k);
        ev.k_id = id_score(dist, ctx.dataset->tau);
        ev.id_evaluated = true;
    }
    return ev;
}

ScoreResult score_impl(const Pose2D& raw_pose, const ScoringContext& ctx, double height_offset,
                       bool multiview) {
    ctx.validate();
    if (multiview && ctx.views.size() < 2) {
        throw ConfigError("hybrid_score_multiview: needs at least two camera views");
    }

    const Pose2D pose = raw_pose.normalized();
    ScoreResult result;
    result.pose = pose;
    result.height = height_offset;

    result.k_col = collision_free(pose, *ctx.grid, ctx.footprint).free ? 1 : 0;
    if (result.k_col == 0 && !ctx.evaluate_gated_id) {
        result.id_skipped = true;
        return result;
    }

    const size_t n_views = multiview ? ctx.views.size() : 1;
    double best_gated = 0.0;
    double best_k_id = 0.0;
    int any_obj = 0;
    bool any_id_evaluated = false;
    for (size_t vi = 0; vi < n_views; ++vi) {
        const auto ev =
            evaluate_view(pose, ctx.views[vi], ctx, height_offset, ctx.evaluate_gated_id);
        if (multiview) {
            result.per_view.push_back({ctx.views[vi].name, ev.k_id, ev.k_obj});
        }
        any_obj |= ev.k_obj;
        any_id_evaluated = any_id_evaluated || ev.id_evaluated;
        const double gated = ev.k_obj == 1 ? ev.k_id : 0.0;
        if (gated >= best_gated) {
            best_gated = gated;
            if (ev.k_obj == 1) best_k_id = ev.k_id;
        }
    }

    result.k_obj = any_obj;
    result.k_id = any_obj ? best_k_id : 0.0;
    result.id_skipped = !any_id_evaluated || (any_obj == 0 && !ctx.evaluate_gated_id);
    result.combined = (result.k_obj == 1 && result.k_col == 1) ? result.k_id : 0.0;
    return result;
}

} // namespace

ScoreResult hybrid_score(const Pose2D& pose, const ScoringContext& ctx) {
    return score_impl(pose, ctx, ctx.height_offset, false);
}

ScoreResult hybrid_score(const Pose2D& pose, const ScoringContext& ctx, double height_offset) {
    return score_impl(pose, ctx, height_offset, false);
}

ScoreResult hybrid_score_multiview(const Pose2D& pose, const ScoringContext& ctx) {
    return score_impl(pose, ctx, ctx.height_offset, true);
}

ScoreResult hybrid_score_multiview(const Pose2D& pose, const ScoringContext& ctx,
                                   double height_offset) {
    return score_impl(pose, ctx, height_offset, true);
}

DemoDataset filter_dataset_by_task(const DemoDataset& dataset, const std::string& task) {
    DemoDataset out;
    for (const auto& entry : dataset.entries) {
        if (entry.task && *entry.task == task) {
            out.entries.push_back(entry);
        }
    }
    if (out.entries.empty()) {
        throw ConfigError("no demonstrations match task '" + task +
                          "'; record demonstrations for it or drop the task filter");
    }
    out.recompute_tau();
    return out;
}

OccupancyGrid build_occupancy_from_scene(const SplatScene& scene, const ViewConfig& view,
                                         const SweepOptions& options) {
    if (options.n_poses < 1) {
        throw ConfigError("build_occupancy_from_scene: need at least one sweep pose");
    }
    const Eigen::Vector3d center = scene.world_bounds.center();
    const Eigen::Vector3d extent = scene.world_bounds.extent();
    double radius = options.radius;
    if (!(radius > 0.0)) {
        radius = 0.55 * std::hypot(extent.x(), extent.y());
    }

    std::vector<PosedDepthImage> observations(static_cast<size_t>(options.n_poses));
    for (int i = 0; i < options.n_poses; ++i) {
        const double angle = 2.0 * M_PI * i / options.n_poses;
        Pose2D base;
        base.x = center.x() + radius * std::cos(angle);
        base.y = center.y() + radius * std::sin(angle);
        base.theta = wrap_angle(angle + M_PI); // face the center
        const RigidTransformSE3 cam = base_to_camera(base, view.rig);
        auto rendered = render(scene, cam, view.intrinsics);
        // Surface depth, not the alpha-weighted mean: silhouette-mixed depths
        // would unproject to midair points and pollute the grid.
        observations[static_cast<size_t>(i)] = {std::move(rendered.surface_depth), cam,
                                                view.intrinsics};
    }

    GridBounds2D bounds;
    bounds.min_x = scene.world_bounds.min.x() - options.margin;
    bounds.max_x = scene.world_bounds.max.x() + options.margin;
    bounds.min_y = scene.world_bounds.min.y() - options.margin;
    bounds.max_y = scene.world_bounds.max.y() + options.margin;
    return build_occupancy(observations, options.resolution, {options.z_min, options.z_max},
                           bounds);
}

} // namespace vantage
