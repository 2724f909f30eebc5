#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "vantage/config.hpp"
#include "vantage/harness.hpp"
#include "vantage/image_io.hpp"
#include "vantage/metrics.hpp"
#include "vantage/score_map.hpp"

namespace {

using nlohmann::json;
using namespace vantage;

int log_level() {
    static const int level = [] {
        const char* env = std::getenv("VANTAGE_LOG");
        if (!env) return 1;
        const std::string v(env);
        if (v == "debug") return 3;
        if (v == "info") return 2;
        if (v == "warn") return 1;
        return 0; // error / quiet
    }();
    return level;
}

void log_info(const std::string& msg) {
    if (log_level() >= 2) std::cerr << "[info] " << msg << "\n";
}

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::optional<std::string> profile;
    std::optional<std::string> views;
    bool height_opt = false;
    std::string pose;
    std::string trace_path;
};

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) parts.push_back(item);
    }
    return parts;
}

RunConfig load_config(const CommonArgs& args) {
    if (args.config_path.empty()) {
        throw ConfigError("--config is required");
    }
    RunConfig cfg = load_run_config(args.config_path, args.profile);
    if (args.seed) cfg.bo.seed = *args.seed;
    if (args.views) {
        cfg.views = split_csv(*args.views);
        for (const auto& v : cfg.views) {
            if (!cfg.cameras.count(v)) {
                throw ConfigError("view '" + v + "' has no camera definition");
            }
        }
    }
    if (args.height_opt) cfg.bo.optimize_height = true;
    return cfg;
}

struct Pipeline {
    SplatScene scene;
    OccupancyGrid grid;
    DemoDataset dataset;
    std::vector<ViewConfig> views;
    PatchStatBackend descriptor;
    std::unique_ptr<VisibilityBackend> visibility;
    RobotFootprint footprint;
    ScoringContext ctx;
};

SplatScene load_scene(const RunConfig& cfg) {
    SplatScene scene;
    if (cfg.scene_spec) {
        scene = synthesize_scene(load_scene_spec(*cfg.scene_spec));
    } else if (cfg.scene_ply) {
        scene = load_splat_file(*cfg.scene_ply);
    } else {
        throw ConfigError("config needs 'scene' (splat file) or 'scene_spec'");
    }
    if (cfg.object_region) {
        tag_object_region(scene, *cfg.object_region);
    }
    return scene;
}

std::vector<ViewConfig> make_views(const RunConfig& cfg) {
    if (cfg.cameras.empty()) {
        throw ConfigError("config defines no cameras");
    }
    std::vector<ViewConfig> views;
    for (const auto& name : cfg.views) {
        const auto& cam = cfg.cameras.at(name);
        views.push_back({name, cam.rig, cam.intrinsics});
    }
    return views;
}

OccupancyGrid obtain_grid(const RunConfig& cfg, const SplatScene& scene,
                          const std::vector<ViewConfig>& views) {
    if (cfg.grid_path && std::filesystem::exists(*cfg.grid_path)) {
        log_info("loading grid " + cfg.grid_path->string());
        return load_grid(*cfg.grid_path);
    }
    log_info("building occupancy grid from rendered depth");
    SweepOptions sweep;
    sweep.n_poses = cfg.occupancy.sweep_poses;
    sweep.radius = cfg.occupancy.sweep_radius;
    sweep.resolution = cfg.occupancy.resolution;
    sweep.z_min = cfg.occupancy.z_min;
    sweep.z_max = cfg.occupancy.z_max;
    sweep.margin = cfg.occupancy.margin;
    OccupancyGrid grid = build_occupancy_from_scene(scene, views.front(), sweep);
    if (cfg.grid_path) {
        save_grid(grid, *cfg.grid_path);
        log_info("saved grid to " + cfg.grid_path->string());
    }
    return grid;
}

Pipeline build_pipeline(const RunConfig& cfg) {
    Pipeline p;
    p.scene = load_scene(cfg);
    p.views = make_views(cfg);
    p.grid = obtain_grid(cfg, p.scene, p.views);
    if (!cfg.dataset_dir) {
        throw ConfigError("dataset not found: config has no 'dataset' entry");
    }
    p.dataset = load_demo_dataset(*cfg.dataset_dir, p.descriptor);
    if (cfg.scoring.task) {
        p.dataset = filter_dataset_by_task(p.dataset, *cfg.scoring.task);
    }
    p.visibility = std::make_unique<MaskVisibilityBackend>(cfg.scoring.object_query,
                                                           cfg.scoring.min_pixels);
    p.footprint.radius = cfg.occupancy.footprint_radius;

    p.ctx.scene = &p.scene;
    p.ctx.grid = &p.grid;
    p.ctx.footprint = p.footprint;
    p.ctx.dataset = &p.dataset;
    p.ctx.descriptor = &p.descriptor;
    p.ctx.visibility = p.visibility.get();
    p.ctx.views = p.views;
    p.ctx.knn_k = cfg.scoring.knn_k;
    p.ctx.evaluate_gated_id = cfg.scoring.evaluate_gated_id;
    p.ctx.validate();
    return p;
}

BOConfig bo_with_bounds(const RunConfig& cfg, const OccupancyGrid& grid, double footprint_radius) {
    BOConfig bo = cfg.bo;
    if (!cfg.bo_bounds_set) {
        bo.x_bounds = {grid.origin_x + footprint_radius, grid.max_x() - footprint_radius};
        bo.y_bounds = {grid.origin_y + footprint_radius, grid.max_y() - footprint_radius};
    }
    bo.validate();
    return bo;
}

int cmd_optimize(const CommonArgs& args) {
    const RunConfig cfg = load_config(args);
    const auto out_dir = std::filesystem::path(args.out_dir);
    std::filesystem::create_directories(out_dir);

    Pipeline p = build_pipeline(cfg);
    const BOConfig bo = bo_with_bounds(cfg, p.grid, p.footprint.radius);

    const bool multiview = p.views.size() >= 2;
    const ScoreFn score = [&](const Pose2D& pose, double height) {
        return multiview ? hybrid_score_multiview(pose, p.ctx, height)
                         : hybrid_score(pose, p.ctx, height);
    };

    log_info("optimizing (n_init=" + std::to_string(bo.n_init) +
             ", n_iter=" + std::to_string(bo.n_iter) + ")");
    const auto t0 = std::chrono::steady_clock::now();
    const OptimizationTrace trace = optimize(score, bo);
    const double wall_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    write_file_atomic(out_dir / "trace.jsonl", trace_to_jsonl(trace.evaluated));

    json summary{{"best_pose",
                  {{"x", trace.best_pose.x},
                   {"y", trace.best_pose.y},
                   {"theta", trace.best_pose.theta}}},
                 {"best_height", trace.best_height},
                 {"best_score", trace.best_score},
                 {"n_evaluated", trace.evaluated.size()},
                 {"seed", bo.seed},
                 {"profile", cfg.profile},
                 {"wall_time_s", wall_s}};
    write_file_atomic(out_dir / "summary.json", summary.dump(2) + "\n");

    const ImageRGB map = emit_score_map(trace.evaluated, p.grid, cfg.oracle_pose);
    write_file_atomic(out_dir / "score_map.png", encode_png(map));

    log_info("best score " + std::to_string(trace.best_score));
    return 0;
}

std::vector<DecaySample> load_decay_samples(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("decay samples file not found: " + path.string());
    }
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ParseError("decay samples " + path.string() + ": " + e.what());
    }
    std::vector<DecaySample> samples;
    for (const auto& item : j) {
        if (item.is_array()) {
            samples.push_back({item.at(0).get<double>(), item.at(1).get<double>()});
        } else {
            samples.push_back({item.at("sigma").get<double>(),
                               item.contains("rate") ? item.at("rate").get<double>()
                                                     : item.at("success_rate").get<double>()});
        }
    }
    if (samples.empty()) {
        throw ConfigError("decay samples file is empty: " + path.string());
    }
    return samples;
}

int cmd_metrics(const CommonArgs& args) {
    const RunConfig cfg = load_config(args);
    const auto out_dir = std::filesystem::path(args.out_dir);
    std::filesystem::create_directories(out_dir);
    const std::uint64_t seed = args.seed.value_or(0);

    json report;

    // Spatial metric: recorded samples, or episodes against a planted model.
    std::vector<DecaySample> samples;
    if (cfg.metrics.decay_samples) {
        samples = load_decay_samples(*cfg.metrics.decay_samples);
    } else if (cfg.metrics.success_model) {
        if (cfg.metrics.sigmas.empty()) {
            throw ConfigError("metrics: 'sigmas' required to measure spatial feasibility");
        }
        samples = sample_decay_curve(*cfg.metrics.success_model,
                                     cfg.metrics.success_model->oracle_pose, cfg.metrics.sigmas,
                                     cfg.metrics.episodes_per_sigma, seed);
    } else {
        throw ConfigError("metrics: need 'decay_samples' or a 'success_model' to measure");
    }
    const DecayFit fit = fit_decay(samples);
    report["decay"] = {{"c0", fit.c0},         {"gamma", fit.gamma},
                       {"phi", fit.phi},       {"residual", fit.residual},
                       {"n_points", fit.n_points}, {"n_censored", fit.n_censored}};

    json curve_data;
    curve_data["samples"] = json::array();
    double max_sigma = 0.0;
    for (const auto& s : samples) {
        curve_data["samples"].push_back({{"sigma", s.sigma}, {"rate", s.success_rate}});
        max_sigma = std::max(max_sigma, s.sigma);
    }
    curve_data["curve"] = json::array();
    for (int i = 0; i <= 50; ++i) {
        const double sigma = max_sigma * i / 50.0;
        curve_data["curve"].push_back(
            {{"sigma", sigma}, {"rate", fit.c0 * std::exp(-fit.gamma * sigma)}});
    }
    curve_data["phi"] = fit.phi;
    write_file_atomic(out_dir / "decay_curve.json", curve_data.dump(2) + "\n");

    // Visual metric: object coverage in renders from near-optimal poses.
    if ((cfg.scene_ply || cfg.scene_spec) && cfg.oracle_pose && !cfg.cameras.empty()) {
        const SplatScene scene = load_scene(cfg);
        const auto views_cfg = make_views(cfg);
        const auto& view = views_cfg.front();
        Rng rng(mix_seed(seed, 0x51EAull));
        std::vector<MaskedView> views;
        for (int i = 0; i < cfg.metrics.n_views; ++i) {
            Pose2D p = *cfg.oracle_pose;
            p.x += rng.uniform(-cfg.metrics.view_radius, cfg.metrics.view_radius);
            p.y += rng.uniform(-cfg.metrics.view_radius, cfg.metrics.view_radius);
            p.theta = wrap_angle(p.theta +
                                 rng.uniform(-cfg.metrics.view_heading, cfg.metrics.view_heading));
            auto rendered = render(scene, base_to_camera(p, view.rig), view.intrinsics);
            MaskedView mv;
            mv.mask = threshold_mask(rendered.object_weight, 0.5f);
            mv.image = std::move(rendered.rgb);
            views.push_back(std::move(mv));
        }
        const VisualFeasibility vf = visual_feasibility(views);
        report["visual"] = {{"s_v", vf.s_v}, {"n_views", vf.n_views}, {"per_view", vf.per_view}};
        write_file_atomic(out_dir / "view_fractions.json",
                          json{{"s_v", vf.s_v}, {"per_view", vf.per_view}}.dump(2) + "\n");
    }

    write_file_atomic(out_dir / "feasibility.json", report.dump(2) + "\n");
    std::cout << report.dump(2) << "\n";
    return 0;
}

int cmd_render(const CommonArgs& args) {
    const RunConfig cfg = load_config(args);
    const auto out_dir = std::filesystem::path(args.out_dir);
    std::filesystem::create_directories(out_dir);

    const auto parts = split_csv(args.pose);
    if (parts.size() != 3) {
        throw ConfigError("--pose must be 'x,y,theta'");
    }
    const Pose2D pose{std::stod(parts[0]), std::stod(parts[1]), std::stod(parts[2])};

    const SplatScene scene = load_scene(cfg);
    const auto views = make_views(cfg);
    const auto& view = views.front();
    const auto result = render(scene, base_to_camera(pose, view.rig), view.intrinsics);
    write_file_atomic(out_dir / "rgb.png", encode_png(result.rgb));
    write_depth_png(out_dir / "depth.png", result.depth);
    log_info("wrote rgb.png and depth.png");
    return 0;
}

int cmd_build_grid(const CommonArgs& args) {
    const RunConfig cfg = load_config(args);
    const auto out_dir = std::filesystem::path(args.out_dir);
    std::filesystem::create_directories(out_dir);

    const SplatScene scene = load_scene(cfg);
    const auto views = make_views(cfg);
    SweepOptions sweep;
    sweep.n_poses = cfg.occupancy.sweep_poses;
    sweep.radius = cfg.occupancy.sweep_radius;
    sweep.resolution = cfg.occupancy.resolution;
    sweep.z_min = cfg.occupancy.z_min;
    sweep.z_max = cfg.occupancy.z_max;
    sweep.margin = cfg.occupancy.margin;
    const OccupancyGrid grid = build_occupancy_from_scene(scene, views.front(), sweep);
    const auto path = cfg.grid_path.value_or(out_dir / "scene.grid");
    save_grid(grid, path);
    log_info("wrote " + path.string());
    return 0;
}

int cmd_evaluate(const CommonArgs& args) {
    const RunConfig cfg = load_config(args);
    const auto out_dir = std::filesystem::path(args.out_dir);
    std::filesystem::create_directories(out_dir);
    const std::uint64_t seed = args.seed.value_or(0);

    log_info("building " + std::to_string(cfg.harness.n_scenes) + " synthetic scenes");
    const auto scenes = build_default_suite(cfg.harness.n_scenes, seed);
    SuiteConfig suite;
    suite.n_scenes = cfg.harness.n_scenes;
    suite.n_seeds = cfg.harness.n_seeds;
    suite.episodes_per_scene = cfg.harness.episodes_per_scene;
    suite.base_seed = seed;

    json report;
    report["methods"] = json::array();
    json bars;
    bars["bars"] = json::array();
    for (const auto& name : cfg.harness.methods) {
        std::unique_ptr<PoseSelector> method;
        if (name == "oracle") method = std::make_unique<OracleSelector>();
        else if (name == "stay") method = std::make_unique<StaySelector>();
        else if (name == "naive") method = std::make_unique<NaiveSelector>();
        else if (name == "ours") method = std::make_unique<ScoreOptSelector>();
        else throw ConfigError("unknown method '" + name + "'");

        log_info("evaluating method '" + name + "'");
        const EvalReport r = evaluate(*method, scenes, suite);
        report["methods"].push_back({{"method", r.method},
                                     {"mean", r.mean},
                                     {"std", r.stddev},
                                     {"per_seed", r.per_seed_rates},
                                     {"episodes", r.episodes}});
        bars["bars"].push_back({{"label", r.method}, {"mean", r.mean}, {"std", r.stddev}});
        log_info(name + ": mean " + std::to_string(r.mean) + " +/- " + std::to_string(r.stddev));
    }
    write_file_atomic(out_dir / "report.json", report.dump(2) + "\n");
    write_file_atomic(out_dir / "bar_chart.json", bars.dump(2) + "\n");
    std::cout << report.dump(2) << "\n";
    return 0;
}

int cmd_score_map(const CommonArgs& args) {
    const RunConfig cfg = load_config(args);
    const auto out_dir = std::filesystem::path(args.out_dir);
    std::filesystem::create_directories(out_dir);

    if (args.trace_path.empty()) {
        throw ConfigError("--trace is required for score-map");
    }
    const auto trace = load_trace_jsonl(args.trace_path);
    if (!cfg.grid_path || !std::filesystem::exists(*cfg.grid_path)) {
        throw ConfigError("score-map requires an existing 'grid' entry in the config");
    }
    const OccupancyGrid grid = load_grid(*cfg.grid_path);
    const ImageRGB map = emit_score_map(trace, grid, cfg.oracle_pose);
    write_file_atomic(out_dir / "score_map.png", encode_png(map));
    log_info("wrote score_map.png");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"vantage: find robot base poses that keep a fixed-viewpoint policy in distribution"};
    app.require_subcommand(1);

    CommonArgs args;
    auto add_common = [&](CLI::App* cmd, bool needs_config = true) {
        auto* opt = cmd->add_option("--config", args.config_path, "run config JSON");
        if (needs_config) opt->required();
        cmd->add_option("--out", args.out_dir, "output directory");
        cmd->add_option("--seed", args.seed, "RNG seed override");
        cmd->add_option("--profile", args.profile, "parameter profile: sim|real")
            ->check(CLI::IsMember({"sim", "real"}));
        cmd->add_option("--views", args.views, "comma-separated camera view names");
        cmd->add_flag("--height-opt", args.height_opt,
                      "optimize camera height as a fourth variable");
    };

    auto* optimize_cmd = app.add_subcommand("optimize", "run base-pose optimization");
    add_common(optimize_cmd);
    auto* metrics_cmd = app.add_subcommand("metrics", "compute feasibility metrics");
    add_common(metrics_cmd);
    auto* render_cmd = app.add_subcommand("render", "render a single debug view");
    add_common(render_cmd);
    render_cmd->add_option("--pose", args.pose, "base pose as 'x,y,theta'")->required();
    auto* grid_cmd = app.add_subcommand("build-grid", "build the occupancy grid");
    add_common(grid_cmd);
    auto* eval_cmd = app.add_subcommand("evaluate", "run the synthetic evaluation suite");
    add_common(eval_cmd);
    auto* map_cmd = app.add_subcommand("score-map", "draw a score map from a trace");
    add_common(map_cmd);
    map_cmd->add_option("--trace", args.trace_path, "trace JSONL file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (optimize_cmd->parsed()) return cmd_optimize(args);
        if (metrics_cmd->parsed()) return cmd_metrics(args);
        if (render_cmd->parsed()) return cmd_render(args);
        if (grid_cmd->parsed()) return cmd_build_grid(args);
        if (eval_cmd->parsed()) return cmd_evaluate(args);
        if (map_cmd->parsed()) return cmd_score_map(args);
    } catch (const ConfigError& e) {
        std::cerr << nlohmann::json{{"error", e.what()}, {"exit_code", 2}}.dump() << "\n";
        return 2;
    } catch (const NumericsError& e) {
        std::cerr << nlohmann::json{{"error", e.what()}, {"exit_code", 3}}.dump() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", e.what()}, {"exit_code", 1}}.dump() << "\n";
        return 1;
    }
    return 0;
}
