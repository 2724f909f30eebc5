#include "vantage/harness.hpp"

#include <algorithm>
#include <cmath>

namespace vantage {

ScoringContext HarnessScene::scoring() const {
    ScoringContext ctx;
    ctx.scene = &scene;
    ctx.grid = &grid;
    ctx.footprint = footprint;
    ctx.dataset = &dataset;
    ctx.descriptor = descriptor.get();
    ctx.visibility = visibility.get();
    ctx.views = views;
    return ctx;
}

Pose2D naive_approach_baseline(const HarnessScene& scene, const Pose2D& start, double standoff) {
    const Eigen::Vector2d object = scene.object_center;
    const double bearing_start = std::atan2(start.y - object.y(), start.x - object.x());
    const double angle_step = 2.0 * M_PI / 72.0;
    const double radius_step = 0.5 * scene.grid.resolution;
    const double radius_max = standoff + 2.5;

    Pose2D fallback;
    bool have_fallback = false;
    for (double radius = standoff; radius <= radius_max; radius += radius_step) {
        for (int k = 0; k < 72; ++k) {
            // Angles ordered by deviation from the approach direction.
            const int half = (k + 1) / 2;
            const double angle =
                bearing_start + (k % 2 == 1 ? half : -half) * angle_step;
            Pose2D pose;
            pose.x = object.x() + radius * std::cos(angle);
            pose.y = object.y() + radius * std::sin(angle);
            pose.theta = wrap_angle(std::atan2(object.y() - pose.y, object.x() - pose.x));
            fallback = pose;
            have_fallback = true;
            if (collision_free(pose, scene.grid, scene.footprint).free) {
                return pose;
            }
        }
    }
    if (!have_fallback) {
        throw ConfigError("naive baseline: no candidate poses generated");
    }
    return fallback; // farthest sampled candidate
}

OptimizationTrace ScoreOptSelector::optimize_scene(const HarnessScene& scene,
                                                   std::uint64_t seed) const {
    const ScoringContext ctx = scene.scoring();
    ctx.validate();
    const ScoreFn score = [&ctx](const Pose2D& pose, double height) {
        return hybrid_score(pose, ctx, height);
    };

    BOConfig coarse = options_.coarse;
    // Search the mapped workspace, keeping the footprint inside the grid.
    const double pad = scene.footprint.radius;
    coarse.x_bounds = {scene.grid.origin_x + pad, scene.grid.max_x() - pad};
    coarse.y_bounds = {scene.grid.origin_y + pad, scene.grid.max_y() - pad};
    coarse.seed = mix_seed(seed, 1);
    OptimizationTrace trace = optimize(score, coarse);

    BOConfig refine = coarse;
    refine.n_init = options_.refine_n_init;
    refine.n_iter = options_.refine_n_iter;
    refine.n_batch = options_.refine_n_batch;
    refine.seed = mix_seed(seed, 2);
    const double wx = options_.refine_window_xy;
    refine.x_bounds = {std::max(coarse.x_bounds.lo, trace.best_pose.x - wx),
                       std::min(coarse.x_bounds.hi, trace.best_pose.x + wx)};
    refine.y_bounds = {std::max(coarse.y_bounds.lo, trace.best_pose.y - wx),
                       std::min(coarse.y_bounds.hi, trace.best_pose.y + wx)};
    refine.theta_bounds = {trace.best_pose.theta - options_.refine_window_theta,
                           trace.best_pose.theta + options_.refine_window_theta};
    OptimizationTrace refined = optimize(score, refine);

    if (refined.best_score > trace.best_score) {
        trace.best_score = refined.best_score;
        trace.best_pose = refined.best_pose;
        trace.best_height = refined.best_height;
        trace.best_index = trace.evaluated.size() + refined.best_index;
    }
    trace.evaluated.insert(trace.evaluated.end(), refined.evaluated.begin(),
                           refined.evaluated.end());
    return trace;
}

Pose2D ScoreOptSelector::choose(const EpisodeContext& ctx, const Pose2D&, Rng&) {
    const auto key = std::make_pair(ctx.seed_index, ctx.scene_index);
    const auto it = cache_.find(key);
    if (it != cache_.end()) {
        return it->second;
    }
    const std::uint64_t seed = mix_seed(ctx.suite_seed, ctx.seed_index, ctx.scene_index);
    const Pose2D best = optimize_scene(ctx.scene, seed).best_pose;
    cache_.emplace(key, best);
    return best;
}

EpisodeResult run_episode(PoseSelector& method, const EpisodeContext& ctx,
                          const SuccessModel& model, std::uint64_t seed) {
    const HarnessScene& scene = ctx.scene;
    Rng rng(seed);

    const Eigen::Vector2d object = scene.object_center;
    const Pose2D& oracle = model.oracle_pose;
    const double oracle_bearing = std::atan2(oracle.y - object.y(), oracle.x - object.x());

    Pose2D start;
    bool found = false;
    for (int attempt = 0; attempt < 1000; ++attempt) {
        const double bearing =
            oracle_bearing + rng.uniform(-scene.start.bearing_spread, scene.start.bearing_spread);
        const double radius = rng.uniform(scene.start.radius_min, scene.start.radius_max);
        start.x = object.x() + radius * std::cos(bearing);
        start.y = object.y() + radius * std::sin(bearing);
        start.theta = wrap_angle(std::atan2(object.y() - start.y, object.x() - start.x) +
                                 rng.uniform(-scene.start.heading_noise, scene.start.heading_noise));
        if (!collision_free(start, scene.grid, scene.footprint).free) continue;
        const auto& view = scene.views.front();
        const auto cam = base_to_camera(start, view.rig);
        if (!object_visible(scene.scene, cam, view.intrinsics, *scene.visibility)) continue;
        found = true;
        break;
    }
    if (!found) {
        throw ConfigError("run_episode: no collision-free start with the object in view "
                          "after 1000 tries; check the scene configuration");
    }

    EpisodeResult result;
    result.seed = seed;
    result.start_pose = start;
    result.chosen_pose = method.choose(ctx, start, rng).normalized();
    result.collision = !collision_free(result.chosen_pose, scene.grid, scene.footprint).free;
    result.nav_success = result.chosen_pose.distance_to(oracle) <= kNavSuccessRadius;
    const double q = model.probability(result.chosen_pose);
    result.exec_success = !result.collision && rng.bernoulli(q);
    return result;
}

EvalReport evaluate(PoseSelector& method, const std::vector<HarnessScene>& scenes,
                    const SuiteConfig& config) {
    if (scenes.empty() || config.n_seeds < 1 || config.episodes_per_scene < 1) {
        throw ConfigError("evaluate: empty suite");
    }
    EvalReport report;
    report.method = method.label();
    const int episodes_per_seed = static_cast<int>(scenes.size()) * config.episodes_per_scene;
    for (int seed_index = 0; seed_index < config.n_seeds; ++seed_index) {
        int successes = 0;
        for (size_t scene_index = 0; scene_index < scenes.size(); ++scene_index) {
            EpisodeContext ctx{scenes[scene_index], static_cast<int>(scene_index), seed_index,
                               config.base_seed};
            for (int ep = 0; ep < config.episodes_per_scene; ++ep) {
                const std::uint64_t episode_seed = mix_seed(
                    mix_seed(config.base_seed, static_cast<std::uint64_t>(seed_index)),
                    scene_index, static_cast<std::uint64_t>(ep));
                const auto result =
                    run_episode(method, ctx, scenes[scene_index].model, episode_seed);
                if (result.exec_success) ++successes;
            }
        }
        report.per_seed_rates.push_back(static_cast<double>(successes) / episodes_per_seed);
    }
    report.episodes = episodes_per_seed * config.n_seeds;

    double sum = 0.0;
    for (double r : report.per_seed_rates) sum += r;
    report.mean = sum / report.per_seed_rates.size();
    double sq = 0.0;
    for (double r : report.per_seed_rates) sq += (r - report.mean) * (r - report.mean);
    report.stddev = report.per_seed_rates.size() > 1
                        ? std::sqrt(sq / (report.per_seed_rates.size() - 1))
                        : 0.0;
    return report;
}

// --- default synthetic suite -------------------------------------------------

namespace {

ViewConfig default_view() {
    ViewConfig view;
    view.name = "front";
    const double pitch = 25.0 * M_PI / 180.0;
    const Eigen::Vector3d right(0.0, -1.0, 0.0);
    const Eigen::Vector3d forward(std::cos(pitch), 0.0, -std::sin(pitch));
    const Eigen::Vector3d down = forward.cross(right);
    Eigen::Matrix3d rot;
    rot.col(0) = right;
    rot.col(1) = down;
    rot.col(2) = forward;
    view.rig = {rot, Eigen::Vector3d(0.1, 0.0, 1.0)};
    view.intrinsics = {115.0, 115.0, 80.0, 80.0, 160, 160};
    return view;
}

constexpr double kOracleStandoff = 0.7;

const Eigen::Vector3f kObjectPalette[5] = {
    {0.85f, 0.15f, 0.15f}, {0.90f, 0.45f, 0.10f}, {0.80f, 0.10f, 0.55f},
    {0.20f, 0.30f, 0.85f}, {0.15f, 0.65f, 0.20f},
};

} // namespace

HarnessScene build_harness_scene(int scene_index, std::uint64_t seed) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(scene_index), 0xA11CEull));

    const double room_angle = 2.0 * M_PI * scene_index / 10.0 + rng.uniform(-0.1, 0.1);
    const Eigen::Vector2d u(std::cos(room_angle), std::sin(room_angle));
    const Eigen::Vector2d perp(-u.y(), u.x());
    const double object_distance = 1.1 + rng.uniform(0.0, 0.15);
    const Eigen::Vector2d object_xy = u * object_distance;

    SceneSpec spec;
    spec.seed = mix_seed(seed, static_cast<std::uint64_t>(scene_index), 0xB0B0ull);
    spec.background = {0.05f, 0.05f, 0.08f};

    PrimitiveSpec floor;
    floor.type = PrimitiveSpec::Type::Box;
    floor.center = {0.0, 0.0, -0.02};
    floor.size = {5.0, 5.0, 0.04};
    const float floor_tint = 0.55f + static_cast<float>(rng.uniform(0.0, 0.12));
    floor.color = {floor_tint, floor_tint, floor_tint + 0.03f};
    floor.density = 150.0;
    floor.opacity = 0.95;
    spec.primitives.push_back(floor);

    PrimitiveSpec table;
    table.type = PrimitiveSpec::Type::Box;
    const Eigen::Vector2d table_xy = object_xy + u * 0.30;
    table.center = {table_xy.x(), table_xy.y(), 0.41};
    table.size = {0.7, 1.1, 0.82}; // depth along the room radius
    table.yaw = room_angle;
    table.color = {0.45f, 0.30f, 0.18f};
    table.density = 320.0;
    spec.primitives.push_back(table);

    PrimitiveSpec object;
    object.type = PrimitiveSpec::Type::Box;
    object.center = {object_xy.x(), object_xy.y(), 0.82 + 0.11};
    object.size = {0.22, 0.22, 0.22};
    object.yaw = room_angle + rng.uniform(-0.3, 0.3);
    object.color = kObjectPalette[scene_index % 5];
    object.density = 1400.0;
    object.object_of_interest = true;
    spec.primitives.push_back(object);

    PrimitiveSpec distractor;
    distractor.type = PrimitiveSpec::Type::Box;
    const Eigen::Vector2d distractor_xy =
        object_xy + perp * (1.3 + rng.uniform(0.0, 0.2)) + u * 0.25;
    distractor.center = {distractor_xy.x(), distractor_xy.y(), 0.15};
    distractor.size = {0.3, 0.3, 0.3};
    distractor.yaw = rng.uniform(0.0, M_PI);
    distractor.color = {0.20f, 0.60f, 0.60f};
    distractor.density = 450.0;
    spec.primitives.push_back(distractor);

    HarnessScene hs;
    hs.scene = synthesize_scene(spec);
    hs.object_center = object_xy;
    hs.views = {default_view()};
    hs.descriptor = std::make_shared<PatchStatBackend>();
    hs.visibility = std::make_shared<MaskVisibilityBackend>("object", 50);

    SweepOptions sweep;
    sweep.n_poses = 48;
    sweep.radius = 2.0;
    sweep.resolution = 0.05;
    hs.grid = build_occupancy_from_scene(hs.scene, hs.views.front(), sweep);

    Pose2D oracle;
    const Eigen::Vector2d oracle_xy = object_xy - u * kOracleStandoff;
    oracle.x = oracle_xy.x();
    oracle.y = oracle_xy.y();
    oracle.theta = wrap_angle(room_angle);
    hs.model.oracle_pose = oracle;
    hs.model.peak = 0.8;
    hs.model.s_x = 0.1;
    hs.model.s_y = 0.1;
    hs.model.s_theta = 10.0 * M_PI / 180.0;

    // Demonstration frames rendered near the oracle pose, mirroring a policy
    // trained from fixed initial base poses.
    Rng demo_rng(mix_seed(seed, static_cast<std::uint64_t>(scene_index), 0xDE40ull));
    std::vector<ImageRGB> frames;
    frames.reserve(30);
    const auto& view = hs.views.front();
    for (int i = 0; i < 30; ++i) {
        Pose2D p = oracle;
        p.x += demo_rng.uniform(-0.05, 0.05);
        p.y += demo_rng.uniform(-0.05, 0.05);
        p.theta = wrap_angle(p.theta + demo_rng.uniform(-5.0, 5.0) * M_PI / 180.0);
        frames.push_back(render(hs.scene, base_to_camera(p, view.rig), view.intrinsics).rgb);
    }
    hs.dataset = DemoDataset::from_frames(std::move(frames), *hs.descriptor);
    return hs;
}

std::vector<HarnessScene> build_default_suite(int n_scenes, std::uint64_t seed) {
    if (n_scenes < 1) {
        throw ConfigError("build_default_suite: n_scenes must be >= 1");
    }
    std::vector<HarnessScene> scenes;
    scenes.reserve(static_cast<size_t>(n_scenes));
    for (int i = 0; i < n_scenes; ++i) {
        scenes.push_back(build_harness_scene(i, seed));
    }
    return scenes;
}

} // namespace vantage
