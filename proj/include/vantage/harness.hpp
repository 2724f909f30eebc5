#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "vantage/bopt.hpp"
#include "vantage/descriptor.hpp"
#include "vantage/occupancy.hpp"
#include "vantage/rng.hpp"
#include "vantage/scoring.hpp"
#include "vantage/splat.hpp"

namespace vantage {

/// Analytic stand-in for a learned policy: success probability peaks at the
/// planted oracle pose and falls off as a separable Gaussian in (x, y, theta).
struct SuccessModel {
    Pose2D oracle_pose;
    double peak = 0.8;                 // q0
    double s_x = 0.1;                  // meters
    double s_y = 0.1;                  // meters
    double s_theta = 10.0 * M_PI / 180.0; // radians

    double probability(const Pose2D& p) const {
        const double dx = (p.x - oracle_pose.x) / s_x;
        const double dy = (p.y - oracle_pose.y) / s_y;
        const double dt = wrap_angle(p.theta - oracle_pose.theta) / s_theta;
        return peak * std::exp(-0.5 * (dx * dx + dy * dy + dt * dt));
    }
};

struct StartSampling {
    double radius_min = 1.1;                  // meters from the object
    double radius_max = 1.6;
    double bearing_spread = 20.0 * M_PI / 180.0; // around the oracle bearing
    double heading_noise = 8.0 * M_PI / 180.0;   // around facing the object
};

/// One synthetic scene with everything an episode needs.
struct HarnessScene {
    SplatScene scene;
    OccupancyGrid grid;
    DemoDataset dataset;
    SuccessModel model;
    Eigen::Vector2d object_center = Eigen::Vector2d::Zero();
    std::vector<ViewConfig> views;
    RobotFootprint footprint;
    StartSampling start;
    std::shared_ptr<const DescriptorBackend> descriptor;
    std::shared_ptr<const VisibilityBackend> visibility;

    ScoringContext scoring() const;
};

struct EpisodeContext {
    const HarnessScene& scene;
    int scene_index = 0;
    int seed_index = 0;
    std::uint64_t suite_seed = 0;
};

/// A navigation method under evaluation: picks the pose to run the policy from.
class PoseSelector {
public:
    virtual ~PoseSelector() = default;
    virtual std::string label() const = 0;
    virtual Pose2D choose(const EpisodeContext& ctx, const Pose2D& start, Rng& rng) = 0;
};

/// Upper bound: teleport to the planted oracle pose.
class OracleSelector final : public PoseSelector {
public:
    std::string label() const override { return "oracle"; }
    Pose2D choose(const EpisodeContext& ctx, const Pose2D&, Rng&) override {
        return ctx.scene.model.oracle_pose;
    }
};

/// Lower bound: run the policy from wherever the robot started.
class StaySelector final : public PoseSelector {
public:
    std::string label() const override { return "stay"; }
    Pose2D choose(const EpisodeContext&, const Pose2D& start, Rng&) override { return start; }
};

/// Nearest collision-free pose to the object at a fixed standoff, facing it.
/// Mirrors non-policy-aware navigation: it knows where the object is but
/// nothing about the policy's training distribution.
Pose2D naive_approach_baseline(const HarnessScene& scene, const Pose2D& start,
                               double standoff = 0.6);

class NaiveSelector final : public PoseSelector {
public:
    explicit NaiveSelector(double standoff = 0.6) : standoff_(standoff) {}
    std::string label() const override { return "naive"; }
    Pose2D choose(const EpisodeContext& ctx, const Pose2D& start, Rng&) override {
        return naive_approach_baseline(ctx.scene, start, standoff_);
    }

private:
    double standoff_;
};

/// The policy-aware method: Bayesian optimization over the hybrid score, run
/// once per (seed, scene) and cached across that scene's episodes. A coarse
/// full-workspace round is followed by a refinement round with bounds shrunk
/// around the coarse optimum.
class ScoreOptSelector final : public PoseSelector {
public:
    struct Options {
        BOConfig coarse = desk_scale_coarse();
        int refine_n_init = 250;
        int refine_n_iter = 30;
        int refine_n_batch = 5;
        double refine_window_xy = 0.25;  // half-width, meters
        double refine_window_theta = 25.0 * M_PI / 180.0;

        static BOConfig desk_scale_coarse() {
            BOConfig c;
            c.n_init = 600;
            c.n_iter = 30;
            c.n_batch = 5;
            c.kappa = 1.96;
            c.candidate_pool = 2048;
            return c;
        }
    };

    ScoreOptSelector() : ScoreOptSelector(Options{}) {}
    explicit ScoreOptSelector(Options options) : options_(std::move(options)) {}
    std::string label() const override { return "ours"; }
    Pose2D choose(const EpisodeContext& ctx, const Pose2D& start, Rng& rng) override;

    /// Full two-stage optimization for one scene (also used by tests).
    OptimizationTrace optimize_scene(const HarnessScene& scene, std::uint64_t seed) const;

private:
    Options options_;
    std::map<std::pair<int, int>, Pose2D> cache_;
};

struct EpisodeResult {
    Pose2D start_pose;
    Pose2D chosen_pose;
    bool nav_success = false;  // within 0.5 m of the oracle pose
    bool exec_success = false; // Bernoulli draw from the success model
    bool collision = false;
    std::uint64_t seed = 0;
};

constexpr double kNavSuccessRadius = 0.5; // meters

/// Sample a collision-free start with the object in view (rejection sampling,
/// at most 1000 tries), let the method choose a pose, then draw the policy
/// outcome from the planted model. A colliding chosen pose never succeeds.
EpisodeResult run_episode(PoseSelector& method, const EpisodeContext& ctx,
                          const SuccessModel& model, std::uint64_t seed);

struct SuiteConfig {
    int n_scenes = 10;
    int n_seeds = 3;
    int episodes_per_scene = 5;
    std::uint64_t base_seed = 0;
};

struct EvalReport {
    std::string method;
    std::vector<double> per_seed_rates;
    double mean = 0.0;
    double stddev = 0.0; // sample standard deviation (n - 1)
    int episodes = 0;
};

/// Per-seed success rates over scenes x episodes; mean and sample std across
/// seeds. Fully deterministic given the suite config.
EvalReport evaluate(PoseSelector& method, const std::vector<HarnessScene>& scenes,
                    const SuiteConfig& config);

/// Deterministic default suite: tabletop scenes with a tagged object, planted
/// oracle pose at a non-default standoff, and a 30-frame demo dataset rendered
/// near the oracle.
std::vector<HarnessScene> build_default_suite(int n_scenes, std::uint64_t seed);

/// One scene of the default suite (scene_index selects layout variation).
HarnessScene build_harness_scene(int scene_index, std::uint64_t seed);

} // namespace vantage
