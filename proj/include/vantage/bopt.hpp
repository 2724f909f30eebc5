#pragma once

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <vector>

#include "vantage/rng.hpp"
#include "vantage/scoring.hpp"

namespace vantage {

struct GPConfig {
    double signal_variance = 1.0;  // sigma_f^2
    double length_scale = 0.2;     // per normalized dimension
    double noise_variance = 1e-4;  // sigma_n^2
};

/// Exact GP regression with a squared-exponential kernel and fixed
/// hyperparameters (no marginal-likelihood optimization).
class GPSurrogate {
public:
    explicit GPSurrogate(GPConfig config = {}) : config_(config) {}

    /// Fit on observations; escalates jitter if the kernel matrix is not
    /// positive definite and throws NumericsError when that fails.
    void fit(const std::vector<Eigen::VectorXd>& points, const Eigen::VectorXd& values);

    /// Posterior (mean, variance) at a point; the prior (0, sigma_f^2) when unfitted.
    std::pair<double, double> predict(const Eigen::VectorXd& x) const;

    const std::vector<Eigen::VectorXd>& points() const { return points_; }
    size_t size() const { return points_.size(); }
    const GPConfig& config() const { return config_; }

private:
    double kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;

    GPConfig config_;
    std::vector<Eigen::VectorXd> points_;
    Eigen::MatrixXd chol_lower_;
    Eigen::VectorXd alpha_;
};

/// mean + kappa * sqrt(variance).
double ucb(const GPSurrogate& gp, const Eigen::VectorXd& x, double kappa);

struct ExclusionZone {
    Pose2D center;
    double radius = 0.0; // planar distance, heading ignored
};

struct BOConfig {
    struct Dim {
        double lo = 0.0;
        double hi = 1.0;
    };

    int n_init = 2500;
    int n_iter = 100;
    int n_batch = 5;
    double kappa = 1.96;
    Dim x_bounds{-1.0, 1.0};
    Dim y_bounds{-1.0, 1.0};
    Dim theta_bounds{-M_PI, M_PI};
    Dim height_bounds{0.0, 0.5};
    bool optimize_height = false;
    std::uint64_t seed = 0;
    int candidate_pool = 1024;
    std::vector<ExclusionZone> exclusion_zones;
    /// When > 0 and exceeded, the GP is fit on a subsample that keeps every
    /// nonzero-score observation and strides through the zeros.
    int max_gp_observations = 0;
    GPConfig gp;

    void validate() const;

    /// Presets matching the shipped profiles.
    static BOConfig sim_profile();
    static BOConfig real_profile();
};

/// Embed a pose for the GP: (x, y, sin theta, cos theta[, h]), each dimension
/// rescaled to [0, 1] by the configured bounds.
Eigen::VectorXd embed_pose(const Pose2D& pose, const BOConfig& config,
                           std::optional<double> height = std::nullopt);

struct Candidate {
    Pose2D pose;
    double height = 0.0;
};

/// Rank candidate_pool uniform samples by UCB and return the top n_batch.
/// Samples inside exclusion zones or within 1e-6 (embedded) of an already
/// evaluated point are dropped; throws when nothing survives.
std::vector<Candidate> propose_batch(const GPSurrogate& gp, const BOConfig& config, Rng& rng);

struct OptimizationTrace {
    std::vector<ScoreResult> evaluated; // in evaluation order
    Pose2D best_pose;
    double best_height = 0.0;
    double best_score = 0.0;
    size_t best_index = 0;
};

using ScoreFn = std::function<ScoreResult(const Pose2D& pose, double height)>;

/// Evaluate n_init seeded-uniform poses, then run n_iter rounds of
/// {fit GP on all observations, propose a batch, evaluate}. Zero-score
/// observations stay in the GP data. score_fn must be pure (batches are
/// evaluated in parallel). Fully deterministic given seed and config.
OptimizationTrace optimize(const ScoreFn& score_fn, const BOConfig& config);

} // namespace vantage
