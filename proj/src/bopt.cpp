#include "vantage/bopt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Cholesky>

namespace vantage {

double GPSurrogate::kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    const double inv_l2 = 1.0 / (config_.length_scale * config_.length_scale);
    return config_.signal_variance * std::exp(-0.5 * (a - b).squaredNorm() * inv_l2);
}

void GPSurrogate::fit(const std::vector<Eigen::VectorXd>& points, const Eigen::VectorXd& values) {
    if (points.empty() || static_cast<Eigen::Index>(points.size()) != values.size()) {
        throw ConfigError("gp fit: need at least one observation and matching value count");
    }
    const Eigen::Index n = values.size();
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            const double v = kernel(points[static_cast<size_t>(i)], points[static_cast<size_t>(j)]);
            K(i, j) = v;
            K(j, i) = v;
        }
    }

    double jitter = config_.noise_variance;
    for (int attempt = 0; attempt < 6; ++attempt) {
        Eigen::LLT<Eigen::MatrixXd> llt(K + jitter * Eigen::MatrixXd::Identity(n, n));
        if (llt.info() == Eigen::Success) {
            chol_lower_ = llt.matrixL();
            alpha_ = llt.solve(values);
            points_ = points;
            return;
        }
        jitter = std::max(jitter * 10.0, 1e-12);
    }
    throw NumericsError("gp fit: kernel matrix not positive definite after jitter escalation");
}

std::pair<double, double> GPSurrogate::predict(const Eigen::VectorXd& x) const {
    if (points_.empty()) {
        return {0.0, config_.signal_variance};
    }
    const Eigen::Index n = static_cast<Eigen::Index>(points_.size());
    Eigen::VectorXd k_star(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        k_star(i) = kernel(points_[static_cast<size_t>(i)], x);
    }
    const double mean = k_star.dot(alpha_);
    const Eigen::VectorXd v =
        chol_lower_.triangularView<Eigen::Lower>().solve(k_star);
    const double variance = std::max(0.0, config_.signal_variance - v.squaredNorm());
    return {mean, variance};
}

double ucb(const GPSurrogate& gp, const Eigen::VectorXd& x, double kappa) {
    const auto [mean, variance] = gp.predict(x);
    return mean + kappa * std::sqrt(variance);
}

void BOConfig::validate() const {
    if (n_init < 1 || n_iter < 0 || n_batch < 1) {
        throw ConfigError("bo config: n_init and n_batch must be >= 1, n_iter >= 0");
    }
    if (kappa < 0.0) {
        throw ConfigError("bo config: kappa must be non-negative");
    }
    if (candidate_pool < n_batch) {
        throw ConfigError("bo config: candidate_pool must be >= n_batch");
    }
    for (const Dim* d : {&x_bounds, &y_bounds, &theta_bounds}) {
        if (!(d->lo < d->hi)) {
            throw ConfigError("bo config: bounds must satisfy lo < hi");
        }
    }
    if (optimize_height && !(height_bounds.lo < height_bounds.hi)) {
        throw ConfigError("bo config: height bounds must satisfy lo < hi");
    }
}

BOConfig BOConfig::sim_profile() {
    BOConfig c;
    c.n_init = 2500;
    c.n_iter = 100;
    c.n_batch = 5;
    c.kappa = 1.96;
    c.max_gp_observations = 1500;
    return c;
}

BOConfig BOConfig::real_profile() {
    BOConfig c;
    c.n_init = 1000;
    c.n_iter = 100;
    c.n_batch = 5;
    c.kappa = 0.5;
    c.max_gp_observations = 1500;
    return c;
}

namespace {

double rescale(double v, const BOConfig::Dim& d) { return (v - d.lo) / (d.hi - d.lo); }

bool in_exclusion_zone(const Pose2D& pose, const std::vector<ExclusionZone>& zones) {
    for (const auto& zone : zones) {
        if (pose.distance_to(zone.center) <= zone.radius) return true;
    }
    return false;
}

Candidate sample_candidate(const BOConfig& cfg, Rng& rng) {
    Candidate c;
    c.pose.x = rng.uniform(cfg.x_bounds.lo, cfg.x_bounds.hi);
    c.pose.y = rng.uniform(cfg.y_bounds.lo, cfg.y_bounds.hi);
    c.pose.theta = rng.uniform(cfg.theta_bounds.lo, cfg.theta_bounds.hi);
    if (cfg.optimize_height) {
        c.height = rng.uniform(cfg.height_bounds.lo, cfg.height_bounds.hi);
    }
    return c;
}

constexpr double kDuplicateTolerance = 1e-6;

} // namespace

Eigen::VectorXd embed_pose(const Pose2D& pose, const BOConfig& config,
                           std::optional<double> height) {
    const bool with_height = config.optimize_height || height.has_value();
    Eigen::VectorXd v(with_height ? 5 : 4);
    v(0) = rescale(pose.x, config.x_bounds);
    v(1) = rescale(pose.y, config.y_bounds);
    v(2) = 0.5 * (std::sin(pose.theta) + 1.0);
    v(3) = 0.5 * (std::cos(pose.theta) + 1.0);
    if (with_height) {
        v(4) = rescale(height.value_or(config.height_bounds.lo), config.height_bounds);
    }
    return v;
}

std::vector<Candidate> propose_batch(const GPSurrogate& gp, const BOConfig& config, Rng& rng) {
    config.validate();
    if (gp.size() == 0) {
        throw ConfigError("propose_batch: GP has no observations");
    }

    struct Ranked {
        Candidate candidate;
        Eigen::VectorXd embedded;
        double acquisition;
        int index;
    };
    std::vector<Ranked> pool;
    pool.reserve(static_cast<size_t>(config.candidate_pool));
    for (int i = 0; i < config.candidate_pool; ++i) {
        Candidate c = sample_candidate(config, rng);
        if (in_exclusion_zone(c.pose, config.exclusion_zones)) continue;
        Eigen::VectorXd embedded =
            embed_pose(c.pose, config, config.optimize_height ? std::optional(c.height) : std::nullopt);
        bool duplicate = false;
        for (const auto& seen : gp.points()) {
            if ((seen - embedded).norm() < kDuplicateTolerance) {
                duplicate = true;
                break;
            }
        }
        if (duplicate) continue;
        pool.push_back({c, std::move(embedded), 0.0, i});
    }
    if (pool.empty()) {
        throw ConfigError("propose_batch: no candidates survive the exclusion zones");
    }

#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(pool.size()); ++i) {
        pool[static_cast<size_t>(i)].acquisition =
            ucb(gp, pool[static_cast<size_t>(i)].embedded, config.kappa);
    }

    std::sort(pool.begin(), pool.end(), [](const Ranked& a, const Ranked& b) {
        if (a.acquisition != b.acquisition) return a.acquisition > b.acquisition;
        return a.index < b.index;
    });

    const size_t take = std::min(pool.size(), static_cast<size_t>(config.n_batch));
    std::vector<Candidate> batch;
    batch.reserve(take);
    for (size_t i = 0; i < take; ++i) batch.push_back(pool[i].candidate);
    return batch;
}

namespace {

// Fit the GP on min-max-normalized scores; when over the cap, keep every
// nonzero observation and stride through the zeros.
void fit_surrogate(GPSurrogate& gp, const std::vector<Eigen::VectorXd>& points,
                   const std::vector<double>& scores, int max_observations) {
    std::vector<size_t> selected(points.size());
    std::iota(selected.begin(), selected.end(), size_t{0});
    if (max_observations > 0 && points.size() > static_cast<size_t>(max_observations)) {
        std::vector<size_t> nonzero;
        std::vector<size_t> zero;
        for (size_t i = 0; i < scores.size(); ++i) {
            (scores[i] != 0.0 ? nonzero : zero).push_back(i);
        }
        selected = nonzero;
        const size_t budget =
            static_cast<size_t>(max_observations) > nonzero.size()
                ? static_cast<size_t>(max_observations) - nonzero.size()
                : 0;
        if (budget > 0 && !zero.empty()) {
            const size_t stride = std::max<size_t>(1, zero.size() / budget);
            for (size_t i = 0; i < zero.size() && selected.size() <
                 nonzero.size() + budget; i += stride) {
                selected.push_back(zero[i]);
            }
        }
        std::sort(selected.begin(), selected.end());
    }

    double lo = scores[selected.front()];
    double hi = lo;
    for (size_t i : selected) {
        lo = std::min(lo, scores[i]);
        hi = std::max(hi, scores[i]);
    }
    const double range = hi - lo;

    std::vector<Eigen::VectorXd> x;
    x.reserve(selected.size());
    Eigen::VectorXd y(static_cast<Eigen::Index>(selected.size()));
    for (size_t i = 0; i < selected.size(); ++i) {
        x.push_back(points[selected[i]]);
        y(static_cast<Eigen::Index>(i)) =
            range > 0.0 ? (scores[selected[i]] - lo) / range : 0.0;
    }
    gp.fit(x, y);
}

} // namespace

OptimizationTrace optimize(const ScoreFn& score_fn, const BOConfig& config) {
    config.validate();
    Rng rng(config.seed);

    OptimizationTrace trace;
    std::vector<Eigen::VectorXd> points;
    std::vector<double> scores;

    auto evaluate_batch = [&](const std::vector<Candidate>& batch) {
        std::vector<ScoreResult> results(batch.size());
#pragma omp parallel for schedule(dynamic)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(batch.size()); ++i) {
            const auto& c = batch[static_cast<size_t>(i)];
            results[static_cast<size_t>(i)] = score_fn(c.pose, c.height);
        }
        for (size_t i = 0; i < batch.size(); ++i) {
            const auto& c = batch[i];
            points.push_back(embed_pose(
                c.pose, config, config.optimize_height ? std::optional(c.height) : std::nullopt));
            scores.push_back(results[i].combined);
            trace.evaluated.push_back(std::move(results[i]));
        }
    };

    // Seeded-uniform initialization; exclusion zones are respected here too.
    std::vector<Candidate> init;
    init.reserve(static_cast<size_t>(config.n_init));
    const long max_tries = 10000L * config.n_init;
    long tries = 0;
    while (init.size() < static_cast<size_t>(config.n_init)) {
        if (++tries > max_tries) {
            throw ConfigError("optimize: exclusion zones leave no room for initial samples");
        }
        Candidate c = sample_candidate(config, rng);
        if (in_exclusion_zone(c.pose, config.exclusion_zones)) continue;
        init.push_back(c);
    }
    evaluate_batch(init);

    GPSurrogate gp(config.gp);
    for (int iter = 0; iter < config.n_iter; ++iter) {
        fit_surrogate(gp, points, scores, config.max_gp_observations);
        evaluate_batch(propose_batch(gp, config, rng));
    }

    trace.best_index = 0;
    trace.best_score = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < trace.evaluated.size(); ++i) {
        if (trace.evaluated[i].combined > trace.best_score) {
            trace.best_score = trace.evaluated[i].combined;
            trace.best_index = i;
        }
    }
    trace.best_pose = trace.evaluated[trace.best_index].pose;
    trace.best_height = trace.evaluated[trace.best_index].height;
    return trace;
}

} // namespace vantage
