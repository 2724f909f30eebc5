#include "vantage/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace vantage {

DecayFit fit_decay(const std::vector<DecaySample>& samples) {
    std::vector<DecaySample> positive;
    int censored = 0;
    for (const auto& s : samples) {
        if (!(s.sigma >= 0.0) || !std::isfinite(s.sigma) || !std::isfinite(s.success_rate) ||
            s.success_rate < 0.0 || s.success_rate > 1.0) {
            throw ConfigError("fit_decay: samples need sigma >= 0 and rate in [0, 1]");
        }
        if (s.success_rate > 0.0) {
            positive.push_back(s);
        } else {
            ++censored;
        }
    }
    if (positive.size() < 2) {
        throw ConfigError("fit_decay: need at least two samples with positive success rate");
    }
    bool distinct = false;
    for (size_t i = 1; i < positive.size(); ++i) {
        if (positive[i].sigma != positive[0].sigma) distinct = true;
    }
    if (!distinct) {
        throw ConfigError("fit_decay: positive samples need at least two distinct sigmas");
    }

    // Least squares on ln(rate) = ln(c0) - gamma * sigma.
    const double n = static_cast<double>(positive.size());
    double sum_x = 0.0, sum_y = 0.0, sum_xx = 0.0, sum_xy = 0.0;
    for (const auto& s : positive) {
        const double y = std::log(s.success_rate);
        sum_x += s.sigma;
        sum_y += y;
        sum_xx += s.sigma * s.sigma;
        sum_xy += s.sigma * y;
    }
    const double denom = n * sum_xx - sum_x * sum_x;
    const double slope = (n * sum_xy - sum_x * sum_y) / denom;
    const double intercept = (sum_y - slope * sum_x) / n;

    DecayFit fit;
    fit.gamma = -slope;
    if (!(fit.gamma > 0.0)) {
        throw NumericsError("fit_decay: data is non-decaying (fitted gamma <= 0)");
    }
    fit.c0 = std::exp(intercept);
    fit.phi = M_LN2 / fit.gamma;
    fit.n_points = static_cast<int>(positive.size());
    fit.n_censored = censored;

    double sq = 0.0;
    for (const auto& s : positive) {
        const double predicted = fit.c0 * std::exp(-fit.gamma * s.sigma);
        sq += (predicted - s.success_rate) * (predicted - s.success_rate);
    }
    fit.residual = std::sqrt(sq / n);
    return fit;
}

VisualFeasibility visual_feasibility(const std::vector<MaskedView>& views) {
    if (views.empty()) {
        throw ConfigError("visual_feasibility: need at least one view");
    }
    VisualFeasibility vf;
    vf.n_views = static_cast<int>(views.size());
    double sum = 0.0;
    for (const auto& view : views) {
        if (view.mask.height != view.image.height || view.mask.width != view.image.width) {
            throw ConfigError("visual_feasibility: mask dimensions do not match the image");
        }
        const double total = static_cast<double>(view.mask.height) * view.mask.width;
        const double fraction = view.mask.count() / total;
        vf.per_view.push_back(fraction);
        sum += fraction;
    }
    vf.s_v = sum / vf.n_views;
    return vf;
}

std::vector<DecaySample> sample_decay_curve(const SuccessModel& model, const Pose2D& nominal,
                                            const std::vector<double>& sigmas,
                                            int episodes_per_sigma, std::uint64_t seed) {
    if (sigmas.empty() || episodes_per_sigma < 1) {
        throw ConfigError("spatial feasibility: need sigmas and episodes_per_sigma >= 1");
    }
    std::vector<DecaySample> samples;
    samples.reserve(sigmas.size());
    for (size_t si = 0; si < sigmas.size(); ++si) {
        const double sigma = sigmas[si];
        Rng rng(mix_seed(seed, si));
        int successes = 0;
        for (int ep = 0; ep < episodes_per_sigma; ++ep) {
            Pose2D p = nominal;
            p.x += rng.normal(0.0, sigma);
            p.y += rng.normal(0.0, sigma);
            if (rng.bernoulli(model.probability(p))) ++successes;
        }
        samples.push_back({sigma, static_cast<double>(successes) / episodes_per_sigma});
    }
    return samples;
}

DecayFit measure_spatial_feasibility(const SuccessModel& model, const Pose2D& nominal,
                                     const std::vector<double>& sigmas, int episodes_per_sigma,
                                     std::uint64_t seed) {
    return fit_decay(sample_decay_curve(model, nominal, sigmas, episodes_per_sigma, seed));
}

} // namespace vantage
