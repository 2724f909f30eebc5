#pragma once

#include <cstdint>
#include <vector>

#include "vantage/harness.hpp"
#include "vantage/image.hpp"

namespace vantage {

struct DecaySample {
    double sigma = 0.0;        // base-pose perturbation scale, meters
    double success_rate = 0.0; // in [0, 1]
};

/// Exponential success-decay fit: rate(sigma) = c0 * exp(-gamma * sigma).
/// phi = ln(2) / gamma is the perturbation at which success halves.
struct DecayFit {
    double c0 = 0.0;
    double gamma = 0.0;
    double phi = 0.0;
    double residual = 0.0; // RMS error over the fitted (positive-rate) samples
    int n_points = 0;      // samples used in the fit
    int n_censored = 0;    // zero-rate samples excluded (reported, not fitted)
};

/// Log-linear least squares on (sigma, ln rate) over positive-rate samples.
/// Zero-rate samples are censored. Throws on fewer than two usable points or
/// non-decaying data (gamma <= 0).
DecayFit fit_decay(const std::vector<DecaySample>& samples);

struct VisualFeasibility {
    double s_v = 0.0;
    int n_views = 0;
    std::vector<double> per_view;
};

struct MaskedView {
    ImageRGB image;
    ImageMask mask;
};

/// Mean fraction of view pixels covered by the object mask.
VisualFeasibility visual_feasibility(const std::vector<MaskedView>& views);

/// For each sigma, run episodes from the nominal pose with zero-mean Gaussian
/// position noise (heading unperturbed), record the success rate, then fit
/// the decay curve.
DecayFit measure_spatial_feasibility(const SuccessModel& model, const Pose2D& nominal,
                                     const std::vector<double>& sigmas, int episodes_per_sigma,
                                     std::uint64_t seed);

/// The per-sigma rates behind a spatial feasibility measurement (for plots).
std::vector<DecaySample> sample_decay_curve(const SuccessModel& model, const Pose2D& nominal,
                                            const std::vector<double>& sigmas,
                                            int episodes_per_sigma, std::uint64_t seed);

} // namespace vantage
