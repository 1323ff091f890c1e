#pragma once

// Fitting an unconditional quantile curve to i.i.d. samples and comparing it
// with the generating distribution.

#include "isqf/monotone_head.hpp"
#include "isqf/optimizer.hpp"
#include "isqf/synth.hpp"

#include <cstdint>
#include <vector>

namespace isqf {

/// K evenly spaced levels from 0.1 to 0.9.
std::vector<double> default_recovery_levels(std::size_t knots);

struct RecoveryConfig {
    std::size_t knots = 5;
    std::vector<double> levels;  // empty: default_recovery_levels(knots)
    HeadMode mode = HeadMode::Iqf;
    std::size_t spline_pieces = 1;
    TailKind tail = TailKind::Exponential;
    OptimizerConfig optimizer{OptimizerKind::Adam, 3e-3, 0.9, 0.999, 256, 100, 0.97};
    std::uint64_t seed = 0;
};

struct RecoveryResult {
    IsqfCurve curve;  // in the units of the samples
    std::vector<double> levels;
    std::vector<double> true_values;  // true quantiles at the knot levels
    double l1_distance = 0.0;  // int |q_fit - q_true| over (0,1)
    double max_knot_error = 0.0;
    std::vector<double> loss_trace;
};

/// Samples are centred on the median and scaled by the interquartile range
/// before fitting; the fitted curve is mapped back.
IsqfCurve fit_unconditional(std::span<const double> samples, const RecoveryConfig& config,
                            std::vector<double>* loss_trace = nullptr);

/// L1 distance between a curve and the true quantile function, integrated on a
/// dense logit grid of levels.
double l1_to_truth(const IsqfCurve& curve, const SynthSpec& spec);

/// Draws spec.samples points with spec.seed, fits, and scores against the truth.
RecoveryResult recover(const SynthSpec& spec, const RecoveryConfig& config);

} // namespace isqf
