#include "isqf/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace isqf {

std::vector<double> default_recovery_levels(std::size_t knots) {
    if (knots < 2) throw std::invalid_argument("recovery needs at least two knots");
    std::vector<double> out(knots);
    for (std::size_t k = 0; k < knots; ++k) out[k] = 0.1 + 0.8 * static_cast<double>(k) / static_cast<double>(knots - 1);
    return out;
}

namespace {

double empirical_quantile(std::vector<double> sorted, double p) {
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    return i + 1 < sorted.size() ? sorted[i] * (1.0 - frac) + sorted[i + 1] * frac : sorted[i];
}

} // namespace

IsqfCurve fit_unconditional(std::span<const double> samples, const RecoveryConfig& config,
                            std::vector<double>* loss_trace) {
    if (samples.empty()) throw std::invalid_argument("no samples to fit");
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const double center = empirical_quantile(sorted, 0.5);
    double scale = (empirical_quantile(sorted, 0.75) - empirical_quantile(sorted, 0.25)) / 1.349;
    if (!(scale > 0.0)) scale = 1.0;

    HeadConfig hc;
    hc.input_dim = 1;
    hc.levels = config.levels.empty() ? default_recovery_levels(config.knots) : config.levels;
    hc.mode = config.mode;
    hc.spline_pieces = config.spline_pieces;
    hc.tail = config.tail;
    hc.init_scale = 2.0;

    std::vector<Observation> data;
    data.reserve(samples.size());
    for (double x : samples) data.push_back({{1.0}, (x - center) / scale});
    const auto result = fit(MonotoneHead::initialized(hc, config.seed), data, config.optimizer, config.seed);
    if (loss_trace) *loss_trace = result.loss_trace;
    return result.head.decode(std::vector<double>{1.0}).affine(scale, center);
}

double l1_to_truth(const IsqfCurve& curve, const SynthSpec& spec) {
    // Trapezoid rule in u = logit(alpha), d alpha = alpha (1 - alpha) du.
    constexpr int n = 40000;
    constexpr double span = 25.0;
    const double du = 2.0 * span / n;
    double total = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double u = -span + du * i;
        const double alpha = 1.0 / (1.0 + std::exp(-u));
        const double c = 1.0 / (1.0 + std::exp(u));  // 1 - alpha without cancellation
        if (!(alpha > 0.0 && alpha < 1.0) || !(c > 0.0)) continue;
        const double fitted = alpha > 0.5 ? curve.upper_tail_quantile(c) : curve.quantile(alpha);
        const double weight = (i == 0 || i == n) ? 0.5 : 1.0;
        total += weight * std::abs(fitted - true_quantile(spec, alpha)) * alpha * c * du;
    }
    return total;
}

RecoveryResult recover(const SynthSpec& spec, const RecoveryConfig& config) {
    const auto samples = generate_samples(spec);
    std::vector<double> trace;
    auto curve = fit_unconditional(samples, config, &trace);
    RecoveryResult out{std::move(curve), {}, {}, 0.0, 0.0, std::move(trace)};
    out.levels.assign(out.curve.knots().levels().begin(), out.curve.knots().levels().end());
    for (std::size_t k = 0; k < out.levels.size(); ++k) {
        out.true_values.push_back(true_quantile(spec, out.levels[k]));
        out.max_knot_error = std::max(out.max_knot_error, std::abs(out.curve.knots().value(k) - out.true_values[k]));
    }
    out.l1_distance = l1_to_truth(out.curve, spec);
    return out;
}

} // namespace isqf
