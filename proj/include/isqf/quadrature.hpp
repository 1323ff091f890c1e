#pragma once

#include <functional>

namespace isqf {

struct QuadratureResult {
    double value = 0.0;
    double error_estimate = 0.0;
    int evaluations = 0;
};

/// Adaptive Simpson on [a, b] with Richardson correction. Stops when the
/// estimated error of every panel is within its share of abs_tol. Throws
/// QuadratureError if max_depth is exhausted first.
QuadratureResult adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                                  double abs_tol, int max_depth = 48);

/// Integral over (0, upper] for an integrand that is integrable at 0,
/// computed in u = log(alpha) and truncated where exp(u) < exp(-span).
/// Right tails use it on the complement c = 1 - alpha.
QuadratureResult integrate_to_zero(const std::function<double(double)>& f, double upper,
                                   double abs_tol, double span = 200.0);

/// Integral over [lower, upper] in u = log(alpha), 0 <= lower < upper.
/// The lower end is raised to upper * exp(-span) when it is smaller.
QuadratureResult integrate_log_range(const std::function<double(double)>& f, double lower, double upper,
                                     double abs_tol, double span = 200.0);

} // namespace isqf
