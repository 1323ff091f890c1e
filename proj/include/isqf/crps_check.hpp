#pragma once

// Differential test of the closed-form CRPS against adaptive quadrature on
// random curves with exponential tails.

#include <cstdint>
#include <cstddef>

namespace isqf {

struct CrpsCheckConfig {
    std::size_t trials = 1000;
    double tolerance = 1e-6;  // relative
    std::uint64_t seed = 0;
    double oracle_tolerance = 1e-11;
};

struct CrpsCheckReport {
    std::size_t trials = 0;
    std::size_t failures = 0;
    double max_relative_error = 0.0;
    std::size_t worst_trial = 0;
    bool passed() const noexcept { return failures == 0; }
};

/// Alternates fitted IQF tails and random exponential tails over random
/// knots and spline segments; targets are uniform on [-8, 8].
CrpsCheckReport crps_check(const CrpsCheckConfig& config);

} // namespace isqf
