#include "isqf/crps_check.hpp"

#include "isqf/crps.hpp"
#include "isqf/random_curves.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace isqf {

CrpsCheckReport crps_check(const CrpsCheckConfig& config) {
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> target(-8.0, 8.0);
    fuzz::CurveGenOptions opt;
    CrpsCheckReport report;
    report.trials = config.trials;
    for (std::size_t trial = 0; trial < config.trials; ++trial) {
        opt.tails = trial % 2 ? fuzz::TailChoice::Exponential : fuzz::TailChoice::Iqf;
        const auto curve = fuzz::random_curve(rng, opt);
        const double z = target(rng);
        const double closed = crps(curve, z).total;
        const double oracle = crps_quadrature_oracle(curve, z, config.oracle_tolerance);
        const double rel = std::abs(closed - oracle) / std::max(std::abs(oracle), 1e-300);
        if (!(rel <= config.tolerance)) ++report.failures;
        if (!(rel <= report.max_relative_error)) {
            report.max_relative_error = std::isnan(rel) ? INFINITY : rel;
            report.worst_trial = trial;
        }
    }
    return report;
}

} // namespace isqf
