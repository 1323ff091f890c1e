#include "isqf/metrics.hpp"

#include "isqf/crps.hpp"
#include "isqf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>

namespace isqf {

ForecastTable::ForecastTable(std::vector<double> levels, std::size_t series, std::size_t horizon)
    : levels_(std::move(levels)), series_(series), horizon_(horizon),
      values_(levels_.size() * series * horizon, 0.0) {
    if (levels_.empty()) throw std::invalid_argument("forecast table needs at least one level");
    for (std::size_t k = 0; k < levels_.size(); ++k) {
        if (!(levels_[k] > 0.0 && levels_[k] < 1.0)) throw DomainError("forecast level outside (0,1)");
        if (k > 0 && !(levels_[k] > levels_[k - 1])) throw std::invalid_argument("forecast levels must increase");
    }
}

double& ForecastTable::at(std::size_t i, std::size_t t, std::size_t k) {
    return values_[(i * horizon_ + t) * levels_.size() + k];
}

double ForecastTable::at(std::size_t i, std::size_t t, std::size_t k) const {
    return values_[(i * horizon_ + t) * levels_.size() + k];
}

std::span<double> ForecastTable::row(std::size_t i, std::size_t t) {
    return {values_.data() + (i * horizon_ + t) * levels_.size(), levels_.size()};
}

std::span<const double> ForecastTable::row(std::size_t i, std::size_t t) const {
    return {values_.data() + (i * horizon_ + t) * levels_.size(), levels_.size()};
}

bool ForecastTable::has_level(double alpha) const {
    return std::any_of(levels_.begin(), levels_.end(), [&](double l) { return std::abs(l - alpha) <= 1e-12; });
}

std::size_t ForecastTable::level_index(double alpha) const {
    for (std::size_t k = 0; k < levels_.size(); ++k) {
        if (std::abs(levels_[k] - alpha) <= 1e-12) return k;
    }
    throw std::invalid_argument("forecast has no predictions at level " + level_key(alpha));
}

namespace {

void check_actuals(const ForecastTable& forecast, std::span<const double> actuals) {
    if (actuals.size() != forecast.series() * forecast.horizon()) {
        throw std::invalid_argument("expected " + std::to_string(forecast.series() * forecast.horizon()) +
                                    " actuals, got " + std::to_string(actuals.size()));
    }
}

} // namespace

double wql(const ForecastTable& forecast, std::span<const double> actuals, double alpha) {
    check_actuals(forecast, actuals);
    const std::size_t k = forecast.level_index(alpha);
    const double a = forecast.levels()[k];
    double loss = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < forecast.series(); ++i) {
        for (std::size_t t = 0; t < forecast.horizon(); ++t) {
            const double z = actuals[i * forecast.horizon() + t];
            loss += pinball(a, z - forecast.at(i, t, k));
            norm += std::abs(z);
        }
    }
    if (!(norm > 0.0)) throw UndefinedMetricError("wQL undefined: sum of |z| is zero");
    return 2.0 * loss / norm;
}

double mean_wql(const ForecastTable& forecast, std::span<const double> actuals, std::span<const double> levels) {
    if (levels.empty()) levels = forecast.levels();
    double total = 0.0;
    for (double a : levels) total += wql(forecast, actuals, a);
    return total / static_cast<double>(levels.size());
}

double crossing_percent(const ForecastTable& forecast) {
    const std::size_t K = forecast.levels().size();
    if (K < 2) throw std::invalid_argument("crossing needs at least two levels");
    const std::size_t pairs = forecast.series() * forecast.horizon() * (K - 1);
    if (pairs == 0) return 0.0;
    std::size_t crossed = 0;
    for (std::size_t i = 0; i < forecast.series(); ++i) {
        for (std::size_t t = 0; t < forecast.horizon(); ++t) {
            const auto q = forecast.row(i, t);
            for (std::size_t k = 0; k + 1 < K; ++k) crossed += q[k] > q[k + 1];
        }
    }
    return 100.0 * static_cast<double>(crossed) / static_cast<double>(pairs);
}

double seasonal_error(std::span<const std::vector<double>> histories, std::size_t f) {
    if (f == 0) throw std::invalid_argument("seasonality must be positive");
    if (histories.empty()) throw std::invalid_argument("seasonal error needs at least one history");
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& h : histories) {
        if (h.size() <= f) {
            throw std::invalid_argument("history of length " + std::to_string(h.size()) +
                                        " is too short for seasonality " + std::to_string(f));
        }
        for (std::size_t t = 0; t + f < h.size(); ++t) total += std::abs(h[t] - h[t + f]);
        count += h.size() - f;
    }
    const double se = total / static_cast<double>(count);
    if (!(se > 0.0)) throw UndefinedMetricError("MSIS undefined: seasonal error is zero");
    return se;
}

double msis(const ForecastTable& forecast, std::span<const double> actuals,
            std::span<const std::vector<double>> histories, std::size_t f, double zeta) {
    if (!(zeta > 0.0 && zeta < 1.0)) throw DomainError("zeta outside (0,1)");
    check_actuals(forecast, actuals);
    if (histories.size() != forecast.series()) throw std::invalid_argument("one history per series is required");
    const std::size_t lo = forecast.level_index(zeta / 2.0);
    const std::size_t hi = forecast.level_index(1.0 - zeta / 2.0);
    const double se = seasonal_error(histories, f);
    double total = 0.0;
    for (std::size_t i = 0; i < forecast.series(); ++i) {
        for (std::size_t t = 0; t < forecast.horizon(); ++t) {
            const double z = actuals[i * forecast.horizon() + t];
            const double l = forecast.at(i, t, lo), u = forecast.at(i, t, hi);
            double score = u - l;
            if (z < l) score += 2.0 / zeta * (l - z);
            if (z > u) score += 2.0 / zeta * (z - u);
            total += score;
        }
    }
    return total / static_cast<double>(forecast.series() * forecast.horizon()) / se;
}

std::vector<double> required_levels(std::span<const double> wql_levels, std::span<const double> mean_levels,
                                    std::span<const double> zetas) {
    std::vector<double> out(wql_levels.begin(), wql_levels.end());
    out.insert(out.end(), mean_levels.begin(), mean_levels.end());
    for (double z : zetas) {
        out.push_back(z / 2.0);
        out.push_back(1.0 - z / 2.0);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end(), [](double a, double b) { return std::abs(a - b) <= 1e-12; }),
              out.end());
    return out;
}

EvalReport evaluate(const ForecastTable& forecast, std::span<const double> actuals,
                    std::span<const std::vector<double>> histories, std::size_t seasonality,
                    std::span<const double> wql_levels, std::span<const double> mean_levels,
                    std::span<const double> zetas) {
    EvalReport r;
    r.series = forecast.series();
    r.horizon = forecast.horizon();
    r.seasonality = seasonality;
    r.levels.assign(mean_levels.begin(), mean_levels.end());
    if (r.levels.empty()) r.levels.assign(forecast.levels().begin(), forecast.levels().end());

    for (double a : wql_levels) {
        try {
            r.wql[a] = wql(forecast, actuals, a);
        } catch (const UndefinedMetricError&) {
            r.wql[a] = std::nullopt;
        }
    }
    try {
        r.mean_wql = mean_wql(forecast, actuals, r.levels);
    } catch (const UndefinedMetricError&) {
        r.mean_wql = std::nullopt;
    }
    r.crossing_percent = forecast.levels().size() > 1 ? crossing_percent(forecast) : 0.0;
    for (double z : zetas) {
        try {
            r.msis[z] = msis(forecast, actuals, histories, seasonality, z);
        } catch (const UndefinedMetricError&) {
            r.msis[z] = std::nullopt;
        }
    }
    return r;
}

std::string level_key(double level) {
    char buf[32];
    for (int precision = 1; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, level);
        if (std::strtod(buf, nullptr) == level) break;
    }
    return buf;
}

nlohmann::json to_json(const EvalReport& report) {
    auto value = [](const std::optional<double>& v) -> nlohmann::json {
        if (v) return *v;
        return "N/A";
    };
    nlohmann::json j;
    j["series"] = report.series;
    j["horizon"] = report.horizon;
    j["seasonality"] = report.seasonality;
    j["levels"] = report.levels;
    for (const auto& [a, v] : report.wql) j["wql_" + level_key(a)] = value(v);
    j["mean_wql"] = value(report.mean_wql);
    j["crossing_pct"] = report.crossing_percent;
    for (const auto& [z, v] : report.msis) j["msis_" + level_key(z)] = value(v);
    return j;
}

} // namespace isqf
