#pragma once

// Forecast evaluation: weighted quantile loss, its mean over levels, percent
// quantile crossing and the mean scaled interval score.

#include <json.hpp>

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace isqf {

/// Quantile predictions for m series over a horizon of tau steps at K levels.
/// values[(i * tau + t) * K + k] is the level-k prediction for series i, step t.
class ForecastTable {
public:
    ForecastTable(std::vector<double> levels, std::size_t series, std::size_t horizon);

    std::span<const double> levels() const noexcept { return levels_; }
    std::size_t series() const noexcept { return series_; }
    std::size_t horizon() const noexcept { return horizon_; }

    double& at(std::size_t i, std::size_t t, std::size_t k);
    double at(std::size_t i, std::size_t t, std::size_t k) const;
    std::span<double> row(std::size_t i, std::size_t t);
    std::span<const double> row(std::size_t i, std::size_t t) const;

    /// Index of a level, matched to 1e-12. Throws std::invalid_argument if absent.
    std::size_t level_index(double alpha) const;
    bool has_level(double alpha) const;

private:
    std::vector<double> levels_;
    std::size_t series_, horizon_;
    std::vector<double> values_;
};

/// Actuals laid out as [i * tau + t], matching ForecastTable.
using Actuals = std::vector<double>;

/// 2 * sum rho_alpha(z - q) / sum |z|. Throws UndefinedMetricError if sum |z| = 0.
double wql(const ForecastTable& forecast, std::span<const double> actuals, double alpha);

/// Arithmetic mean of wql over the given levels, or over every level of the
/// table when `levels` is empty.
double mean_wql(const ForecastTable& forecast, std::span<const double> actuals,
                std::span<const double> levels = {});

/// Percentage of adjacent level pairs whose predictions are strictly
/// decreasing. Only adjacent pairs are compared, so crossings between distant
/// levels are not seen; the result is a lower bound on the crossing count.
double crossing_percent(const ForecastTable& forecast);

/// Mean absolute lag-f difference over all in-sample histories.
/// Throws std::invalid_argument if a history is not longer than f, and
/// UndefinedMetricError if the result is 0.
double seasonal_error(std::span<const std::vector<double>> histories, std::size_t f);

/// Interval score at levels zeta/2 and 1 - zeta/2, which the table must
/// contain, averaged and scaled by seasonal_error.
double msis(const ForecastTable& forecast, std::span<const double> actuals,
            std::span<const std::vector<double>> histories, std::size_t f, double zeta);

/// Levels a table needs to answer a report with these settings.
std::vector<double> required_levels(std::span<const double> wql_levels, std::span<const double> mean_levels,
                                    std::span<const double> zetas);

struct EvalReport {
    std::size_t series = 0;
    std::size_t horizon = 0;
    std::size_t seasonality = 1;
    std::vector<double> levels;  // the mean_wql levels
    std::map<double, std::optional<double>> wql;
    std::optional<double> mean_wql;
    double crossing_percent = 0.0;
    std::map<double, std::optional<double>> msis;
};

/// Undefined metrics are stored as nullopt rather than thrown.
EvalReport evaluate(const ForecastTable& forecast, std::span<const double> actuals,
                    std::span<const std::vector<double>> histories, std::size_t seasonality,
                    std::span<const double> wql_levels, std::span<const double> mean_levels,
                    std::span<const double> zetas);

/// Flat object: series, horizon, seasonality, levels, wql_<a>, mean_wql,
/// crossing_pct, msis_<zeta>. Undefined entries are the string "N/A".
nlohmann::json to_json(const EvalReport& report);

/// Shortest decimal form of a level used in report keys, e.g. 0.5 -> "0.5".
std::string level_key(double level);

} // namespace isqf
