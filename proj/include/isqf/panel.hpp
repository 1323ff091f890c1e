#pragma once

// Long-format CSV panels: `series_id,timestamp,target[,cov_*]`.
//
// Rows with an empty target are allowed only at the end of a series and carry
// future covariate values. Timestamps are numbers or ISO dates
// (YYYY-MM-DD, optionally followed by HH:MM:SS) and must be equally spaced.

#include <iosfwd>
#include <string>
#include <vector>

namespace isqf {

struct Series {
    std::string id;
    std::vector<std::string> timestamps;  // one per row, observed rows first
    std::vector<double> targets;
    /// One row per timestamp when the panel has covariates, else empty.
    std::vector<std::vector<double>> covariates;

    std::size_t length() const noexcept { return targets.size(); }
    std::size_t future_steps() const noexcept { return timestamps.size() - targets.size(); }
};

struct SeriesPanel {
    std::vector<std::string> covariate_names;
    std::vector<Series> series;

    std::size_t covariate_count() const noexcept { return covariate_names.size(); }
};

/// Throws DataError carrying the 1-based line number of the offending row.
SeriesPanel parse_panel(std::istream& in);
SeriesPanel load_panel(const std::string& path);

void write_panel(std::ostream& out, const SeriesPanel& panel);
void save_panel(const std::string& path, const SeriesPanel& panel);

/// Keeps the first `length` observed values of every series, followed by up to
/// `future` rows that keep only their timestamps and covariates.
SeriesPanel truncate_panel(const SeriesPanel& panel, std::size_t length, std::size_t future = 0);

} // namespace isqf
