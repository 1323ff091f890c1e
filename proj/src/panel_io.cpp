#include "isqf/panel.hpp"

#include "isqf/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace isqf {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(start, comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

std::optional<double> parse_number(const std::string& s) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
    return v;
}

// Days since 1970-01-01 for a proleptic Gregorian date.
long long days_from_civil(long long y, unsigned m, unsigned d) {
    y -= m <= 2;
    const long long era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long long>(doe) - 719468;
}

std::optional<double> parse_timestamp(const std::string& s) {
    if (auto v = parse_number(s)) return v;
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
    char tail[2] = {};
    int n = std::sscanf(s.c_str(), "%4d-%2d-%2d%1[ T]%2d:%2d:%2d", &y, &mo, &d, tail, &h, &mi, &sec);
    if (n != 3 && n != 6 && n != 7) return std::nullopt;
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || sec > 60) return std::nullopt;
    const std::size_t expected = n == 3 ? 10 : (n == 6 ? 16 : 19);
    if (s.size() != expected) return std::nullopt;
    return static_cast<double>(days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d))) * 86400.0 +
           h * 3600.0 + mi * 60.0 + sec;
}

struct Row {
    std::size_t line;
    std::string timestamp;
    double key;
    std::optional<double> target;
    std::vector<double> covariates;
};

} // namespace

SeriesPanel parse_panel(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty panel file", 1);
    const auto header = split_fields(line);
    if (header.size() < 3 || header[0] != "series_id" || header[1] != "timestamp" || header[2] != "target") {
        throw DataError("header must start with series_id,timestamp,target", 1);
    }
    SeriesPanel panel;
    for (std::size_t c = 3; c < header.size(); ++c) {
        if (header[c].rfind("cov_", 0) != 0) {
            throw DataError("covariate column '" + header[c] + "' must be named cov_*", 1);
        }
        panel.covariate_names.push_back(header[c]);
    }

    std::map<std::string, std::vector<Row>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto f = split_fields(line);
        if (f.size() != header.size()) {
            throw DataError("expected " + std::to_string(header.size()) + " fields, found " + std::to_string(f.size()),
                            line_no);
        }
        if (f[0].empty()) throw DataError("empty series_id", line_no);
        Row r{line_no, f[1], 0.0, std::nullopt, {}};
        const auto key = parse_timestamp(f[1]);
        if (!key) throw DataError("unparseable timestamp '" + f[1] + "'", line_no);
        r.key = *key;
        if (!f[2].empty()) {
            r.target = parse_number(f[2]);
            if (!r.target) throw DataError("non-numeric target '" + f[2] + "'", line_no);
        }
        for (std::size_t c = 3; c < f.size(); ++c) {
            if (f[c].empty()) throw DataError("missing value for " + header[c], line_no);
            const auto v = parse_number(f[c]);
            if (!v) throw DataError("non-numeric value '" + f[c] + "' for " + header[c], line_no);
            r.covariates.push_back(*v);
        }
        rows[f[0]].push_back(std::move(r));
    }
    if (rows.empty()) throw DataError("panel has no rows", line_no);

    for (auto& [id, rs] : rows) {
        std::stable_sort(rs.begin(), rs.end(), [](const Row& a, const Row& b) { return a.key < b.key; });
        Series s;
        s.id = id;
        double step = 0.0;
        bool future = false;
        for (std::size_t i = 0; i < rs.size(); ++i) {
            const auto& r = rs[i];
            if (i > 0) {
                const double gap = r.key - rs[i - 1].key;
                if (gap == 0.0) throw DataError("duplicate timestamp '" + r.timestamp + "' in series " + id, r.line);
                if (i == 1) {
                    step = gap;
                } else if (std::abs(gap - step) > 1e-9 * std::abs(step)) {
                    throw DataError("timestamps of series " + id + " are not equally spaced", r.line);
                }
            }
            if (!r.target) {
                future = true;
            } else if (future) {
                throw DataError("missing target before the end of series " + id, rs[i - 1].line);
            } else {
                s.targets.push_back(*r.target);
            }
            s.timestamps.push_back(r.timestamp);
            if (!panel.covariate_names.empty()) s.covariates.push_back(r.covariates);
        }
        if (s.targets.empty()) throw DataError("series " + id + " has no observed targets", rs.front().line);
        panel.series.push_back(std::move(s));
    }
    return panel;
}

SeriesPanel load_panel(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open panel file '" + path + "'");
    return parse_panel(in);
}

void write_panel(std::ostream& out, const SeriesPanel& panel) {
    out << "series_id,timestamp,target";
    for (const auto& n : panel.covariate_names) out << ',' << n;
    out << '\n';
    char buf[32];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    for (const auto& s : panel.series) {
        for (std::size_t t = 0; t < s.timestamps.size(); ++t) {
            out << s.id << ',' << s.timestamps[t] << ',';
            if (t < s.targets.size()) out << num(s.targets[t]);
            if (!s.covariates.empty()) {
                for (double c : s.covariates[t]) out << ',' << num(c);
            }
            out << '\n';
        }
    }
}

void save_panel(const std::string& path, const SeriesPanel& panel) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot write panel file '" + path + "'");
    write_panel(out, panel);
}

SeriesPanel truncate_panel(const SeriesPanel& panel, std::size_t length, std::size_t future) {
    SeriesPanel out;
    out.covariate_names = panel.covariate_names;
    for (const auto& s : panel.series) {
        Series t;
        t.id = s.id;
        const std::size_t observed = std::min(length, s.targets.size());
        const std::size_t rows = std::min(observed + future, s.timestamps.size());
        t.targets.assign(s.targets.begin(), s.targets.begin() + static_cast<std::ptrdiff_t>(observed));
        t.timestamps.assign(s.timestamps.begin(), s.timestamps.begin() + static_cast<std::ptrdiff_t>(rows));
        if (!s.covariates.empty()) {
            t.covariates.assign(s.covariates.begin(), s.covariates.begin() + static_cast<std::ptrdiff_t>(rows));
        }
        out.series.push_back(std::move(t));
    }
    return out;
}

} // namespace isqf
