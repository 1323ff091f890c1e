#include "isqf/synth.hpp"

#include "isqf/errors.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace isqf {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

std::vector<double> parse_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, '/')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw std::invalid_argument("bad number '" + item + "' for " + key);
        }
    }
    return out;
}

double parse_scalar(const std::string& key, const std::string& value) {
    const auto xs = parse_list(key, value);
    if (xs.size() != 1) throw std::invalid_argument(key + " takes a single number");
    return xs.front();
}

} // namespace

std::string to_string(SynthKind kind) {
    switch (kind) {
    case SynthKind::GaussianMixture: return "gaussian-mixture";
    case SynthKind::Cauchy: return "cauchy";
    case SynthKind::Exponential: return "exponential";
    case SynthKind::NoisySinusoidPanel: return "noisy-sinusoid-panel";
    }
    return "unknown";
}

void SynthSpec::validate() const {
    switch (kind) {
    case SynthKind::GaussianMixture: {
        if (components.empty()) throw std::invalid_argument("mixture needs at least one component");
        double total = 0.0;
        for (const auto& c : components) {
            if (!(c.weight > 0.0) || !(c.sd > 0.0) || !std::isfinite(c.mean)) {
                throw std::invalid_argument("mixture weights and standard deviations must be positive");
            }
            total += c.weight;
        }
        if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("mixture weights must sum to 1");
        break;
    }
    case SynthKind::Cauchy:
        if (!(scale > 0.0) || !std::isfinite(location)) throw std::invalid_argument("cauchy scale must be positive");
        break;
    case SynthKind::Exponential:
        if (!(rate > 0.0)) throw std::invalid_argument("exponential rate must be positive");
        break;
    case SynthKind::NoisySinusoidPanel:
        if (series == 0 || length == 0 || !(period > 0.0) || !(noise >= 0.0)) {
            throw std::invalid_argument("panel needs series, length, a positive period and non-negative noise");
        }
        return;
    }
    if (samples == 0) throw std::invalid_argument("sample count must be positive");
}

SynthSpec parse_synth_spec(const std::string& text) {
    SynthSpec spec;
    const auto colon = text.find(':');
    const std::string kind = text.substr(0, colon);
    if (kind == "gaussian-mixture" || kind == "mixture") {
        spec.kind = SynthKind::GaussianMixture;
    } else if (kind == "cauchy") {
        spec.kind = SynthKind::Cauchy;
    } else if (kind == "exponential") {
        spec.kind = SynthKind::Exponential;
    } else if (kind == "noisy-sinusoid-panel") {
        spec.kind = SynthKind::NoisySinusoidPanel;
    } else {
        throw std::invalid_argument("unknown distribution '" + kind + "'");
    }
    std::vector<double> weights, means, sds;
    if (colon != std::string::npos) {
        std::stringstream ss(text.substr(colon + 1));
        std::string kv;
        while (std::getline(ss, kv, ',')) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw std::invalid_argument("expected key=value, got '" + kv + "'");
            const auto key = kv.substr(0, eq), value = kv.substr(eq + 1);
            if (key == "weights") weights = parse_list(key, value);
            else if (key == "means") means = parse_list(key, value);
            else if (key == "sds") sds = parse_list(key, value);
            else if (key == "location") spec.location = parse_scalar(key, value);
            else if (key == "scale") spec.scale = parse_scalar(key, value);
            else if (key == "rate") spec.rate = parse_scalar(key, value);
            else if (key == "samples") spec.samples = static_cast<std::size_t>(parse_scalar(key, value));
            else if (key == "series") spec.series = static_cast<std::size_t>(parse_scalar(key, value));
            else if (key == "length") spec.length = static_cast<std::size_t>(parse_scalar(key, value));
            else if (key == "horizon") spec.horizon = static_cast<std::size_t>(parse_scalar(key, value));
            else if (key == "period") spec.period = parse_scalar(key, value);
            else if (key == "noise") spec.noise = parse_scalar(key, value);
            else throw std::invalid_argument("unknown parameter '" + key + "' for " + kind);
        }
    }
    if (!weights.empty() || !means.empty() || !sds.empty()) {
        if (means.empty()) throw std::invalid_argument("mixture needs means");
        if (weights.empty()) weights.assign(means.size(), 1.0 / static_cast<double>(means.size()));
        if (sds.size() == 1) sds.assign(means.size(), sds.front());
        if (weights.size() != means.size() || sds.size() != means.size()) {
            throw std::invalid_argument("mixture weights, means and sds must have equal lengths");
        }
        spec.components.clear();
        for (std::size_t i = 0; i < means.size(); ++i) spec.components.push_back({weights[i], means[i], sds[i]});
    }
    spec.validate();
    return spec;
}

std::vector<double> generate_samples(const SynthSpec& spec) {
    spec.validate();
    if (spec.kind == SynthKind::NoisySinusoidPanel) {
        throw std::invalid_argument("panel specs produce panels, not i.i.d. samples");
    }
    std::mt19937_64 rng(spec.seed);
    std::vector<double> out(spec.samples);
    switch (spec.kind) {
    case SynthKind::GaussianMixture: {
        std::vector<double> w;
        for (const auto& c : spec.components) w.push_back(c.weight);
        std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
        std::normal_distribution<double> normal(0.0, 1.0);
        for (auto& x : out) {
            const auto& c = spec.components[pick(rng)];
            x = c.mean + c.sd * normal(rng);
        }
        break;
    }
    case SynthKind::Cauchy: {
        std::cauchy_distribution<double> d(spec.location, spec.scale);
        for (auto& x : out) x = d(rng);
        break;
    }
    case SynthKind::Exponential: {
        std::exponential_distribution<double> d(spec.rate);
        for (auto& x : out) x = d(rng);
        break;
    }
    case SynthKind::NoisySinusoidPanel: break;
    }
    return out;
}

double true_cdf(const SynthSpec& spec, double z) {
    switch (spec.kind) {
    case SynthKind::GaussianMixture: {
        double p = 0.0;
        for (const auto& c : spec.components) p += c.weight * normal_cdf((z - c.mean) / c.sd);
        return p;
    }
    case SynthKind::Cauchy:
        return 0.5 + std::atan((z - spec.location) / spec.scale) / std::numbers::pi;
    case SynthKind::Exponential:
        return z <= 0.0 ? 0.0 : -std::expm1(-spec.rate * z);
    case SynthKind::NoisySinusoidPanel: break;
    }
    throw std::invalid_argument("panel specs have no marginal distribution");
}

double true_quantile(const SynthSpec& spec, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("true_quantile: level outside (0,1)");
    double lo = -1.0, hi = 1.0;
    while (true_cdf(spec, lo) > alpha) lo *= 2.0;
    while (true_cdf(spec, hi) < alpha) hi *= 2.0;
    while (hi - lo > 1e-12 * std::max(1.0, std::max(std::abs(lo), std::abs(hi)))) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (true_cdf(spec, mid) < alpha ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

SeriesPanel generate_panel(const SynthSpec& spec) {
    spec.validate();
    if (spec.kind != SynthKind::NoisySinusoidPanel) throw std::invalid_argument("not a panel spec");
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> level(0.0, 3.0), amplitude(0.5, 1.5), phase(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> noise(0.0, spec.noise);
    SeriesPanel panel;
    const std::size_t steps = spec.length + spec.horizon;
    for (std::size_t i = 0; i < spec.series; ++i) {
        Series s;
        char id[16];
        std::snprintf(id, sizeof id, "s%03zu", i);
        s.id = id;
        const double l = level(rng), a = amplitude(rng), p = phase(rng);
        for (std::size_t t = 0; t < steps; ++t) {
            s.timestamps.push_back(std::to_string(t));
            s.targets.push_back(l + a * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / spec.period + p) +
                                (spec.noise > 0.0 ? noise(rng) : 0.0));
        }
        panel.series.push_back(std::move(s));
    }
    return panel;
}

} // namespace isqf
