#include "isqf/crps.hpp"

#include "isqf/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <type_traits>

namespace isqf {

// dL/dtheta = int_0^1 2 (1{q(alpha) > z} - alpha) dq(alpha)/dtheta d alpha.
// The switch point of the indicator moves with theta but the integrand
// vanishes there, so no boundary term appears.

namespace {

void segment_gradient(const SplineSegment& seg, double z, std::vector<double>& dvalues,
                      std::vector<double>& dpositions) {
    const auto d = seg.positions();
    const auto p = seg.values();
    const double tilde = seg.inverse(z);
    dvalues.assign(p.size(), 0.0);
    dpositions.assign(d.size(), 0.0);
    for (std::size_t s = 0; s < seg.pieces(); ++s) {
        const double d0 = d[s];
        const double width = d[s + 1] - d0;
        const double t_r = (std::clamp(tilde, d0, d[s + 1]) - d0) / width;
        // With t = (alpha - d0)/width on the piece:
        //   i1 = int g * t,  i0 = int g * (1 - t),  g = 2(1{alpha > tilde} - alpha)
        const double i1 = width * (1.0 - t_r * t_r) - width * (d0 + 2.0 * width / 3.0);
        const double i0 = width * (1.0 - t_r) * (1.0 - t_r) - width * (d0 + width / 3.0);
        const double slope = (p[s + 1] - p[s]) / width;
        dvalues[s] += i0;
        dvalues[s + 1] += i1;
        dpositions[s] -= slope * i0;
        dpositions[s + 1] -= slope * i1;
    }
}

TailGradient exponential_tail_gradient(const ExponentialTail& tail, double z) {
    TailGradient g;
    const double at = tail.anchor_level();
    if (tail.side() == Side::Left) {
        // q = v + scale * log(alpha / at)
        const double tilde = tail.inverse(z);
        g.anchor_value = 2.0 * (at - tilde) - at * at;
        const double tilde_log = tilde > 0.0 ? tilde * std::log(tilde / at) : 0.0;
        g.scale = 2.0 * (tilde - at - tilde_log) + 0.5 * at * at;
        return g;
    }
    // q = v - scale * log(c / ct), c = 1 - alpha
    const double ct = 1.0 - at;
    const double comp = tail.inverse_complement(z);
    g.anchor_value = 2.0 * comp - 1.0 + at * at;
    const double comp_log = comp > 0.0 ? comp * std::log(comp / ct) : 0.0;
    g.scale = 2.0 * comp - 2.0 * comp_log - 2.0 * ct + 0.5 * ct * ct;
    return g;
}

TailGradient gpd_tail_gradient(const GpdTail& tail, double z) {
    TailGradient g;
    const double at = tail.anchor_level();
    const double eta = tail.eta();
    const double mu = tail.mu();
    constexpr double tol = 1e-13;

    if (tail.side() == Side::Left) {
        const double tilde = tail.inverse(z);
        g.anchor_value = 2.0 * (at - tilde) - at * at;
        // The indicator is fixed per sub-interval so endpoint round-off cannot flip it.
        auto d_mu = [&](double alpha, double ind) {
            const double e = std::expm1(-eta * std::log(alpha / at));
            return 2.0 * (ind - alpha) * (-e / eta);
        };
        auto d_eta = [&](double alpha, double ind) {
            const double lx = std::log(alpha / at);
            const double e = std::expm1(-eta * lx);
            return 2.0 * (ind - alpha) * (mu / (eta * eta) * e + mu / eta * (e + 1.0) * lx);
        };
        auto split = [&](const auto& f) {
            double v = integrate_to_zero([&](double alpha) { return f(alpha, 0.0); }, std::min(tilde, at), tol).value;
            if (tilde < at) {
                v += integrate_log_range([&](double alpha) { return f(alpha, 1.0); }, tilde, at, tol).value;
            }
            return v;
        };
        g.mu = split(d_mu);
        g.eta = split(d_eta);
        return g;
    }

    const double ct = 1.0 - at;
    const double comp = tail.inverse_complement(z);
    g.anchor_value = 2.0 * comp - 1.0 + at * at;
    auto d_mu = [&](double c, double ind) {
        const double e = std::expm1(-eta * std::log(c / ct));
        return 2.0 * (ind - (1.0 - c)) * (e / eta);
    };
    auto d_eta = [&](double c, double ind) {
        const double ly = std::log(c / ct);
        const double e = std::expm1(-eta * ly);
        return 2.0 * (ind - (1.0 - c)) * (-mu / (eta * eta) * e - mu / eta * (e + 1.0) * ly);
    };
    auto split = [&](const auto& f) {
        double v = integrate_to_zero([&](double c) { return f(c, 1.0); }, std::min(comp, ct), tol).value;
        if (comp < ct) {
            v += integrate_log_range([&](double c) { return f(c, 0.0); }, comp, ct, tol).value;
        }
        return v;
    };
    g.mu = split(d_mu);
    g.eta = split(d_eta);
    return g;
}

TailGradient tail_gradient(const Tail& tail, double z) {
    return std::visit(
        [z](const auto& t) {
            using T = std::decay_t<decltype(t)>;
            if constexpr (std::is_same_v<T, ExponentialTail>) {
                return exponential_tail_gradient(t, z);
            } else {
                return gpd_tail_gradient(t, z);
            }
        },
        tail);
}

} // namespace

std::vector<double> CurveGradient::knot_values() const {
    const std::size_t K = values.size() + 1;
    std::vector<double> out(K, 0.0);
    for (std::size_t k = 0; k + 1 < K; ++k) {
        out[k] += values[k].front();
        out[k + 1] += values[k].back();
    }
    out.front() += left.anchor_value;
    out.back() += right.anchor_value;
    return out;
}

CurveGradient crps_gradient(const IsqfCurve& curve, double z) {
    CurveGradient g;
    const auto segments = curve.segments();
    g.values.resize(segments.size());
    g.positions.resize(segments.size());
    for (std::size_t k = 0; k < segments.size(); ++k) {
        segment_gradient(segments[k], z, g.values[k], g.positions[k]);
    }
    g.left = tail_gradient(curve.left_tail(), z);
    g.right = tail_gradient(curve.right_tail(), z);
    return g;
}

} // namespace isqf
