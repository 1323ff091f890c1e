#pragma once

// Random valid curves for property tests and differential checks.

#include "isqf/quantile_function.hpp"

#include <algorithm>
#include <random>
#include <vector>

namespace isqf::fuzz {

enum class TailChoice { Iqf, Exponential, Gpd, Mixed };

struct CurveGenOptions {
    std::size_t min_knots = 2;
    std::size_t max_knots = 7;
    std::size_t max_pieces = 5;
    TailChoice tails = TailChoice::Mixed;
    bool strictly_increasing = false;
    double value_scale = 3.0;
};

inline std::vector<double> random_levels(std::mt19937_64& rng, std::size_t k, double lo = 0.005,
                                         double hi = 0.995, double min_gap = 1e-3) {
    std::uniform_real_distribution<double> u(lo, hi);
    for (;;) {
        std::vector<double> xs(k);
        for (auto& x : xs) x = u(rng);
        std::sort(xs.begin(), xs.end());
        bool ok = true;
        for (std::size_t i = 1; i < k; ++i) ok = ok && xs[i] - xs[i - 1] > min_gap;
        if (ok) return xs;
    }
}

inline std::vector<double> random_increasing_values(std::mt19937_64& rng, std::size_t k, double start,
                                                    double scale, bool strict) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(k);
    v[0] = start;
    for (std::size_t i = 1; i < k; ++i) {
        double inc = scale * u(rng);
        if (!strict && u(rng) < 0.15) inc = 0.0;  // flat stretches
        if (strict) inc += 1e-3 * scale;
        v[i] = v[i - 1] + inc;
    }
    return v;
}

inline SplineSegment random_segment(std::mt19937_64& rng, double lo, double hi, double qlo, double qhi,
                                    std::size_t pieces, bool strict) {
    std::vector<double> d{lo};
    if (pieces > 1) {
        auto inner = random_levels(rng, pieces - 1, lo, hi, (hi - lo) * 1e-3);
        for (double x : inner) {
            if (x - d.back() > (hi - lo) * 1e-4 && hi - x > (hi - lo) * 1e-4) d.push_back(x);
        }
    }
    d.push_back(hi);
    std::vector<double> p(d.size());
    p.front() = qlo;
    p.back() = qhi;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> cuts(d.size() - 2);
    for (auto& c : cuts) c = u(rng);
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t s = 1; s + 1 < d.size(); ++s) {
        p[s] = std::clamp(qlo + cuts[s - 1] * (qhi - qlo), qlo, qhi);
    }
    if (strict) {
        for (std::size_t s = 1; s + 1 < d.size(); ++s) {
            if (!(p[s] > p[s - 1])) return SplineSegment::linear(lo, hi, qlo, qhi);
        }
        if (!(p.back() > p[p.size() - 2])) return SplineSegment::linear(lo, hi, qlo, qhi);
    }
    return SplineSegment(std::move(d), std::move(p));
}

inline Tail random_tail(std::mt19937_64& rng, Side side, double level, double value, bool gpd) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (gpd) {
        const double eta = 0.02 + 0.45 * u(rng);
        const double mu = 0.05 + 2.0 * u(rng);
        return GpdTail(side, eta, mu, level, value);
    }
    const double beta = std::exp(std::log(0.2) + u(rng) * std::log(50.0));  // [0.2, 10]
    return ExponentialTail(side, beta, level, value);
}

inline IsqfCurve random_curve(std::mt19937_64& rng, const CurveGenOptions& opt = {}) {
    std::uniform_int_distribution<std::size_t> nk(opt.min_knots, opt.max_knots);
    std::uniform_int_distribution<std::size_t> ns(1, opt.max_pieces);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const std::size_t K = nk(rng);
    auto levels = random_levels(rng, K);
    auto values = random_increasing_values(rng, K, opt.value_scale * u(rng), opt.value_scale,
                                           opt.strictly_increasing);
    QuantileKnots knots(levels, values);

    TailChoice tails = opt.tails;
    if (tails == TailChoice::Mixed) {
        tails = static_cast<TailChoice>(std::uniform_int_distribution<int>(0, 2)(rng));
    }
    if (tails == TailChoice::Iqf && opt.strictly_increasing) {
        return IsqfCurve::iqf(knots);
    }
    std::vector<SplineSegment> segments;
    for (std::size_t k = 0; k + 1 < K; ++k) {
        segments.push_back(random_segment(rng, levels[k], levels[k + 1], values[k], values[k + 1], ns(rng),
                                          opt.strictly_increasing));
    }
    if (tails == TailChoice::Iqf) {
        auto [l, r] = fit_iqf_exponential_tails(knots);
        return IsqfCurve(knots, std::move(segments), l, r);
    }
    const bool gpd = tails == TailChoice::Gpd;
    Tail left = random_tail(rng, Side::Left, levels.front(), values.front(), gpd);
    Tail right = random_tail(rng, Side::Right, levels.back(), values.back(), gpd);
    return IsqfCurve(knots, std::move(segments), std::move(left), std::move(right));
}

} // namespace isqf::fuzz
