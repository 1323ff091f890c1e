#include "isqf/crps.hpp"

#include "isqf/errors.hpp"
#include "isqf/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace isqf {

// ---------------------------------------------------------------------------
// Closed forms

double crps_left_tail_exp(const ExponentialTail& tail, double z) {
    if (tail.side() != Side::Left) {
        throw std::invalid_argument("crps_left_tail_exp: expected a left tail");
    }
    const double at = tail.anchor_level();
    const double a = tail.a();
    const double b = tail.b();
    const double log_at = std::log(at);
    // alpha_tilde: where the indicator 1{z <= q(alpha)} switches.
    double tilde = at;
    double log_tilde = log_at;
    if (z < tail.anchor_value()) {
        log_tilde = (z - b) / a;
        tilde = std::exp(log_tilde);
    }
    const double value = (z - b) * (at * at - 2.0 * at + 2.0 * tilde) +
                         a * (at * at * (-log_at + 0.5) + 2.0 * at * (log_at - 1.0) -
                              2.0 * tilde * (log_tilde - 1.0));
    return std::max(value, 0.0);
}

double crps_right_tail_exp(const ExponentialTail& tail, double z) {
    if (tail.side() != Side::Right) {
        throw std::invalid_argument("crps_right_tail_exp: expected a right tail");
    }
    const double at = tail.anchor_level();
    const double a = tail.a(); // negative: -1/beta
    const double b = tail.b();
    const double log_ct = std::log1p(-at);
    // Complement of alpha_tilde, 1 - alpha_tilde, kept separately for accuracy.
    double comp = 1.0 - at;
    double log_comp = log_ct;
    if (z > tail.anchor_value()) {
        log_comp = (z - b) / a;
        comp = std::exp(log_comp);
    }
    const double tilde = 1.0 - comp;
    // 1 + at^2 - 2*tilde == at^2 - 1 + 2*comp
    const double value = -(z - b) * (at * at - 1.0 + 2.0 * comp) -
                         a * ((1.0 - at * at) * log_ct + 0.5 + 0.5 * at * at + at -
                              2.0 * comp * log_comp - 2.0 * tilde);
    return std::max(value, 0.0);
}

double crps_spline_segment(const SplineSegment& segment, double z) {
    const auto d = segment.positions();
    const auto p = segment.values();
    const double lo = segment.lo_level();
    const double hi = segment.hi_level();
    const double tilde = segment.inverse(z);

    double value = (hi * hi - lo * lo - 2.0 * (hi - tilde)) * (z - p.front());
    for (std::size_t s = 0; s < segment.pieces(); ++s) {
        const double dp = p[s + 1] - p[s];
        if (dp == 0.0) {
            continue;
        }
        const double d0 = d[s];
        const double d1 = d[s + 1];
        const double r = std::clamp(tilde, d0, d1);
        const double inner = d1 * d1 * (-2.0 / 3.0 * d1 + d0 + 1.0) - d0 * (d0 * d0 / 3.0 + 2.0 * d1) -
                             r * (r - 2.0 * d0);
        value += dp * (inner / (d1 - d0) - hi * hi + d1 * d1 + 2.0 * hi - 2.0 * std::max(tilde, d1));
    }
    return std::max(value, 0.0);
}

namespace {

// int 2 rho_alpha(z - q(alpha)) over a left-tail region (0, anchor], split
// where q crosses z. `q` maps alpha -> tail value.
template <class Quantile>
double integrate_left_tail(const Quantile& q, double anchor, double tilde, double z, double tol) {
    auto integrand = [&](double alpha) { return 2.0 * pinball(alpha, z - q(alpha)); };
    double total = integrate_to_zero(integrand, std::min(tilde, anchor), 0.5 * tol).value;
    if (tilde < anchor) {
        total += integrate_log_range(integrand, tilde, anchor, 0.5 * tol).value;
    }
    return total;
}

// Right-tail region [anchor, 1) expressed in c = 1 - alpha over (0, 1 - anchor].
template <class Quantile>
double integrate_right_tail(const Quantile& q_of_c, double comp_anchor, double comp_tilde, double z,
                            double tol) {
    auto integrand = [&](double c) { return 2.0 * pinball(1.0 - c, z - q_of_c(c)); };
    double total = integrate_to_zero(integrand, std::min(comp_tilde, comp_anchor), 0.5 * tol).value;
    if (comp_tilde < comp_anchor) {
        total += integrate_log_range(integrand, comp_tilde, comp_anchor, 0.5 * tol).value;
    }
    return total;
}

template <class T>
double quadrature_tail(const T& tail, double z, double tol) {
    if (tail.side() == Side::Left) {
        auto q = [&](double alpha) { return tail.eval(alpha); };
        return integrate_left_tail(q, tail.anchor_level(), tail.inverse(z), z, tol);
    }
    auto q = [&](double c) { return tail.eval_complement(c); };
    return integrate_right_tail(q, 1.0 - tail.anchor_level(), tail.inverse_complement(z), z, tol);
}

} // namespace

double crps_gpd_tail(const GpdTail& tail, double z, double tol) {
    return std::max(quadrature_tail(tail, z, tol), 0.0);
}

double crps_tail(const Tail& tail, double z, double tol) {
    if (const auto* exp_tail = std::get_if<ExponentialTail>(&tail)) {
        return exp_tail->side() == Side::Left ? crps_left_tail_exp(*exp_tail, z)
                                              : crps_right_tail_exp(*exp_tail, z);
    }
    return crps_gpd_tail(std::get<GpdTail>(tail), z, tol);
}

CrpsBreakdown crps(const IsqfCurve& curve, double z, double tail_tol) {
    CrpsBreakdown out;
    out.left_tail = crps_tail(curve.left_tail(), z, tail_tol);
    out.right_tail = crps_tail(curve.right_tail(), z, tail_tol);
    out.middle.reserve(curve.segments().size());
    out.total = out.left_tail;
    for (const auto& seg : curve.segments()) {
        out.middle.push_back(crps_spline_segment(seg, z));
        out.total += out.middle.back();
    }
    out.total += out.right_tail;
    return out;
}

// ---------------------------------------------------------------------------
// Quadrature oracle

namespace {

// Exact integral of 2 rho_alpha(z - q(alpha)) on [l, r] where q is linear and
// z - q(alpha) keeps one sign: the integrand is quadratic, so one Simpson
// panel is exact.
double exact_linear_piece(double l, double r, double ql, double qr, double z) {
    if (!(r > l)) {
        return 0.0;
    }
    const double m = 0.5 * (l + r);
    const double qm = 0.5 * (ql + qr);
    const double indicator = (z < qm) ? 1.0 : 0.0;
    auto f = [&](double alpha, double q) { return 2.0 * (z - q) * (alpha - indicator); };
    return (r - l) / 6.0 * (f(l, ql) + 4.0 * f(m, qm) + f(r, qr));
}

double oracle_segment(const SplineSegment& seg, double z) {
    const auto d = seg.positions();
    const auto p = seg.values();
    double total = 0.0;
    for (std::size_t s = 0; s < seg.pieces(); ++s) {
        const double l = d[s];
        const double r = d[s + 1];
        const double ql = p[s];
        const double qr = p[s + 1];
        if (ql < z && z < qr) {
            const double cross = l + (z - ql) / (qr - ql) * (r - l);
            total += exact_linear_piece(l, cross, ql, z, z) + exact_linear_piece(cross, r, z, qr, z);
        } else {
            total += exact_linear_piece(l, r, ql, qr, z);
        }
    }
    return total;
}

double oracle_tail(const Tail& tail, double z, double tol) {
    return std::visit([&](const auto& t) { return quadrature_tail(t, z, tol); }, tail);
}

} // namespace

CrpsBreakdown crps_quadrature_breakdown(const IsqfCurve& curve, double z, double tol) {
    if (!(tol > 0.0)) {
        throw std::invalid_argument("crps_quadrature_oracle: tolerance must be positive");
    }
    CrpsBreakdown out;
    out.left_tail = oracle_tail(curve.left_tail(), z, 0.5 * tol);
    out.right_tail = oracle_tail(curve.right_tail(), z, 0.5 * tol);
    out.total = out.left_tail;
    for (const auto& seg : curve.segments()) {
        out.middle.push_back(oracle_segment(seg, z));
        out.total += out.middle.back();
    }
    out.total += out.right_tail;
    return out;
}

double crps_quadrature_oracle(const IsqfCurve& curve, double z, double tol) {
    return crps_quadrature_breakdown(curve, z, tol).total;
}

// ---------------------------------------------------------------------------
// L1 distance between quantile functions

namespace {

double abs_linear_integral(double width, double e0, double e1) {
    if ((e0 >= 0.0 && e1 >= 0.0) || (e0 <= 0.0 && e1 <= 0.0)) {
        return 0.5 * width * (std::abs(e0) + std::abs(e1));
    }
    return 0.5 * width * (e0 * e0 + e1 * e1) / (std::abs(e0) + std::abs(e1));
}

void collect_breakpoints(const IsqfCurve& curve, std::set<double>& points) {
    for (const auto& seg : curve.segments()) {
        points.insert(seg.positions().begin(), seg.positions().end());
    }
}

} // namespace

double l1_distance(const IsqfCurve& first, const IsqfCurve& second, double tol) {
    std::set<double> points;
    collect_breakpoints(first, points);
    collect_breakpoints(second, points);
    const std::vector<double> bp(points.begin(), points.end());

    const double linear_lo = std::max(first.knots().level(0), second.knots().level(0));
    const double linear_hi = std::min(first.knots().levels().back(), second.knots().levels().back());

    auto diff = [&](double alpha) { return std::abs(first.quantile(alpha) - second.quantile(alpha)); };
    const double piece_tol = tol / static_cast<double>(bp.size() + 2);

    double total = integrate_to_zero(diff, bp.front(), piece_tol).value;
    auto diff_c = [&](double c) {
        return std::abs(first.upper_tail_quantile(c) - second.upper_tail_quantile(c));
    };
    total += integrate_to_zero(diff_c, 1.0 - bp.back(), piece_tol).value;

    for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
        const double l = bp[i];
        const double r = bp[i + 1];
        if (l >= linear_lo && r <= linear_hi) {
            total += abs_linear_integral(r - l, first.quantile(l) - second.quantile(l),
                                         first.quantile(r) - second.quantile(r));
        } else {
            total += adaptive_simpson(diff, l, r, piece_tol).value;
        }
    }
    return total;
}

} // namespace isqf
