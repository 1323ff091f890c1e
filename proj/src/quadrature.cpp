#include "isqf/quadrature.hpp"

#include "isqf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace isqf {

namespace {

struct Panel {
    double a, m, b;
    double fa, fm, fb;
    double whole;
};

class Simpson {
public:
    Simpson(const std::function<double(double)>& f, int max_depth) : f_(f), max_depth_(max_depth) {}

    double integrate(const Panel& p, double tol, int depth, double& err) {
        const double lm = 0.5 * (p.a + p.m);
        const double rm = 0.5 * (p.m + p.b);
        const double flm = eval(lm);
        const double frm = eval(rm);
        const double left = (p.m - p.a) / 6.0 * (p.fa + 4.0 * flm + p.fm);
        const double right = (p.b - p.m) / 6.0 * (p.fm + 4.0 * frm + p.fb);
        const double delta = left + right - p.whole;
        if (std::abs(delta) <= 15.0 * tol) {
            err += std::abs(delta) / 15.0;
            return left + right + delta / 15.0;
        }
        // Panels this narrow cannot be refined in double precision; a kink inside
        // them contributes less than |delta|.
        const double scale = std::max({1.0, std::abs(p.a), std::abs(p.b)});
        if (p.b - p.a <= 1e-12 * scale) {
            err += std::abs(delta);
            return left + right;
        }
        if (depth >= max_depth_) {
            std::ostringstream os;
            os << "adaptive_simpson: no convergence on [" << p.a << ", " << p.b << "], delta " << delta;
            throw QuadratureError(os.str());
        }
        return integrate({p.a, lm, p.m, p.fa, flm, p.fm, left}, 0.5 * tol, depth + 1, err) +
               integrate({p.m, rm, p.b, p.fm, frm, p.fb, right}, 0.5 * tol, depth + 1, err);
    }

    double eval(double x) {
        ++evaluations;
        const double y = f_(x);
        if (!std::isfinite(y)) {
            std::ostringstream os;
            os << "adaptive_simpson: non-finite integrand at " << x;
            throw QuadratureError(os.str());
        }
        return y;
    }

    int evaluations = 0;

private:
    const std::function<double(double)>& f_;
    int max_depth_;
};

} // namespace

QuadratureResult adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                                  double abs_tol, int max_depth) {
    if (!(abs_tol > 0.0)) {
        throw std::invalid_argument("adaptive_simpson: tolerance must be positive");
    }
    QuadratureResult out;
    if (!(b > a)) {
        return out;
    }
    Simpson simpson(f, max_depth);
    // Start from a few panels so narrow features are not skipped by a single coarse estimate.
    constexpr int kPanels = 8;
    const double h = (b - a) / kPanels;
    double x0 = a;
    double f0 = simpson.eval(a);
    for (int i = 0; i < kPanels; ++i) {
        const double x2 = (i + 1 == kPanels) ? b : a + (i + 1) * h;
        const double x1 = 0.5 * (x0 + x2);
        const double f1 = simpson.eval(x1);
        const double f2 = simpson.eval(x2);
        const double whole = (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2);
        out.value += simpson.integrate({x0, x1, x2, f0, f1, f2, whole}, abs_tol / kPanels, 0,
                                       out.error_estimate);
        x0 = x2;
        f0 = f2;
    }
    out.evaluations = simpson.evaluations;
    return out;
}

QuadratureResult integrate_to_zero(const std::function<double(double)>& f, double upper,
                                   double abs_tol, double span) {
    if (!(upper > 0.0)) {
        return {};
    }
    const double u_hi = std::log(upper);
    auto g = [&](double u) {
        const double alpha = std::exp(u);
        return alpha > 0.0 ? f(alpha) * alpha : 0.0;
    };
    return adaptive_simpson(g, u_hi - span, u_hi, abs_tol);
}

QuadratureResult integrate_log_range(const std::function<double(double)>& f, double lower, double upper,
                                     double abs_tol, double span) {
    if (!(upper > lower) || !(upper > 0.0)) {
        return {};
    }
    const double u_hi = std::log(upper);
    const double u_lo = lower > 0.0 ? std::max(std::log(lower), u_hi - span) : u_hi - span;
    auto g = [&](double u) {
        const double alpha = std::exp(u);
        return f(alpha) * alpha;
    };
    return adaptive_simpson(g, u_lo, u_hi, abs_tol);
}

} // namespace isqf
