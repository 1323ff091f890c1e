#pragma once

// Continuous ranked probability score of an IsqfCurve against a scalar
// target, L(q, z) = int_0^1 2 rho_alpha(z - q(alpha)) d alpha, split into
// left tail, spline segments and right tail.

#include "isqf/quantile_function.hpp"

#include <vector>

namespace isqf {

/// Pinball loss rho_alpha(u) = u * (alpha - 1{u < 0}).
inline double pinball(double alpha, double u) noexcept {
    return u * (alpha - (u < 0.0 ? 1.0 : 0.0));
}

struct CrpsBreakdown {
    double left_tail = 0.0;
    std::vector<double> middle;
    double right_tail = 0.0;
    double total = 0.0;
};

/// Default absolute tolerance for quadrature-based tail terms.
inline constexpr double kTailQuadratureTol = 1e-10;

double crps_left_tail_exp(const ExponentialTail& tail, double z);
double crps_right_tail_exp(const ExponentialTail& tail, double z);
double crps_spline_segment(const SplineSegment& segment, double z);
/// GPD tails are integrated numerically (log-substituted adaptive Simpson).
double crps_gpd_tail(const GpdTail& tail, double z, double tol = kTailQuadratureTol);
double crps_tail(const Tail& tail, double z, double tol = kTailQuadratureTol);

/// `tail_tol` only affects GPD tails.
CrpsBreakdown crps(const IsqfCurve& curve, double z, double tail_tol = kTailQuadratureTol);

/// Independent reference: exact integration of the quadratic integrand on
/// every linear sub-piece (split at the indicator switch) and adaptive
/// Simpson on both tails. Throws QuadratureError on non-convergence.
CrpsBreakdown crps_quadrature_breakdown(const IsqfCurve& curve, double z, double tol);
double crps_quadrature_oracle(const IsqfCurve& curve, double z, double tol);

/// int_0^1 |q1(alpha) - q2(alpha)| d alpha: exact on the jointly linear
/// middle, adaptive quadrature wherever either curve is in a tail.
double l1_distance(const IsqfCurve& first, const IsqfCurve& second, double tol = 1e-11);

// ---------------------------------------------------------------------------
// Gradients of L with respect to the curve's primitive quantities.

/// Tail gradient. For exponential tails `scale` is 1/beta; for GPD tails
/// the shape/scale entries are filled instead.
struct TailGradient {
    double anchor_value = 0.0;
    double scale = 0.0;
    double eta = 0.0;
    double mu = 0.0;
};

struct CurveGradient {
    /// dL/dp_s for s = 0..S of every segment (endpoints included).
    std::vector<std::vector<double>> values;
    /// dL/dd_s for s = 0..S of every segment (endpoints are fixed levels, reported anyway).
    std::vector<std::vector<double>> positions;
    TailGradient left;
    TailGradient right;

    /// dL/dq(alpha_k), gathering segment endpoints and tail anchors.
    std::vector<double> knot_values() const;
};

/// Exact gradient, using dL/dtheta = int 2 (1{q(alpha) > z} - alpha) dq/dtheta d alpha.
CurveGradient crps_gradient(const IsqfCurve& curve, double z);

} // namespace isqf
