#pragma once

// Monotone piecewise quantile functions: knot grid, linear-spline segments
// between knots, and parametric (exponential or generalized Pareto) tails.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <utility>
#include <variant>
#include <vector>

namespace isqf {

/// Half the machine epsilon of double; the default tail safeguard.
inline constexpr double kHalfEpsilon = std::numeric_limits<double>::epsilon() / 2.0;

/// Largest admissible GPD shape. Shapes at or above 0.5 make the tail CRPS diverge.
inline constexpr double kMaxGpdShape = 0.499;

enum class Side { Left, Right };

/// Ordered quantile levels with their non-decreasing basis estimates.
class QuantileKnots {
public:
    QuantileKnots(std::vector<double> levels, std::vector<double> values);

    std::size_t size() const noexcept { return levels_.size(); }
    std::span<const double> levels() const noexcept { return levels_; }
    std::span<const double> values() const noexcept { return values_; }
    double level(std::size_t k) const { return levels_.at(k); }
    double value(std::size_t k) const { return values_.at(k); }

    /// Index k of the interval [level(k), level(k+1)) holding alpha; the last
    /// knot maps to the last interval.
    std::size_t interval_of(double alpha) const;

private:
    std::vector<double> levels_;
    std::vector<double> values_;
};

/// Linear interpolation between basis estimates. Throws TailRegionError
/// outside [level(0), level(K-1)].
double interpolate_linear(const QuantileKnots& knots, double alpha);

/// Linear spline on one knot interval: positions d_0 < ... < d_S with
/// non-decreasing values p_0 <= ... <= p_S.
class SplineSegment {
public:
    SplineSegment(std::vector<double> positions, std::vector<double> values);

    /// Single-piece segment (linear interpolation between two knots).
    static SplineSegment linear(double lo_level, double hi_level, double lo_value, double hi_value);

    std::size_t pieces() const noexcept { return positions_.size() - 1; }
    std::span<const double> positions() const noexcept { return positions_; }
    std::span<const double> values() const noexcept { return values_; }
    double lo_level() const noexcept { return positions_.front(); }
    double hi_level() const noexcept { return positions_.back(); }
    double lo_value() const noexcept { return values_.front(); }
    double hi_value() const noexcept { return values_.back(); }

    /// Piece index s with d_s <= alpha < d_{s+1} (hi_level maps to the last piece).
    std::size_t piece_of(double alpha) const;

    /// Throws DomainError outside [d_0, d_S].
    double eval(double alpha) const;

    /// Leftmost alpha in the segment with eval(alpha) >= z, clamped to [d_0, d_S].
    double inverse(double z) const;

    SplineSegment affine(double scale, double shift) const;

private:
    std::vector<double> positions_;
    std::vector<double> values_;
};

/// Slope-increment coefficients c_s of the equivalent SQF form
/// value(d_0) + sum_s c_s * max(alpha - d_s, 0).
std::vector<double> sqf_from_isqf(const SplineSegment& segment);

/// Evaluates the SQF form for the coefficients returned by sqf_from_isqf.
double eval_sqf(const SplineSegment& segment, std::span<const double> coefficients, double alpha);

/// Exponential tail through (anchor_level, anchor_value) with rate beta.
///
/// Left:  q(alpha) = a * log(alpha) + b,     a = 1/beta,  b = anchor_value - a*log(anchor_level)
/// Right: q(alpha) = a * log(1 - alpha) + b, a = -1/beta, b = anchor_value - a*log(1 - anchor_level)
class ExponentialTail {
public:
    ExponentialTail(Side side, double beta, double anchor_level, double anchor_value);

    Side side() const noexcept { return side_; }
    double beta() const noexcept { return beta_; }
    double anchor_level() const noexcept { return anchor_level_; }
    double anchor_value() const noexcept { return anchor_value_; }
    double a() const noexcept;
    double b() const noexcept;
    /// Scale 1/beta (always positive).
    double scale() const noexcept { return 1.0 / beta_; }

    bool in_region(double alpha) const noexcept;
    /// Throws DomainError for alpha outside (0,1).
    double eval(double alpha) const;
    /// Level in the tail region where the tail attains z (anchor level when z is beyond the anchor).
    double inverse(double z) const;
    /// Right tail evaluated at alpha = 1 - c without forming 1 - c.
    double eval_complement(double c) const;
    /// Right tail: 1 - inverse(z), computed directly.
    double inverse_complement(double z) const;

    ExponentialTail affine(double scale, double shift) const;

private:
    Side side_;
    double beta_;
    double anchor_level_;
    double anchor_value_;
};

/// IQF tails: rates from the two outermost knot pairs, anchored at the
/// extremal knots.
std::pair<ExponentialTail, ExponentialTail> fit_iqf_exponential_tails(const QuantileKnots& knots,
                                                                       double eps = kHalfEpsilon);

/// Log-ratio numerators of the IQF rates: beta_L = left / (dq_left + eps), etc.
std::pair<double, double> iqf_rate_numerators(const QuantileKnots& knots, double eps = kHalfEpsilon);

/// Generalized Pareto tail spliced at (anchor_level, anchor_value).
///
/// Right: q(alpha) = v + (mu/eta) * [((1-alpha)/(1-alpha_t))^(-eta) - 1]
/// Left:  q(alpha) = v - (mu/eta) * [(alpha/alpha_t)^(-eta) - 1]
class GpdTail {
public:
    GpdTail(Side side, double eta, double mu, double anchor_level, double anchor_value);

    Side side() const noexcept { return side_; }
    double eta() const noexcept { return eta_; }
    double mu() const noexcept { return mu_; }
    double anchor_level() const noexcept { return anchor_level_; }
    double anchor_value() const noexcept { return anchor_value_; }

    bool in_region(double alpha) const noexcept;
    double eval(double alpha) const;
    double inverse(double z) const;
    double eval_complement(double c) const;
    double inverse_complement(double z) const;

    GpdTail affine(double scale, double shift) const;

private:
    Side side_;
    double eta_;
    double mu_;
    double anchor_level_;
    double anchor_value_;
};

using Tail = std::variant<ExponentialTail, GpdTail>;

double tail_anchor_level(const Tail& tail);
double tail_anchor_value(const Tail& tail);
double eval_tail(const Tail& tail, double alpha);

/// Full quantile function on (0,1). Immutable; all queries are thread-safe.
class IsqfCurve {
public:
    IsqfCurve(QuantileKnots knots, std::vector<SplineSegment> segments, Tail left, Tail right);

    /// IQF: linear interpolation plus exponential tails fitted to the outer knot pairs.
    static IsqfCurve iqf(const QuantileKnots& knots, double eps = kHalfEpsilon);

    const QuantileKnots& knots() const noexcept { return knots_; }
    std::span<const SplineSegment> segments() const noexcept { return segments_; }
    const Tail& left_tail() const noexcept { return left_; }
    const Tail& right_tail() const noexcept { return right_; }

    /// Throws DomainError for alpha outside (0,1).
    double quantile(double alpha) const;

    /// Leftmost alpha with quantile(alpha) >= z, i.e. the CDF at z.
    double cdf(double z) const;

    /// quantile(1 - c). Inside the right tail 1 - c is never formed.
    double upper_tail_quantile(double c) const;

    /// Curve of scale*Z + shift (scale > 0).
    IsqfCurve affine(double scale, double shift) const;

private:
    QuantileKnots knots_;
    std::vector<SplineSegment> segments_;
    Tail left_;
    Tail right_;
};

/// Uniform draw on the open interval (0,1) with 53 random bits.
double uniform_open01(std::mt19937_64& rng);

/// Inverse-transform samples, deterministic in the seed.
std::vector<double> sample(const IsqfCurve& curve, std::uint64_t seed, std::size_t n);

} // namespace isqf
