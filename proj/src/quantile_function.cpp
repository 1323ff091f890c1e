#include "isqf/quantile_function.hpp"

#include "isqf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <type_traits>

namespace isqf {

namespace {

void require_open_unit(double alpha, const char* what) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        std::ostringstream os;
        os << what << ": level " << alpha << " outside (0,1)";
        throw DomainError(os.str());
    }
}

void require_strictly_increasing(std::span<const double> xs, const char* what) {
    for (std::size_t i = 1; i < xs.size(); ++i) {
        if (!(xs[i] > xs[i - 1])) {
            throw std::invalid_argument(std::string(what) + " must be strictly increasing");
        }
    }
}

void require_non_decreasing(std::span<const double> xs, const char* what) {
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!std::isfinite(xs[i])) {
            throw std::invalid_argument(std::string(what) + " must be finite");
        }
        if (i > 0 && xs[i] < xs[i - 1]) {
            throw std::invalid_argument(std::string(what) + " must be non-decreasing");
        }
    }
}

} // namespace

// ---------------------------------------------------------------------------
// QuantileKnots

QuantileKnots::QuantileKnots(std::vector<double> levels, std::vector<double> values)
    : levels_(std::move(levels)), values_(std::move(values)) {
    if (levels_.size() < 2) {
        throw std::invalid_argument("QuantileKnots: need at least two knots");
    }
    if (levels_.size() != values_.size()) {
        throw std::invalid_argument("QuantileKnots: levels and values differ in length");
    }
    for (double a : levels_) {
        require_open_unit(a, "QuantileKnots");
    }
    require_strictly_increasing(levels_, "QuantileKnots levels");
    require_non_decreasing(values_, "QuantileKnots values");
}

std::size_t QuantileKnots::interval_of(double alpha) const {
    if (alpha < levels_.front() || alpha > levels_.back()) {
        throw TailRegionError("level outside the knot range");
    }
    auto it = std::upper_bound(levels_.begin(), levels_.end(), alpha);
    auto k = static_cast<std::size_t>(it - levels_.begin());
    return std::min(k, levels_.size() - 1) - 1;
}

double interpolate_linear(const QuantileKnots& knots, double alpha) {
    const std::size_t k = knots.interval_of(alpha);
    const double lo = knots.level(k);
    const double hi = knots.level(k + 1);
    const double w = (hi - alpha) / (hi - lo);
    const double q = w * knots.value(k) + (1.0 - w) * knots.value(k + 1);
    return std::clamp(q, knots.value(k), knots.value(k + 1));
}

// ---------------------------------------------------------------------------
// SplineSegment

SplineSegment::SplineSegment(std::vector<double> positions, std::vector<double> values)
    : positions_(std::move(positions)), values_(std::move(values)) {
    if (positions_.size() < 2 || positions_.size() != values_.size()) {
        throw std::invalid_argument("SplineSegment: need S+1 >= 2 matching positions and values");
    }
    require_strictly_increasing(positions_, "SplineSegment positions");
    require_non_decreasing(values_, "SplineSegment values");
}

SplineSegment SplineSegment::linear(double lo_level, double hi_level, double lo_value, double hi_value) {
    return SplineSegment({lo_level, hi_level}, {lo_value, hi_value});
}

std::size_t SplineSegment::piece_of(double alpha) const {
    auto it = std::upper_bound(positions_.begin(), positions_.end(), alpha);
    auto s = static_cast<std::size_t>(it - positions_.begin());
    s = std::clamp<std::size_t>(s, 1, positions_.size() - 1);
    return s - 1;
}

double SplineSegment::eval(double alpha) const {
    if (alpha < positions_.front() || alpha > positions_.back()) {
        throw DomainError("SplineSegment::eval: level outside the segment");
    }
    const std::size_t s = piece_of(alpha);
    const double t = (alpha - positions_[s]) / (positions_[s + 1] - positions_[s]);
    const double q = values_[s] + t * (values_[s + 1] - values_[s]);
    return std::clamp(q, values_[s], values_[s + 1]);
}

double SplineSegment::inverse(double z) const {
    if (z <= values_.front()) {
        return positions_.front();
    }
    if (z > values_.back()) {
        return positions_.back();
    }
    // s0 = max{s : p_s < z}; p_{s0} < z <= p_{s0+1} so the piece is non-flat.
    auto it = std::lower_bound(values_.begin(), values_.end(), z);
    const auto s = static_cast<std::size_t>(it - values_.begin()) - 1;
    const double frac = (z - values_[s]) / (values_[s + 1] - values_[s]);
    const double alpha = positions_[s] + frac * (positions_[s + 1] - positions_[s]);
    return std::clamp(alpha, positions_[s], positions_[s + 1]);
}

SplineSegment SplineSegment::affine(double scale, double shift) const {
    std::vector<double> v(values_.size());
    std::transform(values_.begin(), values_.end(), v.begin(), [&](double p) { return scale * p + shift; });
    return SplineSegment(positions_, std::move(v));
}

std::vector<double> sqf_from_isqf(const SplineSegment& segment) {
    const auto d = segment.positions();
    const auto p = segment.values();
    std::vector<double> c(segment.pieces());
    double previous_slope = 0.0;
    for (std::size_t s = 0; s < c.size(); ++s) {
        const double slope = (p[s + 1] - p[s]) / (d[s + 1] - d[s]);
        c[s] = slope - previous_slope;
        previous_slope = slope;
    }
    return c;
}

double eval_sqf(const SplineSegment& segment, std::span<const double> coefficients, double alpha) {
    const auto d = segment.positions();
    if (coefficients.size() != segment.pieces()) {
        throw std::invalid_argument("eval_sqf: coefficient count must equal the piece count");
    }
    double q = segment.lo_value();
    for (std::size_t s = 0; s < coefficients.size(); ++s) {
        q += coefficients[s] * std::max(alpha - d[s], 0.0);
    }
    return q;
}

// ---------------------------------------------------------------------------
// ExponentialTail

ExponentialTail::ExponentialTail(Side side, double beta, double anchor_level, double anchor_value)
    : side_(side), beta_(beta), anchor_level_(anchor_level), anchor_value_(anchor_value) {
    if (!(beta_ > 0.0) || !std::isfinite(beta_)) {
        throw DomainError("ExponentialTail: rate must be finite and positive");
    }
    require_open_unit(anchor_level_, "ExponentialTail anchor");
    if (!std::isfinite(anchor_value_)) {
        throw DomainError("ExponentialTail: anchor value must be finite");
    }
}

double ExponentialTail::a() const noexcept {
    return side_ == Side::Left ? 1.0 / beta_ : -1.0 / beta_;
}

double ExponentialTail::b() const noexcept {
    return side_ == Side::Left ? anchor_value_ - a() * std::log(anchor_level_)
                               : anchor_value_ - a() * std::log1p(-anchor_level_);
}

bool ExponentialTail::in_region(double alpha) const noexcept {
    return side_ == Side::Left ? alpha <= anchor_level_ : alpha >= anchor_level_;
}

double ExponentialTail::eval(double alpha) const {
    require_open_unit(alpha, "ExponentialTail::eval");
    // Anchor-relative form: exact at the anchor.
    if (side_ == Side::Left) {
        const double q = anchor_value_ + std::log(alpha / anchor_level_) / beta_;
        return alpha <= anchor_level_ ? std::min(q, anchor_value_) : q;
    }
    const double q = anchor_value_ - std::log((1.0 - alpha) / (1.0 - anchor_level_)) / beta_;
    return alpha >= anchor_level_ ? std::max(q, anchor_value_) : q;
}

double ExponentialTail::inverse(double z) const {
    if (side_ == Side::Left) {
        if (z >= anchor_value_) {
            return anchor_level_;
        }
        return anchor_level_ * std::exp(beta_ * (z - anchor_value_));
    }
    if (z <= anchor_value_) {
        return anchor_level_;
    }
    return 1.0 - (1.0 - anchor_level_) * std::exp(-beta_ * (z - anchor_value_));
}

double ExponentialTail::eval_complement(double c) const {
    if (side_ != Side::Right) {
        throw std::logic_error("eval_complement is defined for right tails");
    }
    if (!(c > 0.0 && c < 1.0)) {
        throw DomainError("ExponentialTail::eval_complement: complement outside (0,1)");
    }
    const double q = anchor_value_ - std::log(c / (1.0 - anchor_level_)) / beta_;
    return c <= 1.0 - anchor_level_ ? std::max(q, anchor_value_) : q;
}

double ExponentialTail::inverse_complement(double z) const {
    if (side_ != Side::Right) {
        throw std::logic_error("inverse_complement is defined for right tails");
    }
    if (z <= anchor_value_) {
        return 1.0 - anchor_level_;
    }
    return (1.0 - anchor_level_) * std::exp(-beta_ * (z - anchor_value_));
}

ExponentialTail ExponentialTail::affine(double scale, double shift) const {
    return ExponentialTail(side_, beta_ / scale, anchor_level_, scale * anchor_value_ + shift);
}

std::pair<double, double> iqf_rate_numerators(const QuantileKnots& knots, double eps) {
    const std::size_t K = knots.size();
    const double a1 = knots.level(0);
    const double a2 = knots.level(1);
    const double b1 = 1.0 - knots.level(K - 2);
    const double b2 = 1.0 - knots.level(K - 1);
    return {std::log((a2 + eps) / (a1 + eps) + eps), std::log((b1 + eps) / (b2 + eps) + eps)};
}

std::pair<ExponentialTail, ExponentialTail> fit_iqf_exponential_tails(const QuantileKnots& knots,
                                                                       double eps) {
    const std::size_t K = knots.size();
    const auto [num_left, num_right] = iqf_rate_numerators(knots, eps);
    const double beta_left = num_left / (knots.value(1) - knots.value(0) + eps);
    const double beta_right = num_right / (knots.value(K - 1) - knots.value(K - 2) + eps);
    return {ExponentialTail(Side::Left, beta_left, knots.level(0), knots.value(0)),
            ExponentialTail(Side::Right, beta_right, knots.level(K - 1), knots.value(K - 1))};
}

// ---------------------------------------------------------------------------
// GpdTail

GpdTail::GpdTail(Side side, double eta, double mu, double anchor_level, double anchor_value)
    : side_(side), eta_(eta), mu_(mu), anchor_level_(anchor_level), anchor_value_(anchor_value) {
    if (!(eta_ > 0.0 && eta_ <= kMaxGpdShape)) {
        throw DomainError("GpdTail: shape must lie in (0, 0.499]");
    }
    if (!(mu_ > 0.0) || !std::isfinite(mu_)) {
        throw DomainError("GpdTail: scale must be finite and positive");
    }
    require_open_unit(anchor_level_, "GpdTail anchor");
    if (!std::isfinite(anchor_value_)) {
        throw DomainError("GpdTail: anchor value must be finite");
    }
}

bool GpdTail::in_region(double alpha) const noexcept {
    return side_ == Side::Left ? alpha <= anchor_level_ : alpha >= anchor_level_;
}

double GpdTail::eval(double alpha) const {
    require_open_unit(alpha, "GpdTail::eval");
    if (side_ == Side::Left) {
        const double x = alpha / anchor_level_;
        const double q = anchor_value_ - (mu_ / eta_) * std::expm1(-eta_ * std::log(x));
        return alpha <= anchor_level_ ? std::min(q, anchor_value_) : q;
    }
    const double y = (1.0 - alpha) / (1.0 - anchor_level_);
    const double q = anchor_value_ + (mu_ / eta_) * std::expm1(-eta_ * std::log(y));
    return alpha >= anchor_level_ ? std::max(q, anchor_value_) : q;
}

double GpdTail::inverse(double z) const {
    if (side_ == Side::Left) {
        if (z >= anchor_value_) {
            return anchor_level_;
        }
        const double psi = (z - anchor_value_) / mu_;
        return anchor_level_ * std::pow(1.0 - eta_ * psi, -1.0 / eta_);
    }
    if (z <= anchor_value_) {
        return anchor_level_;
    }
    const double psi = (z - anchor_value_) / mu_;
    return 1.0 - (1.0 - anchor_level_) * std::pow(1.0 + eta_ * psi, -1.0 / eta_);
}

double GpdTail::eval_complement(double c) const {
    if (side_ != Side::Right) {
        throw std::logic_error("eval_complement is defined for right tails");
    }
    if (!(c > 0.0 && c < 1.0)) {
        throw DomainError("GpdTail::eval_complement: complement outside (0,1)");
    }
    const double y = c / (1.0 - anchor_level_);
    const double q = anchor_value_ + (mu_ / eta_) * std::expm1(-eta_ * std::log(y));
    return c <= 1.0 - anchor_level_ ? std::max(q, anchor_value_) : q;
}

double GpdTail::inverse_complement(double z) const {
    if (side_ != Side::Right) {
        throw std::logic_error("inverse_complement is defined for right tails");
    }
    if (z <= anchor_value_) {
        return 1.0 - anchor_level_;
    }
    const double psi = (z - anchor_value_) / mu_;
    return (1.0 - anchor_level_) * std::pow(1.0 + eta_ * psi, -1.0 / eta_);
}

GpdTail GpdTail::affine(double scale, double shift) const {
    return GpdTail(side_, eta_, mu_ * scale, anchor_level_, scale * anchor_value_ + shift);
}

double tail_anchor_level(const Tail& tail) {
    return std::visit([](const auto& t) { return t.anchor_level(); }, tail);
}

double tail_anchor_value(const Tail& tail) {
    return std::visit([](const auto& t) { return t.anchor_value(); }, tail);
}

double eval_tail(const Tail& tail, double alpha) {
    return std::visit([alpha](const auto& t) { return t.eval(alpha); }, tail);
}

// ---------------------------------------------------------------------------
// IsqfCurve

namespace {

Side tail_side(const Tail& tail) {
    return std::visit([](const auto& t) { return t.side(); }, tail);
}

} // namespace

IsqfCurve::IsqfCurve(QuantileKnots knots, std::vector<SplineSegment> segments, Tail left, Tail right)
    : knots_(std::move(knots)), segments_(std::move(segments)), left_(std::move(left)), right_(std::move(right)) {
    const std::size_t K = knots_.size();
    if (segments_.size() != K - 1) {
        throw std::invalid_argument("IsqfCurve: need K-1 segments");
    }
    for (std::size_t k = 0; k + 1 < K; ++k) {
        const auto& seg = segments_[k];
        if (seg.lo_level() != knots_.level(k) || seg.hi_level() != knots_.level(k + 1) ||
            seg.lo_value() != knots_.value(k) || seg.hi_value() != knots_.value(k + 1)) {
            throw std::invalid_argument("IsqfCurve: segment " + std::to_string(k) +
                                        " does not match its knot endpoints");
        }
    }
    if (tail_side(left_) != Side::Left || tail_side(right_) != Side::Right) {
        throw std::invalid_argument("IsqfCurve: tails are on the wrong sides");
    }
    if (tail_anchor_level(left_) != knots_.level(0) || tail_anchor_value(left_) != knots_.value(0) ||
        tail_anchor_level(right_) != knots_.level(K - 1) || tail_anchor_value(right_) != knots_.value(K - 1)) {
        throw std::invalid_argument("IsqfCurve: tails must be anchored at the extremal knots");
    }
}

IsqfCurve IsqfCurve::iqf(const QuantileKnots& knots, double eps) {
    std::vector<SplineSegment> segments;
    segments.reserve(knots.size() - 1);
    for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
        segments.push_back(
            SplineSegment::linear(knots.level(k), knots.level(k + 1), knots.value(k), knots.value(k + 1)));
    }
    auto [left, right] = fit_iqf_exponential_tails(knots, eps);
    return IsqfCurve(knots, std::move(segments), left, right);
}

double IsqfCurve::quantile(double alpha) const {
    require_open_unit(alpha, "IsqfCurve::quantile");
    const auto levels = knots_.levels();
    if (alpha < levels.front()) {
        return std::min(eval_tail(left_, alpha), knots_.value(0));
    }
    if (alpha > levels.back()) {
        return std::max(eval_tail(right_, alpha), knots_.value(knots_.size() - 1));
    }
    return segments_[knots_.interval_of(alpha)].eval(alpha);
}

double IsqfCurve::cdf(double z) const {
    const auto values = knots_.values();
    if (z < values.front()) {
        return std::visit([z](const auto& t) { return t.inverse(z); }, left_);
    }
    if (z > values.back()) {
        return std::visit([z](const auto& t) { return t.inverse(z); }, right_);
    }
    // First knot with value >= z; flat runs resolve to their leftmost level.
    auto it = std::lower_bound(values.begin(), values.end(), z);
    const auto j = static_cast<std::size_t>(it - values.begin());
    if (j == 0) {
        return knots_.level(0);
    }
    return segments_[j - 1].inverse(z);
}

double IsqfCurve::upper_tail_quantile(double c) const {
    if (!(c < 1.0 - knots_.level(knots_.size() - 1))) {
        return quantile(1.0 - c);
    }
    const double upper = knots_.value(knots_.size() - 1);
    return std::max(upper, std::visit([c](const auto& t) { return t.eval_complement(c); }, right_));
}

IsqfCurve IsqfCurve::affine(double scale, double shift) const {
    if (!(scale > 0.0) || !std::isfinite(scale) || !std::isfinite(shift)) {
        throw std::invalid_argument("IsqfCurve::affine: scale must be positive and finite");
    }
    std::vector<double> values(knots_.size());
    for (std::size_t k = 0; k < values.size(); ++k) {
        values[k] = scale * knots_.value(k) + shift;
    }
    QuantileKnots knots({knots_.levels().begin(), knots_.levels().end()}, std::move(values));
    std::vector<SplineSegment> segments;
    segments.reserve(segments_.size());
    for (std::size_t k = 0; k < segments_.size(); ++k) {
        auto seg = segments_[k].affine(scale, shift);
        // Pin endpoints to the knot values so the curve invariants hold bit-exactly.
        std::vector<double> p(seg.values().begin(), seg.values().end());
        p.front() = knots.value(k);
        p.back() = knots.value(k + 1);
        for (std::size_t s = 1; s < p.size(); ++s) {
            p[s] = std::clamp(p[s], p.front(), p.back());
        }
        segments.emplace_back(std::vector<double>(seg.positions().begin(), seg.positions().end()), std::move(p));
    }
    auto shift_tail = [&](const Tail& t, double anchor) -> Tail {
        return std::visit(
            [&](const auto& tail) -> Tail {
                auto moved = tail.affine(scale, shift);
                using T = std::decay_t<decltype(tail)>;
                if constexpr (std::is_same_v<T, ExponentialTail>) {
                    return ExponentialTail(moved.side(), moved.beta(), moved.anchor_level(), anchor);
                } else {
                    return GpdTail(moved.side(), moved.eta(), moved.mu(), moved.anchor_level(), anchor);
                }
            },
            t);
    };
    Tail left = shift_tail(left_, knots.value(0));
    Tail right = shift_tail(right_, knots.value(knots.size() - 1));
    return IsqfCurve(std::move(knots), std::move(segments), std::move(left), std::move(right));
}

double uniform_open01(std::mt19937_64& rng) {
    // (k + 0.5) / 2^53 for k in [0, 2^53): never 0 or 1.
    const std::uint64_t k = rng() >> 11;
    return (static_cast<double>(k) + 0.5) * 0x1.0p-53;
}

std::vector<double> sample(const IsqfCurve& curve, std::uint64_t seed, std::size_t n) {
    std::mt19937_64 rng(seed);
    std::vector<double> out(n);
    for (auto& x : out) {
        x = curve.quantile(uniform_open01(rng));
    }
    return out;
}

} // namespace isqf
