#include <catch_amalgamated.hpp>

#include "isqf/errors.hpp"
#include "isqf/quantile_function.hpp"
#include "isqf/random_curves.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace isqf;
using Catch::Approx;

namespace {

QuantileKnots example_knots() { return QuantileKnots({0.1, 0.5, 0.9}, {1.0, 2.0, 4.0}); }

// Bisection on a monotone CDF; independent of the closed-form quantile.
template <class Cdf>
double invert_cdf(const Cdf& cdf, double alpha, double lo, double hi) {
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (cdf(mid) < alpha ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace

TEST_CASE("QuantileKnots validates its invariants", "[qfunc]") {
    CHECK_THROWS_AS(QuantileKnots({0.5}, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(QuantileKnots({0.1, 0.1}, {1.0, 2.0}), std::invalid_argument);
    CHECK_THROWS_AS(QuantileKnots({0.0, 0.5}, {1.0, 2.0}), DomainError);
    CHECK_THROWS_AS(QuantileKnots({0.5, 1.0}, {1.0, 2.0}), DomainError);
    CHECK_THROWS_AS(QuantileKnots({0.1, 0.5}, {2.0, 1.0}), std::invalid_argument);
    CHECK_NOTHROW(QuantileKnots({0.1, 0.5}, {1.0, 1.0}));
}

TEST_CASE("interpolate_linear", "[qfunc]") {
    const auto knots = example_knots();
    CHECK(interpolate_linear(knots, 0.5) == 2.0);
    CHECK(interpolate_linear(knots, 0.3) == Approx(1.5).margin(1e-15));
    CHECK(interpolate_linear(QuantileKnots({0.1, 0.5, 0.9}, {1, 1, 1}), 0.7) == 1.0);
    CHECK(interpolate_linear(knots, 0.9) == 4.0);
    CHECK_THROWS_AS(interpolate_linear(knots, 0.05), TailRegionError);
    CHECK_THROWS_AS(interpolate_linear(knots, 0.95), TailRegionError);
}

TEST_CASE("IQF exponential tail rates", "[qfunc][tails]") {
    const QuantileKnots two({0.1, 0.5}, {1.0, 2.0});
    auto [left, right] = fit_iqf_exponential_tails(two, 0.0);
    CHECK(left.beta() == Approx(std::log(5.0)).epsilon(1e-14));
    CHECK(left.beta() == Approx(1.60944).margin(1e-5));
    CHECK(left.eval(0.1) == 1.0);
    // K = 2 uses the same knot pair on both sides.
    CHECK(right.beta() == Approx(std::log(0.9 / 0.5) / 1.0).epsilon(1e-14));

    auto [l3, r3] = fit_iqf_exponential_tails(example_knots(), 0.0);
    CHECK(r3.beta() == Approx(std::log(5.0) / 2.0).epsilon(1e-14));
    CHECK(r3.beta() == Approx(0.80472).margin(1e-5));
    CHECK(l3.anchor_level() == 0.1);
    CHECK(r3.anchor_level() == 0.9);
}

TEST_CASE("IQF tail rates stay finite with flat knots", "[qfunc][tails]") {
    const QuantileKnots flat({0.1, 0.5, 0.9}, {3.0, 3.0, 3.0});
    auto [left, right] = fit_iqf_exponential_tails(flat);
    CHECK(std::isfinite(left.beta()));
    CHECK(left.beta() > 0.0);
    CHECK(std::isfinite(right.beta()));
    CHECK(left.eval(0.01) <= 3.0);
    CHECK(left.eval(0.01) > 3.0 - 1e-12);
}

TEST_CASE("exponential tail evaluation", "[qfunc][tails]") {
    auto [left, right] = fit_iqf_exponential_tails(example_knots(), 0.0);
    // Direct evaluation of the extrapolation formulas through the second knot.
    const double expected_left = std::log(0.01 / 0.5) / std::log(5.0) + 2.0;
    const double expected_right = 2.0 / std::log(5.0) * std::log(0.5 / 0.01) + 2.0;
    CHECK(left.eval(0.01) == Approx(expected_left).epsilon(1e-13));
    CHECK(left.eval(0.01) == Approx(-0.43068).margin(1e-5));
    CHECK(right.eval(0.99) == Approx(expected_right).epsilon(1e-13));
    CHECK(right.eval(0.99) == Approx(6.86135).margin(1e-5));
    CHECK(left.eval(0.1) == 1.0);
    CHECK(right.eval(0.9) == 4.0);
    // a*log(alpha) + b form agrees with the anchor-relative evaluation.
    CHECK(left.a() * std::log(0.03) + left.b() == Approx(left.eval(0.03)).epsilon(1e-13));
    CHECK(right.a() * std::log(1 - 0.97) + right.b() == Approx(right.eval(0.97)).epsilon(1e-13));
    CHECK(right.eval_complement(0.03) == Approx(right.eval(0.97)).epsilon(1e-13));
    CHECK_THROWS_AS(left.eval(0.0), DomainError);
    CHECK_THROWS_AS(right.eval(1.0), DomainError);
    CHECK_THROWS_AS(ExponentialTail(Side::Left, 0.0, 0.1, 1.0), DomainError);
}

TEST_CASE("IQF tails reproduce both outer knot pairs", "[qfunc][tails]") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t K = 2 + trial % 6;
        auto levels = fuzz::random_levels(rng, K);
        auto values = fuzz::random_increasing_values(rng, K, 0.0, 2.0, true);
        QuantileKnots knots(levels, values);
        auto [left, right] = fit_iqf_exponential_tails(knots, 0.0);
        CHECK(left.eval(levels[0]) == Approx(values[0]).margin(1e-9));
        CHECK(left.eval(levels[1]) == Approx(values[1]).margin(1e-9));
        CHECK(right.eval(levels[K - 2]) == Approx(values[K - 2]).margin(1e-9));
        CHECK(right.eval(levels[K - 1]) == Approx(values[K - 1]).margin(1e-9));
    }
}

TEST_CASE("GPD tail evaluation", "[qfunc][tails]") {
    const GpdTail right(Side::Right, 0.25, 1.0, 0.9, 4.0);
    CHECK(right.eval(0.9) == 4.0);
    // Invert the spliced CDF 1 - alpha = (1 - 0.9) (1 + eta psi)^(-1/eta) numerically.
    auto cdf = [](double q) { return 1.0 - 0.1 * std::pow(1.0 + 0.25 * (q - 4.0), -4.0); };
    const double oracle = invert_cdf(cdf, 0.99, 4.0, 100.0);
    CHECK(right.eval(0.99) == Approx(oracle).epsilon(1e-12));
    CHECK(right.eval(0.95) < right.eval(0.99));
    CHECK(right.inverse(right.eval(0.99)) == Approx(0.99).epsilon(1e-13));

    const GpdTail left(Side::Left, 0.3, 0.5, 0.1, -1.0);
    CHECK(left.eval(0.1) == -1.0);
    auto left_cdf = [](double q) { return 0.1 * std::pow(1.0 - 0.3 * (q + 1.0) / 0.5, -1.0 / 0.3); };
    CHECK(left.eval(0.003) == Approx(invert_cdf(left_cdf, 0.003, -100.0, -1.0)).epsilon(1e-12));
    CHECK(left.eval(0.01) < left.eval(0.05));

    CHECK_THROWS_AS(GpdTail(Side::Right, 0.5, 1.0, 0.9, 0.0), DomainError);
    CHECK_THROWS_AS(GpdTail(Side::Right, 0.0, 1.0, 0.9, 0.0), DomainError);
    CHECK_THROWS_AS(GpdTail(Side::Right, 0.2, -1.0, 0.9, 0.0), DomainError);
    CHECK_THROWS_AS(right.eval(1.0), DomainError);
}

TEST_CASE("spline segment evaluation", "[qfunc][spline]") {
    const SplineSegment seg({0.1, 0.3, 0.5}, {1.0, 1.8, 2.0});
    CHECK(seg.eval(0.2) == Approx(1.4).epsilon(1e-14));
    CHECK(seg.eval(0.3) == 1.8);
    CHECK(seg.eval(0.1) == 1.0);
    CHECK(seg.eval(0.5) == 2.0);
    CHECK_THROWS_AS(seg.eval(0.05), DomainError);
    CHECK_THROWS_AS(SplineSegment({0.1, 0.1}, {1.0, 2.0}), std::invalid_argument);

    // One piece is exactly linear interpolation.
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.2, 0.7);
    const SplineSegment one = SplineSegment::linear(0.2, 0.7, -1.0, 3.0);
    const QuantileKnots knots({0.2, 0.7}, {-1.0, 3.0});
    for (int i = 0; i < 100; ++i) {
        const double a = u(rng);
        CHECK(one.eval(a) == Approx(interpolate_linear(knots, a)).margin(1e-14));
    }

    // Interior spline knots are hit exactly.
    for (int trial = 0; trial < 50; ++trial) {
        auto s = fuzz::random_segment(rng, 0.2, 0.6, 0.0, 5.0, 5, false);
        for (std::size_t j = 0; j < s.positions().size(); ++j) {
            CHECK(s.eval(s.positions()[j]) == s.values()[j]);
        }
    }
}

TEST_CASE("SQF coefficients reproduce the spline", "[qfunc][sqf]") {
    const SplineSegment flat({0.1, 0.2, 0.4, 0.5}, {2.0, 2.0, 2.0, 2.0});
    for (double c : sqf_from_isqf(flat)) CHECK(c == 0.0);

    const SplineSegment one = SplineSegment::linear(0.1, 0.5, 1.0, 3.0);
    const auto c1 = sqf_from_isqf(one);
    REQUIRE(c1.size() == 1);
    CHECK(c1[0] == Approx(5.0).epsilon(1e-14));

    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        auto seg = fuzz::random_segment(rng, 0.1, 0.8, -2.0, 4.0, 6, false);
        const auto c = sqf_from_isqf(seg);
        std::uniform_real_distribution<double> u(0.1, 0.8);
        for (int i = 0; i < 200; ++i) {
            const double a = u(rng);
            CHECK(std::abs(eval_sqf(seg, c, a) - seg.eval(a)) <= 1e-12);
        }
    }
}

TEST_CASE("curve evaluation dispatch", "[qfunc][curve]") {
    const auto curve = IsqfCurve::iqf(example_knots());
    CHECK(curve.quantile(0.3) == Approx(1.5).margin(1e-15));
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(curve.quantile(curve.knots().level(k)) == curve.knots().value(k));
    }
    CHECK_THROWS_AS(curve.quantile(0.0), DomainError);
    CHECK_THROWS_AS(curve.quantile(1.0), DomainError);
    CHECK_THROWS_AS(curve.quantile(-0.5), DomainError);
    CHECK(curve.quantile(0.01) < 1.0);
    CHECK(curve.quantile(0.999) > 4.0);
}

TEST_CASE("curve construction rejects mismatched pieces", "[qfunc][curve]") {
    const auto knots = example_knots();
    auto [l, r] = fit_iqf_exponential_tails(knots);
    std::vector<SplineSegment> bad{SplineSegment::linear(0.1, 0.5, 1.0, 2.5), SplineSegment::linear(0.5, 0.9, 2.0, 4.0)};
    CHECK_THROWS_AS(IsqfCurve(knots, bad, l, r), std::invalid_argument);
    std::vector<SplineSegment> good{SplineSegment::linear(0.1, 0.5, 1.0, 2.0), SplineSegment::linear(0.5, 0.9, 2.0, 4.0)};
    CHECK_THROWS_AS(IsqfCurve(knots, good, r, l), std::invalid_argument);
    CHECK_THROWS_AS(IsqfCurve(knots, good, ExponentialTail(Side::Left, 1.0, 0.2, 1.0), r), std::invalid_argument);
}

TEST_CASE("property: curves are monotone, continuous and hit their knots", "[qfunc][property]") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 300; ++trial) {
        const auto curve = fuzz::random_curve(rng);
        const auto& knots = curve.knots();

        double previous = -std::numeric_limits<double>::infinity();
        for (int i = 1; i <= 1000; ++i) {
            const double a = i / 1001.0;
            const double q = curve.quantile(a);
            REQUIRE(q >= previous);
            previous = q;
        }
        for (std::size_t k = 0; k < knots.size(); ++k) {
            CHECK(std::abs(curve.quantile(knots.level(k)) - knots.value(k)) <= 1e-12);
        }
        const double scale = 1.0 + knots.values().back() - knots.values().front();
        // A jump would leave the gap constant as the offset shrinks; here it must shrink linearly.
        auto near = [&](double at, double value) {
            for (double side : {-1.0, 1.0}) {
                const double wide = std::abs(curve.quantile(at + side * 1e-8) - value);
                const double tight = std::abs(curve.quantile(at + side * 1e-9) - value);
                CHECK(tight <= 0.11 * wide + 1e-12 * scale);
            }
        };
        for (const auto& seg : curve.segments()) {
            for (std::size_t s = 0; s < seg.positions().size(); ++s) {
                near(seg.positions()[s], seg.values()[s]);
            }
        }
    }
}

TEST_CASE("cdf inverts the quantile function", "[qfunc][cdf]") {
    const auto curve = IsqfCurve::iqf(example_knots());
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(curve.cdf(curve.knots().value(k)) == Approx(curve.knots().level(k)).epsilon(1e-14));
    }
    const auto& left = std::get<ExponentialTail>(curve.left_tail());
    const double z = -2.0;
    CHECK(curve.cdf(z) == Approx(std::exp((z - left.b()) / left.a())).epsilon(1e-12));

    std::mt19937_64 rng(77);
    fuzz::CurveGenOptions opt;
    opt.strictly_increasing = true;
    for (int trial = 0; trial < 50; ++trial) {
        const auto c = fuzz::random_curve(rng, opt);
        std::uniform_real_distribution<double> u(1e-4, 1 - 1e-4);
        for (int i = 0; i < 100; ++i) {
            const double a = u(rng);
            CHECK(std::abs(c.cdf(c.quantile(a)) - a) <= 1e-10);
        }
    }
}

TEST_CASE("cdf resolves flat stretches to the leftmost level", "[qfunc][cdf]") {
    const QuantileKnots knots({0.1, 0.3, 0.6, 0.9}, {0.0, 1.0, 1.0, 2.0});
    const auto curve = IsqfCurve::iqf(knots);
    CHECK(curve.cdf(1.0) == Approx(0.3).epsilon(1e-15));
    CHECK(curve.cdf(0.5) == Approx(0.2).epsilon(1e-14));
    CHECK(curve.cdf(-1e6) >= 0.0);
    CHECK(curve.cdf(1e6) <= 1.0);
}

TEST_CASE("sampling", "[qfunc][sample]") {
    const auto curve = IsqfCurve::iqf(QuantileKnots({0.1, 0.3, 0.5, 0.7, 0.9}, {-2.0, -0.5, 0.0, 1.0, 3.0}));
    CHECK(sample(curve, 42, 1000) == sample(curve, 42, 1000));
    CHECK(sample(curve, 42, 10) != sample(curve, 43, 10));

    auto draws = sample(curve, 7, 100000);
    std::nth_element(draws.begin(), draws.begin() + 50000, draws.end());
    const double median = draws[50000];
    CHECK(std::abs(median - curve.quantile(0.5)) <= 0.02 * (3.0 - -2.0));

    // Flat knots and near-degenerate tails concentrate all mass.
    const auto point = IsqfCurve::iqf(QuantileKnots({0.1, 0.5, 0.9}, {1.5, 1.5, 1.5}));
    std::mt19937_64 rng(9);
    double lo = 1e300, hi = -1e300;
    for (int i = 0; i < 10000; ++i) {
        const double a = std::clamp(uniform_open01(rng), 0.01, 0.99);
        const double x = point.quantile(a);
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    CHECK(hi - lo <= 1e-3);
}

TEST_CASE("affine maps the curve", "[qfunc][curve]") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const auto curve = fuzz::random_curve(rng);
        const auto moved = curve.affine(2.5, -1.0);
        for (double a : {0.001, 0.05, 0.3, 0.5, 0.77, 0.95, 0.9999}) {
            CHECK(moved.quantile(a) == Approx(2.5 * curve.quantile(a) - 1.0).margin(1e-9));
        }
    }
    CHECK_THROWS_AS(IsqfCurve::iqf(example_knots()).affine(0.0, 1.0), std::invalid_argument);
}
