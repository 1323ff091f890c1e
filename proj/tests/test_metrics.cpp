#include <catch_amalgamated.hpp>

#include "isqf/crps.hpp"
#include "isqf/errors.hpp"
#include "isqf/metrics.hpp"
#include "isqf/monotone_head.hpp"

#include <cmath>
#include <random>

using namespace isqf;
using Catch::Approx;

namespace {

ForecastTable single_level(double alpha, std::vector<double> q) {
    ForecastTable t({alpha}, 1, q.size());
    for (std::size_t s = 0; s < q.size(); ++s) t.at(0, s, 0) = q[s];
    return t;
}

ForecastTable interval(double zeta, std::vector<double> lo, std::vector<double> hi) {
    ForecastTable t({zeta / 2.0, 1.0 - zeta / 2.0}, 1, lo.size());
    for (std::size_t s = 0; s < lo.size(); ++s) {
        t.at(0, s, 0) = lo[s];
        t.at(0, s, 1) = hi[s];
    }
    return t;
}

} // namespace

TEST_CASE("wQL golden value", "[metrics]") {
    const auto t = single_level(0.9, {12.0, 18.0});
    const std::vector<double> z{10.0, 20.0};
    CHECK(std::abs(wql(t, z, 0.9) - 2.0 * (0.2 + 1.8) / 30.0) <= 1e-12);
}

TEST_CASE("wQL of perfect predictions is zero", "[metrics]") {
    const auto t = single_level(0.3, {1.0, -2.0, 5.0});
    CHECK(wql(t, std::vector<double>{1.0, -2.0, 5.0}, 0.3) == 0.0);
}

TEST_CASE("wQL is invariant to positive rescaling", "[metrics][property]") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 2.0);
    std::uniform_real_distribution<double> scale(0.01, 100.0);
    for (int trial = 0; trial < 50; ++trial) {
        ForecastTable a({0.2, 0.7}, 3, 4), b({0.2, 0.7}, 3, 4);
        std::vector<double> z(12), zc(12);
        const double c = scale(rng);
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t s = 0; s < 4; ++s) {
                z[i * 4 + s] = n(rng);
                zc[i * 4 + s] = c * z[i * 4 + s];
                for (std::size_t k = 0; k < 2; ++k) {
                    a.at(i, s, k) = n(rng);
                    b.at(i, s, k) = c * a.at(i, s, k);
                }
            }
        }
        CHECK(wql(b, zc, 0.7) == Approx(wql(a, z, 0.7)).epsilon(1e-12));
        CHECK(wql(b, zc, 0.2) == Approx(wql(a, z, 0.2)).epsilon(1e-12));
    }
}

TEST_CASE("wQL with a zero normalizer is undefined", "[metrics]") {
    const auto t = single_level(0.5, {1.0, 2.0});
    CHECK_THROWS_AS(wql(t, std::vector<double>{0.0, 0.0}, 0.5), UndefinedMetricError);
}

TEST_CASE("wQL requires predictions at the level and matching actuals", "[metrics]") {
    const auto t = single_level(0.5, {1.0, 2.0});
    CHECK_THROWS_AS(wql(t, std::vector<double>{1.0, 2.0}, 0.9), std::invalid_argument);
    CHECK_THROWS_AS(wql(t, std::vector<double>{1.0}, 0.5), std::invalid_argument);
}

TEST_CASE("mean wQL averages the per-level values", "[metrics]") {
    ForecastTable t({0.1, 0.9}, 1, 1);
    const std::vector<double> z{10.0};
    // rho_0.1(10 - 5) = 0.5 and rho_0.9(10 - 11.666..) = 0.1 * 1.666.. give 0.1 and 0.0333..
    t.at(0, 0, 0) = 5.0;
    t.at(0, 0, 1) = 10.0 + 5.0 / 3.0;
    const double w1 = wql(t, z, 0.1), w9 = wql(t, z, 0.9);
    CHECK(w1 == Approx(0.1).epsilon(1e-12));
    CHECK(mean_wql(t, z) == Approx((w1 + w9) / 2.0).epsilon(1e-15));
    const std::vector<double> one{0.1};
    CHECK(mean_wql(t, z, one) == w1);

    ForecastTable u({0.5, 0.6}, 1, 1);
    u.at(0, 0, 0) = 9.0;   // wql 0.1
    u.at(0, 0, 1) = 7.5;   // 2 * 0.6 * 2.5 / 10 = 0.3
    CHECK(mean_wql(u, z) == Approx(0.2).epsilon(1e-12));
}

TEST_CASE("dense-level mean wQL approximates the CRPS of a curve", "[metrics]") {
    std::vector<double> levels;
    for (int k = 1; k <= 99; ++k) levels.push_back(k / 100.0);
    const QuantileKnots knots({0.1, 0.3, 0.5, 0.8, 0.95}, {-1.2, -0.5, 0.1, 1.0, 2.1});
    const auto curve = IsqfCurve::iqf(knots);
    for (double z : {-2.5, -0.7, 0.4, 1.3, 3.0}) {
        ForecastTable t(levels, 1, 1);
        for (std::size_t k = 0; k < levels.size(); ++k) t.at(0, 0, k) = curve.quantile(levels[k]);
        const double approx = mean_wql(t, std::vector<double>{z});
        const double exact = crps(curve, z).total / std::abs(z);
        CHECK(std::abs(approx - exact) <= 0.02 * exact);
    }
}

TEST_CASE("crossing percent golden value and ties", "[metrics]") {
    ForecastTable t({0.1, 0.5, 0.9}, 1, 2);
    const double rows[2][3] = {{1.0, 2.0, 3.0}, {1.0, 0.5, 3.0}};
    for (std::size_t s = 0; s < 2; ++s) {
        for (std::size_t k = 0; k < 3; ++k) t.at(0, s, k) = rows[s][k];
    }
    CHECK(std::abs(crossing_percent(t) - 25.0) <= 1e-12);

    ForecastTable ties({0.1, 0.5, 0.9}, 1, 1);
    for (std::size_t k = 0; k < 3; ++k) ties.at(0, 0, k) = 2.0;
    CHECK(crossing_percent(ties) == 0.0);

    ForecastTable all({0.1, 0.5, 0.9}, 2, 1);
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t k = 0; k < 3; ++k) all.at(i, 0, k) = 3.0 - static_cast<double>(k);
    }
    CHECK(crossing_percent(all) == 100.0);
}

TEST_CASE("crossing percent counts only adjacent pairs", "[metrics]") {
    // 0.1 > 0.9 as well, but that pair is not adjacent.
    ForecastTable t({0.1, 0.5, 0.9}, 1, 1);
    t.at(0, 0, 0) = 2.0;
    t.at(0, 0, 1) = 1.0;
    t.at(0, 0, 2) = 1.5;
    CHECK(crossing_percent(t) == 50.0);
}

TEST_CASE("property: head outputs never cross", "[metrics][property]") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> levels;
    for (int k = 1; k <= 19; ++k) levels.push_back(k / 20.0);
    for (int trial = 0; trial < 40; ++trial) {
        HeadConfig c;
        c.input_dim = 3;
        c.levels = {0.1, 0.4, 0.6, 0.9};
        c.mode = trial % 2 ? HeadMode::Isqf : HeadMode::Iqf;
        c.tail = trial % 3 ? TailKind::Exponential : TailKind::Gpd;
        c.hidden = 4;
        auto head = MonotoneHead::initialized(c, static_cast<std::uint64_t>(trial));
        for (std::size_t i = 0; i < head.params().total_size(); ++i) head.params().flat(i) = 2.0 * n(rng);
        ForecastTable t(levels, 5, 3);
        for (std::size_t i = 0; i < 5; ++i) {
            for (std::size_t s = 0; s < 3; ++s) {
                const auto curve = head.decode(std::vector<double>{n(rng), n(rng), n(rng)});
                for (std::size_t k = 0; k < levels.size(); ++k) t.at(i, s, k) = curve.quantile(levels[k]);
            }
        }
        CHECK(crossing_percent(t) == 0.0);
    }
}

TEST_CASE("seasonal error golden value", "[metrics]") {
    const std::vector<std::vector<double>> h{{1.0, 3.0, 2.0}};
    CHECK(std::abs(seasonal_error(h, 1) - 1.5) <= 1e-12);
    CHECK_THROWS_AS(seasonal_error(h, 3), std::invalid_argument);
    const std::vector<std::vector<double>> flat{{2.0, 2.0, 2.0}};
    CHECK_THROWS_AS(seasonal_error(flat, 1), UndefinedMetricError);
}

TEST_CASE("MSIS without coverage misses is the scaled mean width", "[metrics]") {
    const std::vector<std::vector<double>> h{{1.0, 3.0, 2.0}};
    const auto t = interval(0.1, {0.0, 1.0}, {2.0, 5.0});
    const double m = msis(t, std::vector<double>{1.0, 4.0}, h, 1, 0.1);
    CHECK(m == Approx((2.0 + 4.0) / 2.0 / 1.5).epsilon(1e-14));
}

TEST_CASE("MSIS penalty activates exactly when an actual leaves the interval", "[metrics]") {
    const std::vector<std::vector<double>> h{{1.0, 3.0, 2.0}};
    const auto t = interval(0.2, {0.0}, {1.0});
    const double width = 1.0 / 1.5;
    CHECK(msis(t, std::vector<double>{0.0}, h, 1, 0.2) == Approx(width).epsilon(1e-14));
    CHECK(msis(t, std::vector<double>{1.0}, h, 1, 0.2) == Approx(width).epsilon(1e-14));
    CHECK(msis(t, std::vector<double>{-0.25}, h, 1, 0.2) == Approx((1.0 + 10.0 * 0.25) / 1.5).epsilon(1e-14));
    CHECK(msis(t, std::vector<double>{1.5}, h, 1, 0.2) == Approx((1.0 + 10.0 * 0.5) / 1.5).epsilon(1e-14));
}

TEST_CASE("MSIS grows when a covering interval widens", "[metrics]") {
    const std::vector<std::vector<double>> h{{0.0, 1.0, 0.5, 2.0}};
    const std::vector<double> z{0.5, 0.6};
    double previous = 0.0;
    for (double half : {0.2, 0.4, 0.8, 1.6}) {
        const auto t = interval(0.1, {0.5 - half, 0.6 - half}, {0.5 + half, 0.6 + half});
        const double m = msis(t, z, h, 1, 0.1);
        CHECK(m > previous);
        previous = m;
    }
}

TEST_CASE("evaluation report keys and undefined entries", "[metrics][io]") {
    const std::vector<double> wl{0.5, 0.9}, ml{0.1, 0.5, 0.9}, zs{0.1};
    const auto levels = required_levels(wl, ml, zs);
    REQUIRE(levels == std::vector<double>{0.05, 0.1, 0.5, 0.9, 0.95});
    ForecastTable t(levels, 1, 2);
    for (std::size_t s = 0; s < 2; ++s) {
        for (std::size_t k = 0; k < levels.size(); ++k) t.at(0, s, k) = static_cast<double>(k);
    }
    const std::vector<std::vector<double>> h{{1.0, 3.0, 2.0}};

    auto report = evaluate(t, std::vector<double>{1.0, 2.0}, h, 1, wl, ml, zs);
    auto j = to_json(report);
    CHECK(j.at("wql_0.5").get<double>() == Approx(wql(t, std::vector<double>{1.0, 2.0}, 0.5)));
    CHECK(j.contains("wql_0.9"));
    CHECK(j.at("mean_wql").get<double>() == Approx(mean_wql(t, std::vector<double>{1.0, 2.0}, ml)));
    CHECK(j.at("crossing_pct").get<double>() == 0.0);
    CHECK(j.at("msis_0.1").is_number());
    CHECK(j.at("series").get<int>() == 1);
    CHECK(j.at("horizon").get<int>() == 2);

    report = evaluate(t, std::vector<double>{0.0, 0.0}, std::vector<std::vector<double>>{{2.0, 2.0}}, 1, wl, ml, zs);
    j = to_json(report);
    CHECK(j.at("wql_0.5") == "N/A");
    CHECK(j.at("mean_wql") == "N/A");
    CHECK(j.at("msis_0.1") == "N/A");
}

TEST_CASE("level keys use the shortest exact decimal", "[metrics][io]") {
    CHECK(level_key(0.5) == "0.5");
    CHECK(level_key(0.995) == "0.995");
    CHECK(level_key(0.1) == "0.1");
    CHECK(level_key(0.05) == "0.05");
}
