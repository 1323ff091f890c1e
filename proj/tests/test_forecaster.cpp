#include <catch_amalgamated.hpp>

#include "isqf/errors.hpp"
#include "isqf/forecaster.hpp"
#include "isqf/metrics.hpp"
#include "isqf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace isqf;
using Catch::Approx;

namespace {

SeriesPanel ramp_panel(std::size_t m, std::size_t T, std::size_t covariates = 0, std::size_t future = 0) {
    SeriesPanel p;
    for (std::size_t c = 0; c < covariates; ++c) p.covariate_names.push_back("cov_" + std::to_string(c));
    for (std::size_t i = 0; i < m; ++i) {
        Series s;
        s.id = "s" + std::to_string(i);
        for (std::size_t t = 0; t < T + future; ++t) {
            s.timestamps.push_back(std::to_string(t));
            if (t < T) s.targets.push_back(std::sin(0.3 * static_cast<double>(t + 7 * i)) + 0.1 * static_cast<double>(i));
            if (covariates) {
                std::vector<double> row;
                for (std::size_t c = 0; c < covariates; ++c) row.push_back(std::cos(0.2 * static_cast<double>(t + c)));
                s.covariates.push_back(row);
            }
        }
        p.series.push_back(std::move(s));
    }
    return p;
}

ForecastConfig tiny(ForecastMode mode, std::size_t covariates = 0) {
    ForecastConfig c;
    c.horizon = 3;
    c.context = 4;
    c.mode = mode;
    c.covariates = covariates;
    c.encoder_hidden = 3;
    c.decoder_dim = 2;
    c.head.hidden = 3;
    c.head.levels = {0.1, 0.5, 0.9};
    c.ar_paths = 500;
    return c;
}

void perturb(ForecastModel& model, std::uint64_t seed, double sd) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, sd);
    ParamSet p = model.params();
    for (std::size_t i = 0; i < p.total_size(); ++i) p.flat(i) += n(rng);
    model.set_params(p);
}

} // namespace

TEST_CASE("training split arithmetic", "[forecaster][split]") {
    ForecastConfig c;
    c.horizon = 24;
    c.context = 24;
    const auto split = make_training_split(ramp_panel(2, 48), c);
    REQUIRE(split.windows.size() == 2);
    CHECK(split.skipped.empty());
    for (const auto& w : split.windows) {
        CHECK(w.targets.size() == 24);
        CHECK(w.input.context.size() == 24);
    }
    const auto panel = ramp_panel(1, 48);
    CHECK(split.windows[0].input.context.front() == panel.series[0].targets[0]);
    CHECK(split.windows[0].targets.back() == panel.series[0].targets[47]);
}

TEST_CASE("augmentation adds earlier windows", "[forecaster][split]") {
    ForecastConfig c;
    c.horizon = 4;
    c.context = 8;
    c.augment_stride = 2;
    const auto split = make_training_split(ramp_panel(1, 20), c);
    // Last window ends at 16; then 14, 12, 10 and 8.
    REQUIRE(split.windows.size() == 5);
    const auto panel = ramp_panel(1, 20);
    CHECK(split.windows.back().input.context.front() == panel.series[0].targets[0]);
    c.augment_stride = 0;
    CHECK(make_training_split(ramp_panel(1, 20), c).windows.size() == 1);
}

TEST_CASE("short series are skipped", "[forecaster][split]") {
    auto panel = ramp_panel(2, 30);
    panel.series[1].targets.resize(10);
    panel.series[1].timestamps.resize(10);
    ForecastConfig c;
    c.horizon = 5;
    c.context = 10;
    const auto split = make_training_split(panel, c);
    CHECK(split.skipped == std::vector<std::string>{"s1"});
    CHECK(std::all_of(split.windows.begin(), split.windows.end(), [](const auto& w) { return w.series == 0; }));
}

TEST_CASE("window normalization round-trips", "[forecaster]") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(50.0, 20.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> w(12);
        for (auto& x : w) x = n(rng);
        const auto s = WindowStats::of(w);
        for (double z : w) CHECK(std::abs(s.denormalize(s.normalize(z)) - z) <= 1e-12 * std::max(1.0, std::abs(z)));
    }
    const std::vector<double> flat(5, 3.0);
    const auto s = WindowStats::of(flat);
    CHECK(s.scale == 1.0);
    CHECK(s.mean == 3.0);
}

TEST_CASE("forecaster gradient matches finite differences", "[forecaster][gradient]") {
    for (auto mode : {ForecastMode::Seq2Seq, ForecastMode::Autoregressive}) {
        for (std::size_t cov : {0u, 1u}) {
            auto cfg = tiny(mode, cov);
            auto model = ForecastModel::initialized(cfg, 7);
            perturb(model, 9, 0.3);
            const auto split = make_training_split(ramp_panel(2, 12, cov), cfg);
            REQUIRE(!split.windows.empty());
            ParamSet grad;
            model.loss_and_gradient(split.windows, grad);
            ForecastModel probe = model;
            ParamSet p = model.params();
            double worst = 0.0;
            std::string where;
            for (std::size_t i = 0; i < p.total_size(); ++i) {
                const double theta = p.flat(i), h = 1e-5 * std::max(1.0, std::abs(theta));
                p.flat(i) = theta + h;
                probe.set_params(p);
                const double up = probe.loss(split.windows);
                p.flat(i) = theta - h;
                probe.set_params(p);
                const double down = probe.loss(split.windows);
                p.flat(i) = theta;
                const double fd = (up - down) / (2.0 * h), an = grad.flat(i);
                const double mag = std::max(std::abs(fd), std::abs(an));
                if (mag > 1e-6 && std::abs(fd - an) / mag > worst) {
                    worst = std::abs(fd - an) / mag;
                    where = p.name_of_flat(i) + " fd " + std::to_string(fd) + " an " + std::to_string(an);
                }
            }
            INFO(to_string(mode) << " covariates " << cov << " worst at " << where);
            CHECK(worst <= 1e-4);
        }
    }
}

TEST_CASE("training is deterministic and lowers the loss", "[forecaster][train]") {
    auto cfg = tiny(ForecastMode::Seq2Seq);
    cfg.optimizer.epochs = 20;
    const auto panel = ramp_panel(3, 30);
    const auto init = ForecastModel::initialized(cfg, 1);
    const auto a = train(init, panel, 5);
    const auto b = train(init, panel, 5);
    CHECK(a.loss_trace == b.loss_trace);
    for (std::size_t i = 0; i < a.model.params().total_size(); ++i) {
        REQUIRE(a.model.params().flat(i) == b.model.params().flat(i));
    }
    CHECK(a.loss_trace.back() < a.loss_trace.front());
}

TEST_CASE("non-finite training data aborts with a diagnostic", "[forecaster][train]") {
    auto cfg = tiny(ForecastMode::Seq2Seq);
    auto panel = ramp_panel(1, 12);
    panel.series[0].targets[11] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(train(ForecastModel::initialized(cfg, 1), panel, 0), NumericFailure);
}

TEST_CASE("quantile queries at arbitrary levels", "[forecaster][predict]") {
    auto cfg = tiny(ForecastMode::Seq2Seq);
    auto model = ForecastModel::initialized(cfg, 3);
    perturb(model, 5, 0.5);
    const auto panel = ramp_panel(1, 12);
    const auto input = forecast_input(panel.series[0], cfg);
    const std::vector<double> levels{0.05, 0.1, 0.5, 0.7, 0.9, 0.995};
    const auto q = predict_quantiles(model, input, levels);
    const auto curves = model.curves(input);
    REQUIRE(q.size() == cfg.horizon);
    for (std::size_t t = 0; t < cfg.horizon; ++t) {
        for (std::size_t k = 0; k + 1 < levels.size(); ++k) CHECK(q[t][k] <= q[t][k + 1]);
        CHECK(q[t][1] == curves[t].quantile(0.1));
        CHECK(q[t][4] == curves[t].quantile(0.9));
        CHECK(q[t][3] >= q[t][2]);
        CHECK(q[t][3] <= q[t][4]);
    }
    const std::vector<double> permuted{0.9, 0.05, 0.995, 0.5, 0.7, 0.1};
    const auto qp = predict_quantiles(model, input, permuted);
    for (std::size_t t = 0; t < cfg.horizon; ++t) {
        for (std::size_t k = 0; k < permuted.size(); ++k) {
            const auto j = static_cast<std::size_t>(std::find(levels.begin(), levels.end(), permuted[k]) - levels.begin());
            CHECK(qp[t][k] == q[t][j]);
        }
    }
    CHECK_THROWS_AS(predict_quantiles(model, input, std::vector<double>{1.0}), DomainError);
}

TEST_CASE("malformed inputs are rejected", "[forecaster][predict]") {
    const auto cfg = tiny(ForecastMode::Seq2Seq, 1);
    const auto model = ForecastModel::initialized(cfg, 3);
    ForecastInput in{{1.0, 2.0, 3.0}, {}};
    CHECK_THROWS_AS(model.curves(in), std::invalid_argument);
    in.context.push_back(4.0);
    CHECK_THROWS_AS(model.curves(in), std::invalid_argument);
    in.covariates.assign(7, std::vector<double>{0.0});
    CHECK_NOTHROW(model.curves(in));
    const auto panel = ramp_panel(1, 12, 1);
    CHECK_THROWS_AS(forecast_input(panel.series[0], cfg), DataError);
    CHECK_NOTHROW(forecast_input(ramp_panel(1, 12, 1, 3).series[0], cfg));
}

TEST_CASE("seq2seq sample paths are ordered by their level", "[forecaster][sample]") {
    auto cfg = tiny(ForecastMode::Seq2Seq);
    auto model = ForecastModel::initialized(cfg, 3);
    perturb(model, 6, 0.5);
    const auto input = forecast_input(ramp_panel(1, 12).series[0], cfg);
    const auto paths = sample_paths(model, input, 300, 17);
    CHECK(paths == sample_paths(model, input, 300, 17));
    std::size_t violations = 0;
    for (std::size_t a = 0; a < paths.size(); ++a) {
        for (std::size_t b = 0; b < paths.size(); ++b) {
            if (paths[a][0] < paths[b][0]) {
                for (std::size_t t = 0; t < cfg.horizon; ++t) violations += paths[a][t] > paths[b][t];
            }
        }
    }
    CHECK(violations == 0);
}

TEST_CASE("autoregressive first step matches the direct quantiles", "[forecaster][sample]") {
    auto cfg = tiny(ForecastMode::Autoregressive);
    cfg.horizon = 2;
    auto model = ForecastModel::initialized(cfg, 3);
    perturb(model, 8, 0.5);
    const auto input = forecast_input(ramp_panel(1, 12).series[0], cfg);
    const auto paths = sample_paths(model, input, 50000, 23);
    std::vector<double> first;
    for (const auto& p : paths) first.push_back(p[0]);
    std::sort(first.begin(), first.end());
    const auto curve = model.curves(input).front();
    double ks = 0.0;
    const auto n = static_cast<double>(first.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
        const double f = curve.cdf(first[i]);
        ks = std::max({ks, std::abs(f - static_cast<double>(i) / n), std::abs(f - static_cast<double>(i + 1) / n)});
    }
    CHECK(ks <= 0.02);

    const std::vector<double> levels{0.1, 0.5, 0.9};
    const auto q = predict_quantiles(model, input, levels, 4);
    for (std::size_t k = 0; k < 3; ++k) CHECK(q[0][k] == curve.quantile(levels[k]));
    CHECK(q[1][0] <= q[1][1]);
    CHECK(q[1][1] <= q[1][2]);
    CHECK(q == predict_quantiles(model, input, levels, 4));
}

TEST_CASE("checkpoints round-trip bit for bit", "[forecaster][io]") {
    for (auto mode : {ForecastMode::Seq2Seq, ForecastMode::Autoregressive}) {
        auto cfg = tiny(mode, 1);
        auto model = ForecastModel::initialized(cfg, 11);
        perturb(model, 12, 0.2);
        const nlohmann::json j = model;
        const auto back = forecast_model_from_json(nlohmann::json::parse(j.dump()));
        REQUIRE(back.params().same_layout(model.params()));
        for (std::size_t i = 0; i < model.params().total_size(); ++i) {
            REQUIRE(back.params().flat(i) == model.params().flat(i));
        }
        CHECK(back.config().context_length() == cfg.context_length());
        CHECK(back.config().mode == mode);
    }
    CHECK_THROWS_AS(forecast_model_from_json(nlohmann::json{{"format", "other"}}), DataError);
}

TEST_CASE("seasonal naive repeats the last period", "[forecaster][baseline]") {
    const std::vector<double> h{1, 2, 3, 4, 5, 6, 7};
    CHECK(seasonal_naive(h, 5, 3) == std::vector<double>{5, 6, 7, 5, 6});
    CHECK_THROWS_AS(seasonal_naive(h, 2, 8), std::invalid_argument);
}

TEST_CASE("trained seq2seq model beats the seasonal naive forecast", "[forecaster][train][slow]") {
    SynthSpec spec;
    spec.kind = SynthKind::NoisySinusoidPanel;
    spec.series = 8;
    spec.length = 96;
    spec.horizon = 24;
    const auto full = generate_panel(spec);
    const auto panel = truncate_panel(full, 96);
    ForecastConfig cfg;
    cfg.optimizer.epochs = 30;
    const auto result = train(ForecastModel::initialized(cfg, 0), panel, 0);
    std::vector<double> levels;
    for (int k = 1; k <= 9; ++k) levels.push_back(k / 10.0);
    ForecastTable model_table(levels, spec.series, 24), naive(levels, spec.series, 24);
    Actuals z;
    for (std::size_t i = 0; i < spec.series; ++i) {
        const auto& s = full.series[i];
        const auto q = predict_quantiles(result.model, forecast_input(panel.series[i], cfg), levels);
        const auto sn = seasonal_naive(std::span<const double>(s.targets.data(), 96), 24, 24);
        for (std::size_t t = 0; t < 24; ++t) {
            z.push_back(s.targets[96 + t]);
            for (std::size_t k = 0; k < levels.size(); ++k) {
                model_table.at(i, t, k) = q[t][k];
                naive.at(i, t, k) = sn[t];
            }
        }
    }
    CHECK(crossing_percent(model_table) == 0.0);
    CHECK(mean_wql(model_table, z) < wql(naive, z, 0.5));
}
