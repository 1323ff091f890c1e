#include "isqf/forecaster.hpp"

#include "isqf/crps.hpp"
#include "isqf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace isqf {

std::string to_string(ForecastMode mode) {
    return mode == ForecastMode::Seq2Seq ? "seq2seq" : "ar";
}

ForecastMode parse_forecast_mode(const std::string& text) {
    if (text == "seq2seq") return ForecastMode::Seq2Seq;
    if (text == "ar" || text == "autoregressive") return ForecastMode::Autoregressive;
    throw std::invalid_argument("unknown forecast mode '" + text + "' (expected seq2seq or ar)");
}

void ForecastConfig::validate() const {
    if (horizon == 0) throw std::invalid_argument("horizon must be positive");
    if (context_length() == 0) throw std::invalid_argument("context must be positive");
    if (encoder_hidden == 0 || decoder_dim == 0) throw std::invalid_argument("layer sizes must be positive");
    if (ar_paths == 0) throw std::invalid_argument("ar_paths must be positive");
    HeadConfig h = head;
    h.input_dim = decoder_dim;
    h.validate();
}

void to_json(nlohmann::json& j, const ForecastConfig& c) {
    j = {{"horizon", c.horizon},
         {"context", c.context_length()},
         {"mode", to_string(c.mode)},
         {"covariates", c.covariates},
         {"encoder_hidden", c.encoder_hidden},
         {"decoder_dim", c.decoder_dim},
         {"augment_stride", c.augment_stride},
         {"ar_paths", c.ar_paths},
         {"head", c.head},
         {"optimizer", c.optimizer}};
}

void from_json(const nlohmann::json& j, ForecastConfig& c) {
    c.horizon = j.at("horizon").get<std::size_t>();
    c.context = j.at("context").get<std::size_t>();
    c.mode = parse_forecast_mode(j.at("mode").get<std::string>());
    c.covariates = j.at("covariates").get<std::size_t>();
    c.encoder_hidden = j.at("encoder_hidden").get<std::size_t>();
    c.decoder_dim = j.at("decoder_dim").get<std::size_t>();
    c.augment_stride = j.at("augment_stride").get<std::size_t>();
    c.ar_paths = j.at("ar_paths").get<std::size_t>();
    c.head = j.at("head").get<HeadConfig>();
    c.optimizer = j.at("optimizer").get<OptimizerConfig>();
}

WindowStats WindowStats::of(std::span<const double> window) {
    WindowStats s;
    if (window.empty()) return s;
    double sum = 0.0;
    for (double z : window) sum += z;
    s.mean = sum / static_cast<double>(window.size());
    double ss = 0.0;
    for (double z : window) ss += (z - s.mean) * (z - s.mean);
    const double sd = std::sqrt(ss / static_cast<double>(window.size()));
    s.scale = sd < 1e-8 ? 1.0 : sd;
    return s;
}

// ---------------------------------------------------------------------------

ForecastInput forecast_input(const Series& series, const ForecastConfig& config, std::size_t end) {
    const std::size_t C = config.context_length();
    if (end > series.targets.size() || end < C) {
        throw DataError("series " + series.id + " needs " + std::to_string(C) + " observations before the forecast start");
    }
    ForecastInput in;
    in.context.assign(series.targets.begin() + static_cast<std::ptrdiff_t>(end - C),
                      series.targets.begin() + static_cast<std::ptrdiff_t>(end));
    if (config.covariates > 0) {
        if (series.covariates.size() < end + config.horizon) {
            throw DataError("series " + series.id + " lacks covariates for the " + std::to_string(config.horizon) +
                            " forecast steps");
        }
        in.covariates.assign(series.covariates.begin() + static_cast<std::ptrdiff_t>(end - C),
                             series.covariates.begin() + static_cast<std::ptrdiff_t>(end + config.horizon));
    }
    return in;
}

ForecastInput forecast_input(const Series& series, const ForecastConfig& config) {
    return forecast_input(series, config, series.targets.size());
}

TrainingSplit make_training_split(const SeriesPanel& panel, const ForecastConfig& config) {
    config.validate();
    if (panel.covariate_count() != config.covariates) {
        throw DataError("panel has " + std::to_string(panel.covariate_count()) + " covariates, model expects " +
                        std::to_string(config.covariates));
    }
    const std::size_t C = config.context_length(), tau = config.horizon;
    TrainingSplit split;
    for (std::size_t i = 0; i < panel.series.size(); ++i) {
        const auto& s = panel.series[i];
        const std::size_t T = s.targets.size();
        if (T < C + tau) {
            split.skipped.push_back(s.id);
            continue;
        }
        for (std::size_t end = T - tau;;) {
            TrainingWindow w{i, forecast_input(s, config, end), {}};
            w.targets.assign(s.targets.begin() + static_cast<std::ptrdiff_t>(end),
                             s.targets.begin() + static_cast<std::ptrdiff_t>(end + tau));
            split.windows.push_back(std::move(w));
            if (config.augment_stride == 0 || end < C + config.augment_stride) break;
            end -= config.augment_stride;
        }
    }
    return split;
}

// ---------------------------------------------------------------------------

namespace {

std::string dec_name(std::size_t t, const char* what) {
    return "dec" + std::to_string(t + 1) + "." + what;
}

// y = tanh(W x + b) for a row-major [out, in] block.
void dense_tanh(std::span<const double> w, std::span<const double> b, std::span<const double> x,
                std::span<double> y) {
    const std::size_t in = x.size();
    for (std::size_t r = 0; r < y.size(); ++r) {
        double a = b[r];
        const double* row = w.data() + r * in;
        for (std::size_t c = 0; c < in; ++c) a += row[c] * x[c];
        y[r] = std::tanh(a);
    }
}

// Given dL/dy for y = tanh(W x + b), accumulates dW, db and (optionally) dx.
void dense_tanh_backward(std::span<const double> w, std::span<const double> x, std::span<const double> y,
                         std::span<const double> dy, std::span<double> dw, std::span<double> db,
                         std::span<double> dx) {
    const std::size_t in = x.size();
    for (std::size_t r = 0; r < y.size(); ++r) {
        const double da = dy[r] * (1.0 - y[r] * y[r]);
        if (da == 0.0) continue;
        db[r] += da;
        double* grow = dw.data() + r * in;
        const double* row = w.data() + r * in;
        for (std::size_t c = 0; c < in; ++c) grow[c] += da * x[c];
        if (!dx.empty()) {
            for (std::size_t c = 0; c < in; ++c) dx[c] += da * row[c];
        }
    }
}

std::size_t decoder_count(const ForecastConfig& c) {
    return c.mode == ForecastMode::Seq2Seq ? c.horizon : 1;
}

HeadConfig head_config(const ForecastConfig& c) {
    HeadConfig h = c.head;
    h.input_dim = c.decoder_dim;
    return h;
}

} // namespace

struct ForecastModel::Pass {
    std::vector<double> x;
    std::vector<double> e;
    std::vector<std::vector<double>> h;  // one per decoder
};

ForecastModel::ForecastModel(ForecastConfig config) : config_(std::move(config)) {
    config_.validate();
    config_.context = config_.context_length();
    params_.add("enc.weight", {config_.encoder_hidden, input_dim()});
    params_.add("enc.bias", {config_.encoder_hidden});
    const std::size_t n = decoder_count(config_);
    for (std::size_t t = 0; t < n; ++t) {
        params_.add(dec_name(t, "weight"), {config_.decoder_dim, config_.encoder_hidden});
        params_.add(dec_name(t, "bias"), {config_.decoder_dim});
    }
    heads_begin_ = params_.block_count();
    for (std::size_t t = 0; t < n; ++t) {
        heads_.emplace_back(head_config(config_));
        for (const auto& b : heads_.back().params()) {
            params_.add("head" + std::to_string(t + 1) + "." + b.name, b.shape);
        }
    }
}

ForecastModel ForecastModel::initialized(ForecastConfig config, std::uint64_t seed) {
    ForecastModel m(std::move(config));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    auto fill = [&](const std::string& name, double sd) {
        for (double& v : m.params_.values(m.params_.index_of(name))) v = sd * n(rng);
    };
    fill("enc.weight", 1.0 / std::sqrt(static_cast<double>(m.input_dim())));
    const std::size_t count = decoder_count(m.config_);
    for (std::size_t t = 0; t < count; ++t) {
        fill(dec_name(t, "weight"), 1.0 / std::sqrt(static_cast<double>(m.config_.encoder_hidden)));
    }
    std::size_t block = m.heads_begin_;
    for (std::size_t t = 0; t < count; ++t) {
        const auto head = MonotoneHead::initialized(head_config(m.config_), seed + 1 + t);
        for (const auto& b : head.params()) {
            std::copy(b.values.begin(), b.values.end(), m.params_.values(block++).begin());
        }
    }
    m.set_params(m.params_);
    return m;
}

void ForecastModel::set_params(const ParamSet& params) {
    if (!params.same_layout(params_)) throw std::invalid_argument("parameter layout does not match the model");
    if (&params != &params_) params_ = params;
    std::size_t block = heads_begin_;
    for (auto& head : heads_) {
        auto& hp = head.params();
        for (std::size_t b = 0; b < hp.block_count(); ++b) {
            const auto src = params_.values(block++);
            std::copy(src.begin(), src.end(), hp.values(b).begin());
        }
    }
}

std::size_t ForecastModel::input_dim() const noexcept {
    const std::size_t C = config_.context_length();
    const std::size_t rows = config_.mode == ForecastMode::Seq2Seq ? C + config_.horizon : C + 1;
    return C + rows * config_.covariates;
}

const MonotoneHead& ForecastModel::head(std::size_t step) const {
    return heads_.at(config_.mode == ForecastMode::Seq2Seq ? step : 0);
}

void ForecastModel::check_input(const ForecastInput& input) const {
    const std::size_t C = config_.context_length();
    if (input.context.size() != C) {
        throw std::invalid_argument("expected a context of " + std::to_string(C) + " values, got " +
                                    std::to_string(input.context.size()));
    }
    if (config_.covariates > 0) {
        if (input.covariates.size() != C + config_.horizon) {
            throw std::invalid_argument("expected " + std::to_string(C + config_.horizon) + " covariate rows");
        }
        for (const auto& row : input.covariates) {
            if (row.size() != config_.covariates) throw std::invalid_argument("covariate row has the wrong width");
        }
    }
    for (double z : input.context) {
        if (!std::isfinite(z)) throw std::invalid_argument("context contains a non-finite value");
    }
}

std::vector<double> ForecastModel::features(std::span<const double> context, const WindowStats& stats,
                                            const std::vector<std::vector<double>>& covariates,
                                            std::size_t step) const {
    std::vector<double> x;
    x.reserve(input_dim());
    for (double z : context) x.push_back(stats.normalize(z));
    if (config_.covariates > 0) {
        const std::size_t C = config_.context_length();
        const std::size_t first = config_.mode == ForecastMode::Seq2Seq ? 0 : step;
        const std::size_t last = config_.mode == ForecastMode::Seq2Seq ? C + config_.horizon : step + C + 1;
        for (std::size_t r = first; r < last; ++r) x.insert(x.end(), covariates[r].begin(), covariates[r].end());
    }
    return x;
}

ForecastModel::Pass ForecastModel::forward(std::span<const double> x) const {
    Pass p;
    p.x.assign(x.begin(), x.end());
    p.e.resize(config_.encoder_hidden);
    dense_tanh(params_.values(0), params_.values(1), p.x, p.e);
    const std::size_t n = decoder_count(config_);
    p.h.assign(n, std::vector<double>(config_.decoder_dim));
    for (std::size_t t = 0; t < n; ++t) dense_tanh(params_.values(2 + 2 * t), params_.values(3 + 2 * t), p.e, p.h[t]);
    return p;
}

IsqfCurve ForecastModel::step_curve(std::span<const double> context,
                                    const std::vector<std::vector<double>>& covariates, std::size_t step) const {
    const auto stats = WindowStats::of(context);
    const auto pass = forward(features(context, stats, covariates, step));
    return heads_[0].decode(pass.h[0]).affine(stats.scale, stats.mean);
}

std::vector<IsqfCurve> ForecastModel::curves(const ForecastInput& input) const {
    check_input(input);
    if (config_.mode == ForecastMode::Autoregressive) return {step_curve(input.context, input.covariates, 0)};
    const auto stats = WindowStats::of(input.context);
    const auto pass = forward(features(input.context, stats, input.covariates, 0));
    std::vector<IsqfCurve> out;
    out.reserve(config_.horizon);
    for (std::size_t t = 0; t < config_.horizon; ++t) {
        out.push_back(heads_[t].decode(pass.h[t]).affine(stats.scale, stats.mean));
    }
    return out;
}

double ForecastModel::loss_and_gradient(std::span<const TrainingWindow> windows, ParamSet& grad) const {
    if (windows.empty()) throw std::invalid_argument("loss needs at least one window");
    if (!grad.same_layout(params_)) grad = params_.zeros_like();
    grad.fill(0.0);
    std::vector<ParamSet> head_grads;
    for (const auto& h : heads_) head_grads.push_back(h.params().zeros_like());

    const std::size_t C = config_.context_length(), tau = config_.horizon;
    std::vector<double> dh(config_.decoder_dim), de(config_.encoder_hidden);
    double total = 0.0;
    std::size_t terms = 0;

    // One forward/backward through encoder, decoder t and head t on a
    // normalized target; `x` holds the window features.
    auto accumulate = [&](std::span<const double> x, const WindowStats& stats,
                          std::span<const double> targets, std::size_t decoders_used) {
        const auto pass = forward(x);
        std::fill(de.begin(), de.end(), 0.0);
        for (std::size_t t = 0; t < decoders_used; ++t) {
            std::fill(dh.begin(), dh.end(), 0.0);
            total += heads_[t].backward(pass.h[t], stats.normalize(targets[t]), head_grads[t], dh);
            ++terms;
            dense_tanh_backward(params_.values(2 + 2 * t), pass.e, pass.h[t], dh, grad.values(2 + 2 * t),
                                grad.values(3 + 2 * t), de);
        }
        dense_tanh_backward(params_.values(0), pass.x, pass.e, de, grad.values(0), grad.values(1), {});
    };

    for (const auto& w : windows) {
        check_input(w.input);
        if (w.targets.size() != tau) throw std::invalid_argument("training window has the wrong number of targets");
        if (config_.mode == ForecastMode::Seq2Seq) {
            const auto stats = WindowStats::of(w.input.context);
            accumulate(features(w.input.context, stats, w.input.covariates, 0), stats, w.targets, tau);
        } else {
            // Teacher forcing: every step sees the true preceding values.
            std::vector<double> series(w.input.context);
            series.insert(series.end(), w.targets.begin(), w.targets.end());
            for (std::size_t t = 0; t < tau; ++t) {
                const std::span<const double> ctx(series.data() + t, C);
                const auto stats = WindowStats::of(ctx);
                accumulate(features(ctx, stats, w.input.covariates, t), stats,
                           std::span<const double>(series.data() + C + t, 1), 1);
            }
        }
    }

    std::size_t block = heads_begin_;
    for (const auto& hg : head_grads) {
        for (std::size_t b = 0; b < hg.block_count(); ++b) {
            const auto src = hg.values(b);
            std::copy(src.begin(), src.end(), grad.values(block++).begin());
        }
    }
    const double n = static_cast<double>(terms);
    for (std::size_t b = 0; b < grad.block_count(); ++b) {
        for (double& g : grad.values(b)) g /= n;
    }
    return total / n;
}

double ForecastModel::loss(std::span<const TrainingWindow> windows) const {
    ParamSet scratch;
    return loss_and_gradient(windows, scratch);
}

void to_json(nlohmann::json& j, const ForecastModel& model) {
    j = {{"format", "isqf-forecaster/1"}, {"config", model.config()}, {"params", model.params()}};
}

ForecastModel forecast_model_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "isqf-forecaster/1") throw DataError("not a forecaster checkpoint");
    ForecastModel model(j.at("config").get<ForecastConfig>());
    model.set_params(j.at("params").get<ParamSet>());
    return model;
}

TrainResult train(const ForecastModel& initial, const SeriesPanel& panel, std::uint64_t seed) {
    auto split = make_training_split(panel, initial.config());
    if (split.windows.empty()) throw DataError("no series is long enough for the configured context and horizon");
    TrainResult out{initial, {}, std::move(split.skipped)};
    ParamSet params = initial.params();
    const auto& windows = split.windows;
    std::vector<TrainingWindow> batch;
    out.loss_trace = run_epochs(params, windows.size(), initial.config().optimizer, seed,
                                [&](std::span<const std::size_t> idx, ParamSet& grad) {
                                    out.model.set_params(params);
                                    batch.clear();
                                    for (std::size_t i : idx) batch.push_back(windows[i]);
                                    return out.model.loss_and_gradient(batch, grad);
                                });
    out.model.set_params(params);
    return out;
}

// ---------------------------------------------------------------------------

namespace {

// Leftmost order statistic with empirical CDF >= alpha.
double empirical_quantile(std::span<const double> sorted, double alpha) {
    const auto n = static_cast<double>(sorted.size());
    auto k = static_cast<std::size_t>(std::ceil(alpha * n));
    k = std::clamp<std::size_t>(k, 1, sorted.size());
    return sorted[k - 1];
}

} // namespace

std::vector<std::vector<double>> predict_quantiles(const ForecastModel& model, const ForecastInput& input,
                                                   std::span<const double> levels, std::uint64_t seed) {
    for (double a : levels) {
        if (!(a > 0.0 && a < 1.0)) throw DomainError("quantile level outside (0,1)");
    }
    const auto& cfg = model.config();
    const auto curves = model.curves(input);
    std::vector<std::vector<double>> out(cfg.horizon, std::vector<double>(levels.size()));
    for (std::size_t k = 0; k < levels.size(); ++k) out[0][k] = curves[0].quantile(levels[k]);
    if (cfg.mode == ForecastMode::Seq2Seq) {
        for (std::size_t t = 1; t < cfg.horizon; ++t) {
            for (std::size_t k = 0; k < levels.size(); ++k) out[t][k] = curves[t].quantile(levels[k]);
        }
        return out;
    }
    const auto paths = sample_paths(model, input, cfg.ar_paths, seed);
    std::vector<double> column(paths.size());
    for (std::size_t t = 1; t < cfg.horizon; ++t) {
        for (std::size_t p = 0; p < paths.size(); ++p) column[p] = paths[p][t];
        std::sort(column.begin(), column.end());
        for (std::size_t k = 0; k < levels.size(); ++k) out[t][k] = empirical_quantile(column, levels[k]);
    }
    return out;
}

std::vector<std::vector<double>> sample_paths(const ForecastModel& model, const ForecastInput& input,
                                              std::size_t n_paths, std::uint64_t seed) {
    if (n_paths == 0) throw std::invalid_argument("n_paths must be at least 1");
    const auto& cfg = model.config();
    const auto curves = model.curves(input);
    std::mt19937_64 rng(seed);
    std::vector<std::vector<double>> paths(n_paths, std::vector<double>(cfg.horizon));
    if (cfg.mode == ForecastMode::Seq2Seq) {
        for (auto& path : paths) {
            const double alpha = uniform_open01(rng);
            for (std::size_t t = 0; t < cfg.horizon; ++t) path[t] = curves[t].quantile(alpha);
        }
        return paths;
    }
    const std::size_t C = cfg.context_length();
    std::vector<double> series;
    for (auto& path : paths) {
        series = input.context;
        path[0] = curves[0].quantile(uniform_open01(rng));
        series.push_back(path[0]);
        for (std::size_t t = 1; t < cfg.horizon; ++t) {
            const auto curve = model.step_curve(std::span<const double>(series.data() + t, C), input.covariates, t);
            path[t] = curve.quantile(uniform_open01(rng));
            series.push_back(path[t]);
        }
    }
    return paths;
}

std::vector<double> seasonal_naive(std::span<const double> history, std::size_t horizon, std::size_t period) {
    if (period == 0 || history.size() < period) {
        throw std::invalid_argument("seasonal naive needs at least one full period of history");
    }
    std::vector<double> out(horizon);
    const std::size_t T = history.size();
    for (std::size_t t = 0; t < horizon; ++t) out[t] = history[T - period + (t % period)];
    return out;
}

} // namespace isqf
