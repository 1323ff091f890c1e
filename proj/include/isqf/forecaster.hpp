#pragma once

// Multi-horizon probabilistic forecaster: an MLP encoder over a fixed context
// window, tanh decoders producing one feature vector per horizon step and a
// monotone head per step. In autoregressive mode a single decoder and head
// predict one step ahead and sampled values are fed back.

#include "isqf/monotone_head.hpp"
#include "isqf/optimizer.hpp"
#include "isqf/panel.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace isqf {

enum class ForecastMode { Seq2Seq, Autoregressive };

std::string to_string(ForecastMode mode);
ForecastMode parse_forecast_mode(const std::string& text);

struct ForecastConfig {
    std::size_t horizon = 24;
    std::size_t context = 0;  // 0: twice the horizon
    ForecastMode mode = ForecastMode::Seq2Seq;
    std::size_t covariates = 0;
    std::size_t encoder_hidden = 32;
    std::size_t decoder_dim = 16;  // head input size
    /// Spacing of extra training windows behind the last one; 0 keeps only the
    /// last window of each series.
    std::size_t augment_stride = 1;
    /// Monte Carlo paths behind autoregressive quantiles beyond the first step.
    std::size_t ar_paths = 2000;
    HeadConfig head{};  // input_dim is taken from decoder_dim
    OptimizerConfig optimizer{OptimizerKind::Adam, 3e-3, 0.9, 0.999, 32, 60, 0.99};

    std::size_t context_length() const noexcept { return context ? context : 2 * horizon; }
    /// Throws std::invalid_argument on an unusable configuration.
    void validate() const;
};

void to_json(nlohmann::json& j, const ForecastConfig& c);
void from_json(const nlohmann::json& j, ForecastConfig& c);

/// Raw inputs for one forecast: the last C targets and, when the model uses
/// covariates, C + horizon covariate rows (context rows, then future rows).
struct ForecastInput {
    std::vector<double> context;
    std::vector<std::vector<double>> covariates;
};

/// Mean and scale of a context window. The scale falls back to 1 when the
/// standard deviation is below 1e-8.
struct WindowStats {
    double mean = 0.0;
    double scale = 1.0;

    static WindowStats of(std::span<const double> window);
    double normalize(double z) const noexcept { return (z - mean) / scale; }
    double denormalize(double u) const noexcept { return u * scale + mean; }
};

struct TrainingWindow {
    std::size_t series = 0;  // index into the panel
    ForecastInput input;
    std::vector<double> targets;  // the next `horizon` values
};

struct TrainingSplit {
    std::vector<TrainingWindow> windows;
    std::vector<std::string> skipped;  // series shorter than context + horizon
};

/// The last window of every series ends `horizon` steps before its final
/// observation; further windows step back by augment_stride.
TrainingSplit make_training_split(const SeriesPanel& panel, const ForecastConfig& config);

/// Inputs for forecasting the steps after observation `end` (default: the last
/// observed value). Future covariate rows must exist in the panel.
ForecastInput forecast_input(const Series& series, const ForecastConfig& config, std::size_t end);
ForecastInput forecast_input(const Series& series, const ForecastConfig& config);

class ForecastModel {
public:
    /// Zero parameters.
    explicit ForecastModel(ForecastConfig config);
    static ForecastModel initialized(ForecastConfig config, std::uint64_t seed);

    const ForecastConfig& config() const noexcept { return config_; }
    const ParamSet& params() const noexcept { return params_; }
    /// Replaces all parameters; the layout must match.
    void set_params(const ParamSet& params);

    std::size_t input_dim() const noexcept;
    const MonotoneHead& head(std::size_t step) const;

    /// Seq2seq: one curve per horizon step. Autoregressive: the one-step-ahead
    /// curve only. Curves are in data units.
    std::vector<IsqfCurve> curves(const ForecastInput& input) const;

    /// Mean CRPS in normalized units over all windows and steps, with its
    /// gradient written to `grad`.
    double loss_and_gradient(std::span<const TrainingWindow> windows, ParamSet& grad) const;
    double loss(std::span<const TrainingWindow> windows) const;

private:
    struct Pass;
    void check_input(const ForecastInput& input) const;
    // Normalized features of the window ending before `step` (autoregressive)
    // or of the whole context (seq2seq).
    std::vector<double> features(std::span<const double> context, const WindowStats& stats,
                                 const std::vector<std::vector<double>>& covariates, std::size_t step) const;
    Pass forward(std::span<const double> x) const;
    IsqfCurve step_curve(std::span<const double> context, const std::vector<std::vector<double>>& covariates,
                         std::size_t step) const;
    friend std::vector<std::vector<double>> sample_paths(const ForecastModel&, const ForecastInput&, std::size_t,
                                                         std::uint64_t);

    ForecastConfig config_;
    ParamSet params_;
    std::vector<MonotoneHead> heads_;
    std::size_t heads_begin_ = 0;  // first head block in params_
};

void to_json(nlohmann::json& j, const ForecastModel& model);
ForecastModel forecast_model_from_json(const nlohmann::json& j);

struct TrainResult {
    ForecastModel model;
    std::vector<double> loss_trace;
    std::vector<std::string> skipped;
};

/// Minimizes mean CRPS over the training split. Deterministic given the seed;
/// throws NumericFailure on a non-finite loss or update.
TrainResult train(const ForecastModel& initial, const SeriesPanel& panel, std::uint64_t seed);

/// horizon x levels.size() matrix; columns follow the order of `levels`.
/// Autoregressive steps after the first use empirical quantiles of
/// config().ar_paths sampled paths drawn with `seed`.
std::vector<std::vector<double>> predict_quantiles(const ForecastModel& model, const ForecastInput& input,
                                                   std::span<const double> levels, std::uint64_t seed = 0);

/// n_paths x horizon. Seq2seq paths share one level across all steps;
/// autoregressive paths draw a fresh level per step and feed the value back.
std::vector<std::vector<double>> sample_paths(const ForecastModel& model, const ForecastInput& input,
                                              std::size_t n_paths, std::uint64_t seed);

/// z_{T+t-period} repeated over the horizon.
std::vector<double> seasonal_naive(std::span<const double> history, std::size_t horizon, std::size_t period);

} // namespace isqf
