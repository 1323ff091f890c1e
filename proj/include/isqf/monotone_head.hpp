#pragma once

// Learnable output layer mapping a feature vector to a monotone quantile curve.
//
// Knot values are a linear base value plus cumulative non-negative increments,
// one small MLP per increment, so no parameter setting can produce a crossing.
// In spline mode each knot interval additionally gets a learned piecewise-linear
// shape and the two tails get learned parameters.

#include "isqf/optimizer.hpp"
#include "isqf/params.hpp"
#include "isqf/quantile_function.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace isqf {

enum class HeadMode { Iqf, Isqf };
enum class TailKind { Exponential, Gpd };
enum class Activation { Softplus, Relu };

std::string to_string(HeadMode mode);
std::string to_string(TailKind kind);
std::string to_string(Activation act);
HeadMode parse_head_mode(const std::string& text);
TailKind parse_tail_kind(const std::string& text);
Activation parse_activation(const std::string& text);

struct HeadConfig {
    std::size_t input_dim = 1;
    std::vector<double> levels{0.1, 0.5, 0.9};
    HeadMode mode = HeadMode::Iqf;
    std::size_t spline_pieces = 3;  // ISQF only
    TailKind tail = TailKind::Exponential;  // ISQF only
    std::size_t hidden = 16;
    Activation activation = Activation::Softplus;
    double init_scale = 1.0;  // approximate initial distance between the outer knots

    /// Throws std::invalid_argument on an unusable configuration.
    void validate() const;
};

void to_json(nlohmann::json& j, const HeadConfig& c);
void from_json(const nlohmann::json& j, HeadConfig& c);

struct Observation {
    std::vector<double> features;
    double target = 0.0;
};

class MonotoneHead {
public:
    /// Zero parameters with the layout implied by `config`.
    explicit MonotoneHead(HeadConfig config);

    /// Seeded initialization: near-zero base map, increments near init_scale / K,
    /// uniform spline knots, unit tail rates.
    static MonotoneHead initialized(HeadConfig config, std::uint64_t seed);

    const HeadConfig& config() const noexcept { return config_; }
    const ParamSet& params() const noexcept { return params_; }
    ParamSet& params() noexcept { return params_; }
    /// Replaces the parameters; the layout must match.
    void set_params(ParamSet params);

    IsqfCurve decode(std::span<const double> h) const;

    /// CRPS of decode(h) at z. Adds dL/dtheta into `grad` and, when `dh` is
    /// non-empty, writes dL/dh into it.
    double backward(std::span<const double> h, double z, ParamSet& grad, std::span<double> dh = {}) const;

private:
    struct Forward;
    Forward forward(std::span<const double> h) const;
    void check_input(std::span<const double> h) const;

    HeadConfig config_;
    ParamSet params_;
    // First block index of each group; blocks are laid out in a fixed order.
    std::size_t increments_begin_ = 0;
    std::size_t segments_begin_ = 0;
    std::size_t tail_begin_ = 0;
};

void to_json(nlohmann::json& j, const MonotoneHead& head);
MonotoneHead head_from_json(const nlohmann::json& j);

/// Mean CRPS over the batch. Throws std::invalid_argument on an empty batch.
double empirical_crps_loss(const MonotoneHead& head, std::span<const Observation> batch);

/// Mean CRPS and its gradient (returned in `grad`, overwritten).
double loss_and_gradient(const MonotoneHead& head, std::span<const Observation> batch, ParamSet& grad);

struct GradientReport {
    bool passed = false;
    double tolerance = 0.0;
    double max_relative_discrepancy = 0.0;
    std::string worst_block;
    std::size_t worst_index = 0;
    std::size_t components_checked = 0;
};

/// Compares loss_and_gradient against fourth-order central differences with
/// step step_scale * max(1, |theta|). The differenced loss integrates GPD tails
/// to 1e-14. Components where both values are at most 1e-8 in magnitude are
/// skipped.
GradientReport gradient_check(const MonotoneHead& head, std::span<const Observation> batch, double tol,
                              double step_scale = 3e-4);

struct FitResult {
    MonotoneHead head;
    std::vector<double> loss_trace;  // mean training CRPS per epoch
};

/// Mini-batch training on empirical CRPS. Deterministic given the seed.
/// Throws NumericFailure when the loss or an update becomes non-finite.
FitResult fit(const MonotoneHead& initial, std::span<const Observation> data, const OptimizerConfig& config,
              std::uint64_t seed);

} // namespace isqf
