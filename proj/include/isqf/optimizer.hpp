#pragma once

#include "isqf/params.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace isqf {

enum class OptimizerKind { SgdMomentum, Adam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::SgdMomentum;
    double learning_rate = 1e-2;
    double momentum = 0.9;  // SGD momentum, or Adam's first-moment decay
    double second_moment_decay = 0.999;  // Adam only
    std::size_t batch_size = 64;
    std::size_t epochs = 500;
    /// Multiplies the learning rate after every epoch.
    double lr_decay = 1.0;
};

void to_json(nlohmann::json& j, const OptimizerConfig& c);
void from_json(const nlohmann::json& j, OptimizerConfig& c);

class Optimizer {
public:
    Optimizer(OptimizerConfig config, const ParamSet& layout);

    /// params -= update(grad). Throws NumericFailure naming the block when the
    /// gradient or the updated parameters are not finite.
    void step(ParamSet& params, const ParamSet& grad);
    void end_epoch();

    double learning_rate() const noexcept { return lr_; }

private:
    OptimizerConfig config_;
    ParamSet first_;
    ParamSet second_;
    double lr_;
    std::uint64_t steps_ = 0;
};

/// Seeded epoch loop shared by the head and forecaster trainers. `batch_loss`
/// receives sample indices, writes the mean gradient and returns the mean loss.
/// Returns the mean training loss per epoch.
std::vector<double> run_epochs(ParamSet& params, std::size_t n_samples, const OptimizerConfig& config,
                               std::uint64_t seed,
                               const std::function<double(std::span<const std::size_t>, ParamSet&)>& batch_loss);

} // namespace isqf
