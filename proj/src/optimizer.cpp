#include "isqf/optimizer.hpp"

#include "isqf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace isqf {

void to_json(nlohmann::json& j, const OptimizerConfig& c) {
    j = {{"kind", c.kind == OptimizerKind::Adam ? "adam" : "sgd-momentum"},
         {"learning_rate", c.learning_rate},
         {"momentum", c.momentum},
         {"second_moment_decay", c.second_moment_decay},
         {"batch_size", c.batch_size},
         {"epochs", c.epochs},
         {"lr_decay", c.lr_decay}};
}

void from_json(const nlohmann::json& j, OptimizerConfig& c) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "adam") {
        c.kind = OptimizerKind::Adam;
    } else if (kind == "sgd-momentum") {
        c.kind = OptimizerKind::SgdMomentum;
    } else {
        throw std::invalid_argument("unknown optimizer '" + kind + "'");
    }
    c.learning_rate = j.at("learning_rate").get<double>();
    c.momentum = j.at("momentum").get<double>();
    c.second_moment_decay = j.at("second_moment_decay").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.lr_decay = j.value("lr_decay", 1.0);
}

Optimizer::Optimizer(OptimizerConfig config, const ParamSet& layout)
    : config_(config), first_(layout.zeros_like()), second_(layout.zeros_like()), lr_(config.learning_rate) {
    if (!(config_.learning_rate > 0.0) || config_.batch_size == 0) {
        throw std::invalid_argument("optimizer needs a positive learning rate and batch size");
    }
    if (!(config_.momentum >= 0.0 && config_.momentum < 1.0)) {
        throw std::invalid_argument("momentum must lie in [0, 1)");
    }
}

void Optimizer::step(ParamSet& params, const ParamSet& grad) {
    if (const auto bad = grad.first_non_finite(); !bad.empty()) {
        throw NumericFailure("non-finite gradient in block '" + bad + "'", bad);
    }
    ++steps_;
    const double b1 = config_.momentum;
    const double b2 = config_.second_moment_decay;
    for (std::size_t i = 0; i < params.block_count(); ++i) {
        auto p = params.values(i);
        auto g = grad.values(i);
        auto m = first_.values(i);
        if (config_.kind == OptimizerKind::SgdMomentum) {
            for (std::size_t j = 0; j < p.size(); ++j) {
                m[j] = b1 * m[j] + g[j];
                p[j] -= lr_ * m[j];
            }
            continue;
        }
        auto v = second_.values(i);
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            p[j] -= lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + 1e-8);
        }
    }
    if (const auto bad = params.first_non_finite(); !bad.empty()) {
        throw NumericFailure("non-finite parameters in block '" + bad + "' after update", bad);
    }
}

void Optimizer::end_epoch() { lr_ *= config_.lr_decay; }

std::vector<double> run_epochs(ParamSet& params, std::size_t n_samples, const OptimizerConfig& config,
                               std::uint64_t seed,
                               const std::function<double(std::span<const std::size_t>, ParamSet&)>& batch_loss) {
    if (n_samples == 0) {
        throw std::invalid_argument("training needs at least one sample");
    }
    Optimizer opt(config, params);
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order(n_samples);
    std::iota(order.begin(), order.end(), std::size_t{0});
    ParamSet grad = params.zeros_like();
    std::vector<double> trace;
    trace.reserve(config.epochs);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        for (std::size_t start = 0; start < n_samples; start += config.batch_size) {
            const std::size_t stop = std::min(n_samples, start + config.batch_size);
            const std::span<const std::size_t> batch(order.data() + start, stop - start);
            const double loss = batch_loss(batch, grad);
            if (!std::isfinite(loss)) {
                auto bad = grad.first_non_finite();
                if (bad.empty()) bad = params.first_non_finite();
                if (bad.empty()) bad = "loss";
                throw NumericFailure("non-finite training loss in epoch " + std::to_string(epoch) +
                                         " (block '" + bad + "')",
                                     bad);
            }
            total += loss * static_cast<double>(batch.size());
            opt.step(params, grad);
        }
        opt.end_epoch();
        trace.push_back(total / static_cast<double>(n_samples));
    }
    return trace;
}

} // namespace isqf
