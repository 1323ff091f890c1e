#include "isqf/params.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace isqf {

std::size_t ParamSet::add(std::string name, std::vector<std::size_t> shape) {
    if (contains(name)) {
        throw std::invalid_argument("duplicate parameter block '" + name + "'");
    }
    const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    blocks_.push_back({std::move(name), std::move(shape), std::vector<double>(n, 0.0)});
    return blocks_.size() - 1;
}

std::size_t ParamSet::total_size() const noexcept {
    std::size_t n = 0;
    for (const auto& b : blocks_) n += b.size();
    return n;
}

std::size_t ParamSet::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        if (blocks_[i].name == name) return i;
    }
    throw std::out_of_range("no parameter block named '" + name + "'");
}

bool ParamSet::contains(const std::string& name) const noexcept {
    for (const auto& b : blocks_) {
        if (b.name == name) return true;
    }
    return false;
}

ParamSet ParamSet::zeros_like() const {
    ParamSet out = *this;
    out.fill(0.0);
    return out;
}

void ParamSet::fill(double value) {
    for (auto& b : blocks_) std::fill(b.values.begin(), b.values.end(), value);
}

bool ParamSet::same_layout(const ParamSet& other) const noexcept {
    if (blocks_.size() != other.blocks_.size()) return false;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        if (blocks_[i].name != other.blocks_[i].name || blocks_[i].shape != other.blocks_[i].shape) return false;
    }
    return true;
}

double& ParamSet::flat(std::size_t i) {
    for (auto& b : blocks_) {
        if (i < b.size()) return b.values[i];
        i -= b.size();
    }
    throw std::out_of_range("flat parameter index out of range");
}

double ParamSet::flat(std::size_t i) const {
    return const_cast<ParamSet&>(*this).flat(i);
}

const std::string& ParamSet::name_of_flat(std::size_t i) const {
    for (const auto& b : blocks_) {
        if (i < b.size()) return b.name;
        i -= b.size();
    }
    throw std::out_of_range("flat parameter index out of range");
}

void ParamSet::axpy(double scale, const ParamSet& other) {
    if (!same_layout(other)) {
        throw std::invalid_argument("parameter layouts differ");
    }
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        auto& dst = blocks_[i].values;
        const auto& src = other.blocks_[i].values;
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += scale * src[j];
    }
}

std::string ParamSet::first_non_finite() const {
    for (const auto& b : blocks_) {
        for (double v : b.values) {
            if (!std::isfinite(v)) return b.name;
        }
    }
    return {};
}

void to_json(nlohmann::json& j, const ParamSet& params) {
    j = nlohmann::json::array();
    for (const auto& b : params) {
        j.push_back({{"name", b.name}, {"shape", b.shape}, {"values", b.values}});
    }
}

void from_json(const nlohmann::json& j, ParamSet& params) {
    params = ParamSet{};
    if (!j.is_array()) {
        throw std::invalid_argument("parameter record must be a JSON array");
    }
    for (const auto& rec : j) {
        const auto shape = rec.at("shape").get<std::vector<std::size_t>>();
        const auto idx = params.add(rec.at("name").get<std::string>(), shape);
        auto values = rec.at("values").get<std::vector<double>>();
        if (values.size() != params.block(idx).size()) {
            throw std::invalid_argument("parameter block '" + params.block(idx).name + "' has " +
                                        std::to_string(values.size()) + " values for its shape");
        }
        params.block(idx).values = std::move(values);
    }
}

} // namespace isqf
