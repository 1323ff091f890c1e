#pragma once

// Flat named parameter storage shared by the head and the forecaster.
// Serialized as a list of {name, shape, values} records, values row-major.

#include <json.hpp>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace isqf {

struct ParamBlock {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
};

class ParamSet {
public:
    /// Appends a zero-filled block; returns its index.
    std::size_t add(std::string name, std::vector<std::size_t> shape);

    std::size_t block_count() const noexcept { return blocks_.size(); }
    std::size_t total_size() const noexcept;

    ParamBlock& block(std::size_t i) { return blocks_.at(i); }
    const ParamBlock& block(std::size_t i) const { return blocks_.at(i); }
    std::span<double> values(std::size_t i) { return blocks_.at(i).values; }
    std::span<const double> values(std::size_t i) const { return blocks_.at(i).values; }

    /// Index of the named block; throws std::out_of_range when absent.
    std::size_t index_of(const std::string& name) const;
    bool contains(const std::string& name) const noexcept;

    /// Same names and shapes, all values zero.
    ParamSet zeros_like() const;
    void fill(double value);
    bool same_layout(const ParamSet& other) const noexcept;

    /// Element access across blocks in declaration order.
    double& flat(std::size_t i);
    double flat(std::size_t i) const;
    /// Block that holds flat index i.
    const std::string& name_of_flat(std::size_t i) const;

    /// this += scale * other (layouts must match).
    void axpy(double scale, const ParamSet& other);

    /// Name of the first block holding a non-finite value, or empty.
    std::string first_non_finite() const;

    auto begin() const noexcept { return blocks_.begin(); }
    auto end() const noexcept { return blocks_.end(); }

private:
    std::vector<ParamBlock> blocks_;
};

void to_json(nlohmann::json& j, const ParamSet& params);
void from_json(const nlohmann::json& j, ParamSet& params);

} // namespace isqf
