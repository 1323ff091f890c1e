#pragma once

#include <stdexcept>
#include <string>

namespace isqf {

/// Quantile level or parameter outside the domain of a function.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Level lies in a tail region and must be dispatched to extrapolation.
class TailRegionError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// A metric whose normalizer vanished (reported as "N/A").
class UndefinedMetricError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// NaN/Inf encountered during training; carries the offending parameter block.
class NumericFailure : public std::runtime_error {
public:
    NumericFailure(const std::string& what, std::string block)
        : std::runtime_error(what), block_(std::move(block)) {}
    const std::string& block() const noexcept { return block_; }

private:
    std::string block_;
};

/// Malformed input data (CSV panels, checkpoints). Line is 1-based, 0 if unknown.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what),
          line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Adaptive quadrature failed to reach its tolerance.
class QuadratureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace isqf
