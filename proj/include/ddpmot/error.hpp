#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ddpmot {

/// Precondition violation: bad shapes, out-of-range indices, invalid parameters.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A point falls outside the computational box (no extrapolation is performed).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Numerical breakdown: non-finite values, lost mass, singular pivots.
/// Carries the offending multi-index when one is known.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what, std::vector<std::size_t> index = {})
        : std::runtime_error(what), index_(std::move(index)) {}

    const std::vector<std::size_t>& index() const noexcept { return index_; }

private:
    std::vector<std::size_t> index_;
};

}  // namespace ddpmot
