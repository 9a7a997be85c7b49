#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sharpmin {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Mismatched or invalid vector/matrix dimensions.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Invalid construction parameters (asymmetric matrix, bad curvatures, bad step index, ...).
class SpecError : public Error {
public:
    using Error::Error;
};

/// Zero or collinear direction where a usable direction is required.
class DegenerateDirectionError : public Error {
public:
    using Error::Error;
};

/// NaN/Inf encountered in an objective value or gradient.
class NonFiniteError : public Error {
public:
    using Error::Error;
};

/// Bad dataset input: unknown domain, label out of range, batch too small/large.
class DataError : public Error {
public:
    using Error::Error;
};

/// Invalid experiment configuration (unknown key, type mismatch, constraint violation).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// File read/write failure.
class IoError : public Error {
public:
    using Error::Error;
};

/// Training loss went non-finite or above the guard threshold; carries the step index.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::size_t step)
        : Error(what), step_(step) {}
    std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

}  // namespace sharpmin
