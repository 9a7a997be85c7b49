#pragma once

#include <cstddef>

#include "sharpmin/vec.hpp"

namespace sharpmin {

/// Evaluation surface: loss value and exact gradient at a parameter vector.
///
/// Implementations are immutable once constructed and safe to evaluate from
/// several threads at once. Batch-conditioned objectives (see mlp.hpp) bind
/// a fixed batch and dropout mask at construction, so value and gradient of
/// one instance always describe the same deterministic function.
class Objective {
public:
    virtual ~Objective() = default;

    virtual std::size_t dim() const = 0;
    virtual double value(const ParamVector& theta) const = 0;
    virtual ParamVector gradient(const ParamVector& theta) const = 0;
};

}  // namespace sharpmin
