#pragma once

#include <cmath>
#include <string>

#include "sharpmin/errors.hpp"
#include "sharpmin/objective.hpp"
#include "sharpmin/vec.hpp"

namespace sharpmin {

/// Central-difference gradient, component i = (f(x + h e_i) - f(x - h e_i)) / 2h.
///
/// This is the independent oracle every analytic gradient in the project is
/// checked against; it must stay free of any analytic-gradient code path.
inline ParamVector finite_diff_gradient(const Objective& obj, const ParamVector& theta,
                                        double step) {
    if (!(step > 0.0)) throw SpecError("finite_diff_gradient: step must be positive");
    ParamVector grad(theta.size());
    ParamVector probe = theta;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        probe[i] = theta[i] + step;
        double fp = obj.value(probe);
        probe[i] = theta[i] - step;
        double fm = obj.value(probe);
        probe[i] = theta[i];
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw NonFiniteError("finite_diff_gradient: non-finite objective at stencil of component " +
                                 std::to_string(i));
        }
        grad[i] = (fp - fm) / (2.0 * step);
    }
    return grad;
}

}  // namespace sharpmin
