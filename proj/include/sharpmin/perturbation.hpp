#pragma once

#include <cmath>
#include <cstddef>

#include "sharpmin/errors.hpp"
#include "sharpmin/vec.hpp"

namespace sharpmin {

enum class Decay { Constant, InverseSqrt };

struct PerturbConfig {
    double rho0 = 0.1;       // base perturbation radius
    double epsilon = 1e-12;  // division guard
    Decay decay = Decay::Constant;

    bool operator==(const PerturbConfig&) const = default;
};

struct ScheduleConfig {
    double eta0 = 0.01;  // base learning rate
    Decay decay = Decay::Constant;

    bool operator==(const ScheduleConfig&) const = default;
};

/// Gradient-normalized ascent perturbation:
///   delta = rho * g / (||g|| + eps)
/// Its norm never exceeds rho and approaches rho once ||g|| dominates eps.
inline ParamVector sam_perturbation(const ParamVector& grad, double rho, double eps) {
    if (!all_finite(grad)) throw NonFiniteError("sam_perturbation: gradient has NaN/Inf entries");
    if (rho < 0.0) throw SpecError("sam_perturbation: rho must be >= 0");
    if (eps < 0.0) throw SpecError("sam_perturbation: eps must be >= 0");
    double n = norm(grad);
    double denom = n + eps;
    if (denom == 0.0) return ParamVector(grad.size(), 0.0);
    return scale(rho / denom, grad);
}

struct StepSizes {
    double eta = 0.0;
    double rho = 0.0;
};

/// Step-t learning rate and radius. InverseSqrt divides both bases by
/// sqrt(t); Constant returns them untouched. Steps count from 1.
inline StepSizes schedule(std::size_t t, const ScheduleConfig& cfg, const PerturbConfig& pcfg) {
    if (t == 0) throw SpecError("schedule: step index starts at 1");
    StepSizes s{cfg.eta0, pcfg.rho0};
    double inv_sqrt_t = 1.0 / std::sqrt(static_cast<double>(t));
    if (cfg.decay == Decay::InverseSqrt) s.eta = cfg.eta0 * inv_sqrt_t;
    if (pcfg.decay == Decay::InverseSqrt) s.rho = pcfg.rho0 * inv_sqrt_t;
    return s;
}

}  // namespace sharpmin
