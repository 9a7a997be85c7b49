#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "sharpmin/errors.hpp"
#include "sharpmin/objective.hpp"
#include "sharpmin/perturbation.hpp"
#include "sharpmin/rng.hpp"
#include "sharpmin/vec.hpp"

namespace sharpmin {

enum class BaseKind { Gd, Momentum, AdaptiveMoment };
enum class OptimizerKind { Gd, Momentum, AdaptiveMoment, Sam, Mecam };

/// Full optimizer configuration. alpha/beta weight the two surrogate-gap
/// gradients and only apply to the Mecam kind; base selects the update rule
/// the combined gradient is handed to.
struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Gd;
    BaseKind base = BaseKind::Gd;
    ScheduleConfig schedule;
    PerturbConfig perturb;
    double alpha = 0.1;
    double beta = 0.1;
    double momentum = 0.9;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_guard = 1e-8;
    double divergence_threshold = 1e12;

    void validate() const {
        if (kind == OptimizerKind::Mecam) {
            if (!(alpha > 0.0 && alpha < 1.0) || !(beta > 0.0 && beta < 1.0)) {
                throw ConfigError("mecam: alpha and beta must lie in (0, 1)");
            }
            if (beta > alpha) {
                throw ConfigError("mecam: beta (" + std::to_string(beta) +
                                  ") must not exceed alpha (" + std::to_string(alpha) + ")");
            }
            if (!(alpha + beta < 1.0)) {
                throw ConfigError("mecam: alpha + beta must stay below 1");
            }
        }
        if (!(schedule.eta0 > 0.0)) throw ConfigError("schedule.eta0 must be positive");
        if (!(perturb.rho0 >= 0.0)) throw ConfigError("perturb.rho0 must be >= 0");
        if (!(perturb.epsilon > 0.0)) throw ConfigError("perturb.epsilon must be positive");
        if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
        if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0)) {
            throw ConfigError("adaptive-moment decay rates must lie in (0, 1)");
        }
    }
};

/// Mutable per-run record: step counter plus whichever moment buffers the
/// base update rule needs. Buffers are lazily sized on first use.
struct OptimizerState {
    std::size_t t = 0;
    ParamVector momentum_buf;
    ParamVector m1;
    ParamVector m2;
};

inline ParamVector gd_step(const ParamVector& theta, const ParamVector& grad, double eta,
                           OptimizerState& state, double momentum = 0.0) {
    require_same_dim(theta, grad, "gd_step");
    state.t += 1;
    if (momentum > 0.0) {
        if (state.momentum_buf.empty()) state.momentum_buf.assign(theta.size(), 0.0);
        require_same_dim(state.momentum_buf, grad, "gd_step momentum buffer");
        for (std::size_t i = 0; i < grad.size(); ++i) {
            state.momentum_buf[i] = momentum * state.momentum_buf[i] + grad[i];
        }
        return add_scaled(theta, -eta, state.momentum_buf);
    }
    return add_scaled(theta, -eta, grad);
}

/// Bias-corrected first/second moment update (Adam).
inline ParamVector adaptive_moment_step(const ParamVector& theta, const ParamVector& grad,
                                        double eta, OptimizerState& state, double beta1 = 0.9,
                                        double beta2 = 0.999, double guard = 1e-8) {
    require_same_dim(theta, grad, "adaptive_moment_step");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
        throw ConfigError("adaptive_moment_step: decay rates must lie in (0, 1)");
    }
    if (state.m1.empty()) state.m1.assign(theta.size(), 0.0);
    if (state.m2.empty()) state.m2.assign(theta.size(), 0.0);
    require_same_dim(state.m1, grad, "adaptive_moment_step buffers");
    state.t += 1;
    double t = static_cast<double>(state.t);
    double c1 = 1.0 - std::pow(beta1, t);
    double c2 = 1.0 - std::pow(beta2, t);
    ParamVector out(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        state.m1[i] = beta1 * state.m1[i] + (1.0 - beta1) * grad[i];
        state.m2[i] = beta2 * state.m2[i] + (1.0 - beta2) * grad[i] * grad[i];
        double mhat = state.m1[i] / c1;
        double vhat = state.m2[i] / c2;
        out[i] = theta[i] - eta * mhat / (std::sqrt(vhat) + guard);
    }
    return out;
}

inline ParamVector base_update(BaseKind base, const ParamVector& theta, const ParamVector& grad,
                               double eta, OptimizerState& state, const OptimizerConfig& cfg) {
    switch (base) {
        case BaseKind::Momentum:
            return gd_step(theta, grad, eta, state, cfg.momentum);
        case BaseKind::AdaptiveMoment:
            return adaptive_moment_step(theta, grad, eta, state, cfg.adam_beta1, cfg.adam_beta2,
                                        cfg.adam_guard);
        case BaseKind::Gd:
        default:
            return gd_step(theta, grad, eta, state, 0.0);
    }
}

/// Combined descent direction
///   g = g0 + alpha (g_sam - g0) + beta (g_meta - g0),
/// the surrogate-gap rearrangement of (1-alpha-beta) g0 + alpha g_sam +
/// beta g_meta. Written this way the reductions are exact: alpha = beta = 0
/// returns g0 unchanged, and when all three gradients coincide (rho = 0) the
/// correction terms vanish identically.
inline ParamVector combine_gradients(const ParamVector& g0, const ParamVector& g_sam,
                                     const ParamVector& g_meta, double alpha, double beta) {
    require_same_dim(g0, g_sam, "combine_gradients");
    require_same_dim(g0, g_meta, "combine_gradients");
    ParamVector out = g0;
    if (alpha != 0.0) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += alpha * (g_sam[i] - g0[i]);
    }
    if (beta != 0.0) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += beta * (g_meta[i] - g0[i]);
    }
    return out;
}

/// Per-step trajectory record. For plain gd/momentum/adaptive-moment steps
/// the perturbed losses equal the vanilla loss (delta = 0 by definition).
struct StepRecord {
    std::size_t t = 0;
    double loss = 0.0;
    double grad_sq_norm = 0.0;
    double loss_sam = 0.0;
    double loss_meta = 0.0;
    double eta = 0.0;
    double rho = 0.0;
};

struct StepResult {
    ParamVector theta;
    StepRecord record;
};

/// One SAM step: ascend along the normalized gradient, descend with the
/// gradient taken at the perturbed point.
inline StepResult sam_step(const Objective& obj, const ParamVector& theta, OptimizerState& state,
                           const OptimizerConfig& cfg) {
    StepSizes s = schedule(state.t + 1, cfg.schedule, cfg.perturb);
    ParamVector g0 = obj.gradient(theta);
    ParamVector delta = sam_perturbation(g0, s.rho, cfg.perturb.epsilon);
    ParamVector theta_up = add(theta, delta);
    ParamVector g_sam = obj.gradient(theta_up);

    StepResult res;
    res.record = StepRecord{state.t + 1, obj.value(theta), squared_norm(g0), obj.value(theta_up),
                            obj.value(theta), s.eta, s.rho};
    res.theta = base_update(cfg.base, theta, g_sam, s.eta, state, cfg);
    return res;
}

/// One MeCAM step:
///   g0     on the training batch at theta
///   delta  = rho_t * g0 / (||g0|| + eps)
///   g_sam  on the training batch at theta + delta
///   g_meta on the style-perturbed meta batch at theta - delta
///   theta' = base update with g0 + alpha (g_sam - g0) + beta (g_meta - g0)
inline StepResult mecam_step(const Objective& train_obj, const Objective& meta_obj,
                             const ParamVector& theta, OptimizerState& state,
                             const OptimizerConfig& cfg) {
    if (cfg.beta > cfg.alpha) {
        throw ConfigError("mecam_step: beta must not exceed alpha");
    }
    StepSizes s = schedule(state.t + 1, cfg.schedule, cfg.perturb);
    ParamVector g0 = train_obj.gradient(theta);
    ParamVector delta = sam_perturbation(g0, s.rho, cfg.perturb.epsilon);
    ParamVector theta_up = add(theta, delta);
    ParamVector theta_down = sub(theta, delta);
    ParamVector g_sam = train_obj.gradient(theta_up);
    ParamVector g_meta = meta_obj.gradient(theta_down);
    ParamVector combined = combine_gradients(g0, g_sam, g_meta, cfg.alpha, cfg.beta);

    StepResult res;
    res.record = StepRecord{state.t + 1,
                            train_obj.value(theta),
                            squared_norm(g0),
                            train_obj.value(theta_up),
                            meta_obj.value(theta_down),
                            s.eta,
                            s.rho};
    res.theta = base_update(cfg.base, theta, combined, s.eta, state, cfg);
    return res;
}

struct Trajectory {
    std::vector<StepRecord> records;
    ParamVector final_theta;

    void to_csv(std::ostream& os) const {
        os << "t,loss,grad_sq_norm,loss_sam,loss_meta,eta,rho\n";
        char buf[32];
        for (const auto& r : records) {
            os << r.t;
            for (double v : {r.loss, r.grad_sq_norm, r.loss_sam, r.loss_meta, r.eta, r.rho}) {
                std::snprintf(buf, sizeof(buf), "%.17g", v);
                os << "," << buf;
            }
            os << "\n";
        }
    }

    void to_csv(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw IoError("cannot open for writing: " + path);
        to_csv(os);
        if (!os) throw IoError("write failed: " + path);
    }
};

/// Supplies the per-step train/meta objectives. Analytic tasks return one
/// fixed objective for both roles; the minibatch source in experiment.hpp
/// rebinds fresh batches (and a MixStyle meta batch) every step.
class ObjectiveSource {
public:
    virtual ~ObjectiveSource() = default;
    virtual void advance(Rng& rng) { (void)rng; }
    virtual const Objective& train() const = 0;
    virtual const Objective& meta() const = 0;
};

class FixedObjectiveSource final : public ObjectiveSource {
public:
    explicit FixedObjectiveSource(const Objective& obj) : obj_(&obj) {}
    const Objective& train() const override { return *obj_; }
    const Objective& meta() const override { return *obj_; }

private:
    const Objective* obj_;
};

/// Runs T steps of the configured optimizer and records the trajectory.
/// Aborts with DivergenceError (carrying the step index) as soon as the loss
/// goes non-finite or above the divergence threshold.
inline Trajectory run_optimizer(ObjectiveSource& source, const ParamVector& theta0,
                                std::size_t steps, const OptimizerConfig& cfg, Rng& rng) {
    if (steps == 0) throw SpecError("run_optimizer: steps must be >= 1");
    cfg.validate();

    Trajectory traj;
    traj.records.reserve(steps);
    ParamVector theta = theta0;
    OptimizerState state;

    for (std::size_t step = 0; step < steps; ++step) {
        source.advance(rng);
        const Objective& train = source.train();
        const Objective& meta = source.meta();

        StepResult res;
        switch (cfg.kind) {
            case OptimizerKind::Sam:
                res = sam_step(train, theta, state, cfg);
                break;
            case OptimizerKind::Mecam:
                res = mecam_step(train, meta, theta, state, cfg);
                break;
            default: {
                StepSizes s = schedule(state.t + 1, cfg.schedule, cfg.perturb);
                ParamVector g = train.gradient(theta);
                double loss = train.value(theta);
                res.record = StepRecord{state.t + 1, loss, squared_norm(g), loss, loss, s.eta, s.rho};
                BaseKind base = cfg.kind == OptimizerKind::Momentum       ? BaseKind::Momentum
                                : cfg.kind == OptimizerKind::AdaptiveMoment ? BaseKind::AdaptiveMoment
                                                                            : BaseKind::Gd;
                res.theta = base_update(base, theta, g, s.eta, state, cfg);
                break;
            }
        }

        if (!std::isfinite(res.record.loss) || res.record.loss > cfg.divergence_threshold) {
            throw DivergenceError("run_optimizer: loss diverged at step " +
                                      std::to_string(res.record.t),
                                  res.record.t);
        }
        traj.records.push_back(res.record);
        theta = std::move(res.theta);
    }
    traj.final_theta = std::move(theta);
    return traj;
}

inline Trajectory run_optimizer(const Objective& obj, const ParamVector& theta0,
                                std::size_t steps, const OptimizerConfig& cfg, Rng& rng) {
    FixedObjectiveSource source(obj);
    return run_optimizer(source, theta0, steps, cfg, rng);
}

}  // namespace sharpmin
