#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "sharpmin/config.hpp"
#include "sharpmin/curvature.hpp"
#include "sharpmin/data.hpp"
#include "sharpmin/errors.hpp"
#include "sharpmin/mixstyle.hpp"
#include "sharpmin/mlp.hpp"
#include "sharpmin/objectives.hpp"
#include "sharpmin/optimizers.hpp"
#include "sharpmin/report.hpp"
#include "sharpmin/rng.hpp"

namespace sharpmin {

/// Worker count for fanning out independent experiment cells: bounded by the
/// SHARPMIN_THREADS environment variable when set, hardware otherwise.
inline std::size_t worker_count(std::size_t jobs) {
    std::size_t n = std::thread::hardware_concurrency();
    if (n == 0) n = 1;
    if (const char* env = std::getenv("SHARPMIN_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && v >= 1) n = static_cast<std::size_t>(v);
    }
    return std::min(n, std::max<std::size_t>(jobs, 1));
}

/// Runs fn(i) for i in [0, count) on a bounded pool. Each job owns all of its
/// state, so scheduling order cannot affect results; the first exception is
/// rethrown after all workers join.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn) {
    std::size_t workers = worker_count(count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto body = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// Batch-conditioned objective source for the DG task: every step samples a
// fresh mini-batch, fixes one dropout mask for the whole step, and (for
// MeCAM) builds the meta batch by MixStyle-perturbing the training batch.
// ---------------------------------------------------------------------------

class MiniBatchSource final : public ObjectiveSource {
public:
    MiniBatchSource(const MlpModel& model, const Split& split, std::size_t batch_size,
                    std::size_t channels, std::size_t positions, bool use_mixstyle,
                    double mixstyle_beta)
        : model_(&model), batcher_(split, batch_size), channels_(channels),
          positions_(positions), use_mixstyle_(use_mixstyle), mixstyle_beta_(mixstyle_beta) {}

    void advance(Rng& rng) override {
        Batch batch = batcher_.next(rng);
        std::uint64_t mask_seed = rng.next_u64();
        if (use_mixstyle_) {
            Batch meta_batch = batch;
            meta_batch.features = mixstyle_transform(batch.features, batch.size(), channels_,
                                                     positions_, rng, mixstyle_beta_);
            meta_ = std::make_unique<BoundMlpObjective>(*model_, std::move(meta_batch), mask_seed,
                                                        true);
        }
        train_ = std::make_unique<BoundMlpObjective>(*model_, std::move(batch), mask_seed, true);
    }

    const Objective& train() const override { return *train_; }
    const Objective& meta() const override { return use_mixstyle_ ? *meta_ : *train_; }

private:
    const MlpModel* model_;
    Batcher batcher_;
    std::size_t channels_;
    std::size_t positions_;
    bool use_mixstyle_;
    double mixstyle_beta_;
    std::unique_ptr<BoundMlpObjective> train_;
    std::unique_ptr<BoundMlpObjective> meta_;
};

// ---------------------------------------------------------------------------
// DG cell: train on all source domains, select the best source-validation
// checkpoint, evaluate on the held-out target domain.
// ---------------------------------------------------------------------------

struct DgCellOutput {
    CellResult cell;
    ParamVector best_theta;
    std::shared_ptr<MlpModel> model;
    Batch eval_batch;  // held-out batch used for curvature/landscape, dropout off
};

inline DgCellOutput train_dg_cell(const ExperimentConfig& cfg, std::uint64_t seed, int target,
                                  const DomainDataset& dataset, bool compute_curvature = true) {
    DgCellOutput out;
    out.cell.seed = seed;
    out.cell.target_domain = target;

    SplitTriple split = leave_one_out_split(dataset, target, cfg.val_fraction);
    MlpSpec mlp_spec{dataset.feature_dim(), cfg.mlp_hidden, dataset.classes, cfg.mlp_dropout,
                     cfg.mlp_weight_decay};
    out.model = std::make_shared<MlpModel>(mlp_spec);

    Rng cell_rng(derive_seed(seed, 100 + static_cast<std::uint64_t>(target)));
    Rng init_rng = cell_rng.fork(1);
    Rng run_rng = cell_rng.fork(2);
    Rng curv_rng = cell_rng.fork(3);

    ParamVector theta = out.model->init_params(init_rng);
    OptimizerConfig opt = cfg.optimizer_config();
    opt.validate();
    bool mixstyle = cfg.optimizer == OptimizerKind::Mecam;
    if (mixstyle && cfg.batch_size < 2) {
        throw ConfigError("mecam on the dg task needs batch_size >= 2 for MixStyle");
    }

    MiniBatchSource source(*out.model, split.train, cfg.batch_size, dataset.channels,
                           dataset.positions, mixstyle, cfg.mixstyle_beta);
    Batch val_batch = split.validation.as_batch();
    Batch test_batch = split.test.as_batch();
    Batch train_batch = split.train.as_batch();
    out.eval_batch = split.validation.head(cfg.eval_batch);

    OptimizerState state;
    double best_val = -1.0;
    ParamVector best_theta = theta;

    try {
        for (std::size_t step = 1; step <= cfg.steps; ++step) {
            source.advance(run_rng);
            StepResult res;
            switch (cfg.optimizer) {
                case OptimizerKind::Sam:
                    res = sam_step(source.train(), theta, state, opt);
                    break;
                case OptimizerKind::Mecam:
                    res = mecam_step(source.train(), source.meta(), theta, state, opt);
                    break;
                default: {
                    StepSizes s = schedule(state.t + 1, opt.schedule, opt.perturb);
                    ParamVector g = source.train().gradient(theta);
                    double loss = source.train().value(theta);
                    res.record =
                        StepRecord{state.t + 1, loss, squared_norm(g), loss, loss, s.eta, s.rho};
                    BaseKind base = cfg.optimizer == OptimizerKind::Momentum ? BaseKind::Momentum
                                    : cfg.optimizer == OptimizerKind::AdaptiveMoment
                                        ? BaseKind::AdaptiveMoment
                                        : BaseKind::Gd;
                    res.theta = base_update(base, theta, g, s.eta, state, opt);
                    break;
                }
            }
            if (!std::isfinite(res.record.loss) || res.record.loss > opt.divergence_threshold) {
                throw DivergenceError("dg cell diverged at step " + std::to_string(step), step);
            }
            theta = std::move(res.theta);

            if (step % cfg.checkpoint_every == 0 || step == cfg.steps) {
                double val_acc = out.model->accuracy(theta, val_batch);
                if (val_acc > best_val) {
                    best_val = val_acc;
                    best_theta = theta;
                }
            }
        }
    } catch (const DivergenceError& e) {
        out.cell.diverged = true;
        out.cell.error = e.what();
        out.best_theta = theta;
        return out;
    }

    out.best_theta = best_theta;
    out.cell.val_accuracy = best_val;
    out.cell.test_accuracy = out.model->accuracy(best_theta, test_batch);
    out.cell.train_loss = out.model->loss(best_theta, train_batch, 0, false);

    if (compute_curvature) {
        BoundMlpObjective eval_obj(*out.model, out.eval_batch, 0, false);
        out.cell.grad_sq_norm = squared_norm(eval_obj.gradient(best_theta));
        CurvatureReport curv = curvature_sweep(eval_obj, best_theta, cfg.curvature_rhos,
                                               cfg.perturb.epsilon, curv_rng);
        out.cell.lambda_max = curv.lambda_max;
        out.cell.metric_spectral = curv.metric_spectral;
        out.cell.metric_fd = curv.metric_fd;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Analytic tasks: one trajectory per seed on a fixed objective.
// ---------------------------------------------------------------------------

inline std::unique_ptr<Objective> make_analytic_objective(const ExperimentConfig& cfg) {
    switch (cfg.task) {
        case TaskKind::Quadratic:
            return quadratic_objective(QuadraticSpec::diagonal(cfg.quadratic_diag));
        case TaskKind::DoubleWell:
            return double_well_objective(cfg.well);
        case TaskKind::Nonconvex:
            return smooth_nonconvex_objective(cfg.nonconvex_dim);
        default:
            throw ConfigError("make_analytic_objective: dg task is batch-conditioned");
    }
}

inline ParamVector make_initial_theta(const ExperimentConfig& cfg, std::size_t dim, Rng& rng) {
    switch (cfg.init_kind) {
        case InitKind::Explicit: {
            if (cfg.init_values.size() != dim) {
                throw ConfigError("init.values: expected " + std::to_string(dim) + " entries, got " +
                                  std::to_string(cfg.init_values.size()));
            }
            return cfg.init_values;
        }
        case InitKind::Uniform: {
            ParamVector theta(dim);
            for (double& x : theta) x = rng.uniform(cfg.init_lo, cfg.init_hi);
            return theta;
        }
        case InitKind::Gaussian:
        default:
            return scale(cfg.init_scale, gaussian_vector(rng, dim));
    }
}

struct AnalyticCellOutput {
    CellResult cell;
    Trajectory trajectory;
    ParamVector final_theta;
};

inline AnalyticCellOutput run_analytic_cell(const ExperimentConfig& cfg, std::uint64_t seed) {
    AnalyticCellOutput out;
    out.cell.seed = seed;
    out.cell.target_domain = -1;

    auto obj = make_analytic_objective(cfg);
    Rng cell_rng(derive_seed(seed, 7));
    Rng init_rng = cell_rng.fork(1);
    Rng run_rng = cell_rng.fork(2);
    Rng curv_rng = cell_rng.fork(3);

    ParamVector theta0 = make_initial_theta(cfg, obj->dim(), init_rng);
    try {
        out.trajectory = run_optimizer(*obj, theta0, cfg.steps, cfg.optimizer_config(), run_rng);
    } catch (const DivergenceError& e) {
        out.cell.diverged = true;
        out.cell.error = e.what();
        return out;
    }
    out.final_theta = out.trajectory.final_theta;
    out.cell.train_loss = obj->value(out.final_theta);
    out.cell.grad_sq_norm = squared_norm(obj->gradient(out.final_theta));

    CurvatureReport curv =
        curvature_sweep(*obj, out.final_theta, cfg.curvature_rhos, cfg.perturb.epsilon, curv_rng);
    out.cell.lambda_max = curv.lambda_max;
    out.cell.metric_spectral = curv.metric_spectral;
    out.cell.metric_fd = curv.metric_fd;
    return out;
}

// ---------------------------------------------------------------------------
// Orchestration: the full (seed x target) grid for dg, or one cell per seed
// for analytic tasks. Cells run on the worker pool; divergence is recorded
// per cell and never aborts the sweep.
// ---------------------------------------------------------------------------

struct ExperimentOutput {
    RunReport report;
    std::vector<Trajectory> trajectories;  // analytic tasks only, one per seed
};

inline ExperimentOutput run_experiment_full(const ExperimentConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    ExperimentOutput out;
    out.report.config = cfg;
    if (cfg.seeds.empty()) throw ConfigError("seeds: list must be non-empty");

    if (cfg.task == TaskKind::Dg) {
        std::vector<std::pair<std::uint64_t, int>> jobs;
        for (std::uint64_t seed : cfg.seeds) {
            for (std::size_t d = 0; d < cfg.data.domains; ++d) {
                jobs.emplace_back(seed, static_cast<int>(d));
            }
        }
        // One dataset per seed, shared by that seed's cells.
        std::vector<DomainDataset> datasets(cfg.seeds.size());
        parallel_for(cfg.seeds.size(),
                     [&](std::size_t i) { datasets[i] = generate_domains(cfg.data, cfg.seeds[i]); });

        std::vector<CellResult> cells(jobs.size());
        parallel_for(jobs.size(), [&](std::size_t i) {
            auto [seed, target] = jobs[i];
            std::size_t seed_index = 0;
            for (std::size_t k = 0; k < cfg.seeds.size(); ++k) {
                if (cfg.seeds[k] == seed) seed_index = k;
            }
            cells[i] = train_dg_cell(cfg, seed, target, datasets[seed_index]).cell;
        });
        out.report.cells = std::move(cells);
    } else {
        std::vector<CellResult> cells(cfg.seeds.size());
        out.trajectories.resize(cfg.seeds.size());
        parallel_for(cfg.seeds.size(), [&](std::size_t i) {
            AnalyticCellOutput cell = run_analytic_cell(cfg, cfg.seeds[i]);
            cells[i] = cell.cell;
            out.trajectories[i] = std::move(cell.trajectory);
        });
        out.report.cells = std::move(cells);
    }

    out.report.aggregate = aggregate_cells(out.report.cells);
    out.report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

inline RunReport run_experiment(const ExperimentConfig& cfg) {
    return run_experiment_full(cfg).report;
}

}  // namespace sharpmin
