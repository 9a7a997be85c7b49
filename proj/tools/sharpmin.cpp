// Command-line driver for the sharpness-aware optimization laboratory.
//
// Subcommands: optimize, dg, curvature, landscape, sweep. Every run is a pure
// function of (config, seeds): identical invocations write identical data
// files. timing.json is the only output that varies between runs.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sharpmin/config.hpp"
#include "sharpmin/curvature.hpp"
#include "sharpmin/experiment.hpp"
#include "sharpmin/landscape.hpp"
#include "sharpmin/report.hpp"

namespace fs = std::filesystem;
using namespace sharpmin;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitIo = 4;

struct CommonArgs {
    std::string config_path;
    std::vector<std::uint64_t> seeds;
    std::string out_dir;
    std::string format;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "path to a key = value config file");
    cmd->add_option("--seed", args.seeds, "random seed (repeatable, overrides config seeds)");
    cmd->add_option("--out", args.out_dir, "output directory (overrides config out_dir)");
    cmd->add_option("--format", args.format, "report format: json or csv")
        ->check(CLI::IsMember({"json", "csv"}));
}

ExperimentConfig load_config(const CommonArgs& args) {
    ExperimentConfig cfg;
    if (!args.config_path.empty()) cfg = parse_config(args.config_path);
    if (!args.seeds.empty()) cfg.seeds = args.seeds;
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    if (args.format == "json") cfg.format = OutputFormat::Json;
    if (args.format == "csv") cfg.format = OutputFormat::Csv;
    return cfg;
}

void write_timing(const std::string& out_dir, double seconds) {
    nlohmann::ordered_json j;
    j["wall_clock_seconds"] = seconds;
    std::ofstream os((fs::path(out_dir) / "timing.json").string());
    if (!os) throw IoError("cannot write timing.json in " + out_dir);
    os << j.dump(2) << "\n";
}

void ensure_out_dir(const std::string& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + out_dir);
}

int exit_code_for(const RunReport& report) {
    if (!report.cells.empty() && report.aggregate.diverged == report.cells.size()) {
        return kExitDivergence;
    }
    return kExitOk;
}

void print_summary(const RunReport& report) {
    std::printf("cells: %zu (diverged %zu)\n", report.aggregate.cells, report.aggregate.diverged);
    if (std::isfinite(report.aggregate.mean_test_accuracy)) {
        std::printf("val accuracy:  %.4f +/- %.4f\n", report.aggregate.mean_val_accuracy,
                    report.aggregate.std_val_accuracy);
        std::printf("test accuracy: %.4f +/- %.4f\n", report.aggregate.mean_test_accuracy,
                    report.aggregate.std_test_accuracy);
    }
    if (std::isfinite(report.aggregate.mean_train_loss)) {
        std::printf("train loss:    %.6g +/- %.6g\n", report.aggregate.mean_train_loss,
                    report.aggregate.std_train_loss);
    }
}

int cmd_optimize(const CommonArgs& args) {
    ExperimentConfig cfg = load_config(args);
    if (cfg.task == TaskKind::Dg) {
        throw ConfigError("optimize runs analytic tasks (quadratic, double-well, nonconvex); "
                          "use the dg subcommand for the domain task");
    }
    ExperimentOutput out = run_experiment_full(cfg);
    ensure_out_dir(cfg.out_dir);
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
        std::string path =
            (fs::path(cfg.out_dir) / ("trajectory_seed" + std::to_string(cfg.seeds[i]) + ".csv"))
                .string();
        out.trajectories[i].to_csv(path);
    }
    emit_report(out.report, cfg.out_dir, cfg.format);
    print_summary(out.report);
    return exit_code_for(out.report);
}

int cmd_dg(const CommonArgs& args) {
    ExperimentConfig cfg = load_config(args);
    if (cfg.task != TaskKind::Dg) {
        throw ConfigError("dg subcommand requires task = dg (got '" +
                          std::string(to_string(cfg.task)) + "')");
    }
    RunReport report = run_experiment(cfg);
    emit_report(report, cfg.out_dir, cfg.format);
    if (cfg.data_export_csv) {
        for (std::uint64_t seed : cfg.seeds) {
            DomainDataset dataset = generate_domains(cfg.data, seed);
            std::string path =
                (fs::path(cfg.out_dir) / ("dataset_seed" + std::to_string(seed) + ".csv")).string();
            write_dataset_csv(dataset, path);
        }
    }
    print_summary(report);
    return exit_code_for(report);
}

/// Trains one cell (target domain 0 for the dg task) per seed and returns
/// the converged point plus an objective to probe around it. Analytic tasks
/// reuse the trajectory endpoint.
struct ProbePoint {
    ParamVector theta;
    std::unique_ptr<Objective> objective;
    bool diverged = false;
    std::string error;
};

ProbePoint trained_probe_point(const ExperimentConfig& cfg, std::uint64_t seed) {
    ProbePoint probe;
    if (cfg.task == TaskKind::Dg) {
        DomainDataset dataset = generate_domains(cfg.data, seed);
        DgCellOutput out = train_dg_cell(cfg, seed, 0, dataset);
        probe.diverged = out.cell.diverged;
        probe.error = out.cell.error;
        probe.theta = out.best_theta;
        struct OwningObjective final : Objective {
            std::shared_ptr<MlpModel> model;
            BoundMlpObjective bound;
            OwningObjective(std::shared_ptr<MlpModel> m, Batch b)
                : model(std::move(m)), bound(*model, std::move(b), 0, false) {}
            std::size_t dim() const override { return bound.dim(); }
            double value(const ParamVector& t) const override { return bound.value(t); }
            ParamVector gradient(const ParamVector& t) const override { return bound.gradient(t); }
        };
        probe.objective = std::make_unique<OwningObjective>(out.model, out.eval_batch);
    } else {
        AnalyticCellOutput out = run_analytic_cell(cfg, seed);
        probe.diverged = out.cell.diverged;
        probe.error = out.cell.error;
        probe.theta = out.final_theta;
        probe.objective = make_analytic_objective(cfg);
    }
    return probe;
}

int cmd_curvature(const CommonArgs& args) {
    ExperimentConfig cfg = load_config(args);
    ensure_out_dir(cfg.out_dir);
    auto t0 = std::chrono::steady_clock::now();
    std::size_t diverged = 0;
    for (std::uint64_t seed : cfg.seeds) {
        ProbePoint probe = trained_probe_point(cfg, seed);
        if (probe.diverged) {
            ++diverged;
            std::fprintf(stderr, "seed %llu: %s\n", static_cast<unsigned long long>(seed),
                         probe.error.c_str());
            continue;
        }
        Rng curv_rng(derive_seed(seed, 9001));
        CurvatureReport report = curvature_sweep(*probe.objective, probe.theta, cfg.curvature_rhos,
                                                 cfg.perturb.epsilon, curv_rng);
        std::string path =
            (fs::path(cfg.out_dir) / ("curvature_seed" + std::to_string(seed) + ".json")).string();
        report.write_json(path);
        std::printf("seed %llu: lambda_max %.6g, metric_spectral %.6g\n",
                    static_cast<unsigned long long>(seed), report.lambda_max,
                    report.metric_spectral);
    }
    write_timing(cfg.out_dir, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                                  .count());
    return diverged == cfg.seeds.size() ? kExitDivergence : kExitOk;
}

int cmd_landscape(const CommonArgs& args) {
    ExperimentConfig cfg = load_config(args);
    ensure_out_dir(cfg.out_dir);
    auto t0 = std::chrono::steady_clock::now();
    std::size_t diverged = 0;
    for (std::uint64_t seed : cfg.seeds) {
        ProbePoint probe = trained_probe_point(cfg, seed);
        if (probe.diverged) {
            ++diverged;
            std::fprintf(stderr, "seed %llu: %s\n", static_cast<unsigned long long>(seed),
                         probe.error.c_str());
            continue;
        }
        std::uint64_t grid_seed = derive_seed(seed, 9002);
        Rng grid_rng(grid_seed);
        LandscapeGrid grid = sample_landscape(*probe.objective, probe.theta, cfg.landscape_extent,
                                              cfg.landscape_resolution, grid_rng);
        auto stem = fs::path(cfg.out_dir) / ("landscape_seed" + std::to_string(seed));
        write_landscape_csv(grid, stem.string() + ".csv");
        write_landscape_meta(grid, grid_seed, stem.string() + "_meta.json");
        std::printf("seed %llu: center loss %.6g, mean excess %.6g\n",
                    static_cast<unsigned long long>(seed), grid.center_value(),
                    grid.mean_excess());
    }
    write_timing(cfg.out_dir, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                                  .count());
    return diverged == cfg.seeds.size() ? kExitDivergence : kExitOk;
}

int cmd_sweep(const CommonArgs& args) {
    ExperimentConfig cfg = load_config(args);
    if (cfg.task != TaskKind::Dg) {
        throw ConfigError("sweep runs the dg task; set task = dg");
    }
    cfg.optimizer = OptimizerKind::Mecam;

    // Search grid over the perturbation radius and the two gap weights,
    // keeping only beta <= alpha.
    const std::vector<double> rhos = {0.01, 0.05, 0.1, 0.2};
    const std::vector<double> alphas = {0.05, 0.1, 0.15, 0.2};
    const std::vector<double> betas = {0.05, 0.1, 0.15, 0.2};

    ensure_out_dir(cfg.out_dir);
    auto t0 = std::chrono::steady_clock::now();

    std::vector<DomainDataset> datasets(cfg.seeds.size());
    parallel_for(cfg.seeds.size(),
                 [&](std::size_t i) { datasets[i] = generate_domains(cfg.data, cfg.seeds[i]); });

    struct Combo {
        double rho, alpha, beta;
    };
    std::vector<Combo> combos;
    for (double rho : rhos) {
        for (double alpha : alphas) {
            for (double beta : betas) {
                if (beta <= alpha) combos.push_back({rho, alpha, beta});
            }
        }
    }

    struct SweepCell {
        Combo combo;
        std::uint64_t seed;
        int target;
        CellResult cell;
    };
    std::vector<SweepCell> grid;
    for (const auto& combo : combos) {
        for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
            for (std::size_t d = 0; d < cfg.data.domains; ++d) {
                grid.push_back({combo, cfg.seeds[si], static_cast<int>(d), {}});
            }
        }
    }

    parallel_for(grid.size(), [&](std::size_t i) {
        SweepCell& sc = grid[i];
        ExperimentConfig cell_cfg = cfg;
        cell_cfg.perturb.rho0 = sc.combo.rho;
        cell_cfg.alpha = sc.combo.alpha;
        cell_cfg.beta = sc.combo.beta;
        std::size_t seed_index = 0;
        for (std::size_t k = 0; k < cfg.seeds.size(); ++k) {
            if (cfg.seeds[k] == sc.seed) seed_index = k;
        }
        sc.cell = train_dg_cell(cell_cfg, sc.seed, sc.target, datasets[seed_index],
                                /*compute_curvature=*/false)
                      .cell;
    });

    char buf[256];
    std::string cells_path = (fs::path(cfg.out_dir) / "sweep.csv").string();
    {
        std::ofstream os(cells_path);
        if (!os) throw IoError("cannot open for writing: " + cells_path);
        os << "rho,alpha,beta,seed,target_domain,val_accuracy,test_accuracy,diverged\n";
        for (const auto& sc : grid) {
            std::snprintf(buf, sizeof(buf), "%g,%g,%g", sc.combo.rho, sc.combo.alpha,
                          sc.combo.beta);
            os << buf << "," << sc.seed << "," << sc.target;
            auto put = [&](double v) {
                os << ",";
                if (std::isfinite(v)) {
                    std::snprintf(buf, sizeof(buf), "%.17g", v);
                    os << buf;
                }
            };
            put(sc.cell.val_accuracy);
            put(sc.cell.test_accuracy);
            os << "," << (sc.cell.diverged ? 1 : 0) << "\n";
        }
    }

    struct Summary {
        Combo combo;
        double mean_val = 0.0, std_val = 0.0, mean_test = 0.0, std_test = 0.0;
    };
    std::vector<Summary> summaries;
    for (const auto& combo : combos) {
        std::vector<double> vals, tests;
        for (const auto& sc : grid) {
            if (sc.combo.rho == combo.rho && sc.combo.alpha == combo.alpha &&
                sc.combo.beta == combo.beta && !sc.cell.diverged) {
                vals.push_back(sc.cell.val_accuracy);
                tests.push_back(sc.cell.test_accuracy);
            }
        }
        Summary s{combo, 0, 0, 0, 0};
        std::tie(s.mean_val, s.std_val) = detail::mean_std(vals);
        std::tie(s.mean_test, s.std_test) = detail::mean_std(tests);
        summaries.push_back(s);
    }
    std::stable_sort(summaries.begin(), summaries.end(), [](const Summary& a, const Summary& b) {
        if (a.mean_val != b.mean_val) return a.mean_val > b.mean_val;
        if (a.combo.rho != b.combo.rho) return a.combo.rho < b.combo.rho;
        if (a.combo.alpha != b.combo.alpha) return a.combo.alpha < b.combo.alpha;
        return a.combo.beta < b.combo.beta;
    });

    std::string summary_path = (fs::path(cfg.out_dir) / "sweep_summary.csv").string();
    {
        std::ofstream os(summary_path);
        if (!os) throw IoError("cannot open for writing: " + summary_path);
        os << "rho,alpha,beta,mean_val_accuracy,std_val_accuracy,mean_test_accuracy,"
              "std_test_accuracy\n";
        for (const auto& s : summaries) {
            std::snprintf(buf, sizeof(buf), "%g,%g,%g,%.17g,%.17g,%.17g,%.17g", s.combo.rho,
                          s.combo.alpha, s.combo.beta, s.mean_val, s.std_val, s.mean_test,
                          s.std_test);
            os << buf << "\n";
        }
        if (!summaries.empty()) {
            std::printf("best: rho=%g alpha=%g beta=%g val=%.4f test=%.4f\n", summaries[0].combo.rho,
                        summaries[0].combo.alpha, summaries[0].combo.beta, summaries[0].mean_val,
                        summaries[0].mean_test);
        }
    }

    write_timing(cfg.out_dir, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                                  .count());
    std::size_t diverged = 0;
    for (const auto& sc : grid) {
        if (sc.cell.diverged) ++diverged;
    }
    return diverged == grid.size() && !grid.empty() ? kExitDivergence : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sharpmin: sharpness-aware optimization laboratory"};
    app.require_subcommand(1);

    CommonArgs optimize_args, dg_args, curvature_args, landscape_args, sweep_args;
    CLI::App* optimize = app.add_subcommand("optimize", "single-trajectory run on an analytic task");
    add_common(optimize, optimize_args);
    CLI::App* dg = app.add_subcommand("dg", "leave-one-domain-out sweep on the synthetic task");
    add_common(dg, dg_args);
    CLI::App* curvature = app.add_subcommand("curvature", "curvature sweep at a trained point");
    add_common(curvature, curvature_args);
    CLI::App* landscape = app.add_subcommand("landscape", "2-D loss landscape grid around a trained point");
    add_common(landscape, landscape_args);
    CLI::App* sweep = app.add_subcommand("sweep", "hyperparameter grid search for mecam");
    add_common(sweep, sweep_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (optimize->parsed()) return cmd_optimize(optimize_args);
        if (dg->parsed()) return cmd_dg(dg_args);
        if (curvature->parsed()) return cmd_curvature(curvature_args);
        if (landscape->parsed()) return cmd_landscape(landscape_args);
        if (sweep->parsed()) return cmd_sweep(sweep_args);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const IoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return kExitIo;
    } catch (const DivergenceError& e) {
        std::fprintf(stderr, "divergence: %s\n", e.what());
        return kExitDivergence;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return kExitConfig;
}
