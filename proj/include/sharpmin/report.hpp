#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sharpmin/config.hpp"
#include "sharpmin/errors.hpp"

namespace sharpmin {

/// One (seed, target-domain) experiment cell. Analytic tasks use
/// target_domain = -1 and NaN accuracies (serialized as null / empty).
struct CellResult {
    std::uint64_t seed = 0;
    int target_domain = -1;
    double train_loss = std::numeric_limits<double>::quiet_NaN();
    double val_accuracy = std::numeric_limits<double>::quiet_NaN();
    double test_accuracy = std::numeric_limits<double>::quiet_NaN();
    double grad_sq_norm = std::numeric_limits<double>::quiet_NaN();
    double lambda_max = std::numeric_limits<double>::quiet_NaN();
    double metric_spectral = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::pair<double, double>> metric_fd;
    bool diverged = false;
    std::string error;
};

struct Aggregate {
    std::size_t cells = 0;
    std::size_t diverged = 0;
    double mean_train_loss = std::numeric_limits<double>::quiet_NaN();
    double std_train_loss = std::numeric_limits<double>::quiet_NaN();
    double mean_val_accuracy = std::numeric_limits<double>::quiet_NaN();
    double std_val_accuracy = std::numeric_limits<double>::quiet_NaN();
    double mean_test_accuracy = std::numeric_limits<double>::quiet_NaN();
    double std_test_accuracy = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (xs.empty()) return {nan, nan};
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    if (xs.size() == 1) return {mean, 0.0};
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

}  // namespace detail

/// Mean and sample standard deviation over the non-diverged cells; always
/// recomputable from the per-cell entries.
inline Aggregate aggregate_cells(const std::vector<CellResult>& cells) {
    Aggregate agg;
    agg.cells = cells.size();
    std::vector<double> losses, vals, tests;
    for (const auto& c : cells) {
        if (c.diverged) {
            ++agg.diverged;
            continue;
        }
        if (std::isfinite(c.train_loss)) losses.push_back(c.train_loss);
        if (std::isfinite(c.val_accuracy)) vals.push_back(c.val_accuracy);
        if (std::isfinite(c.test_accuracy)) tests.push_back(c.test_accuracy);
    }
    std::tie(agg.mean_train_loss, agg.std_train_loss) = detail::mean_std(losses);
    std::tie(agg.mean_val_accuracy, agg.std_val_accuracy) = detail::mean_std(vals);
    std::tie(agg.mean_test_accuracy, agg.std_test_accuracy) = detail::mean_std(tests);
    return agg;
}

/// Full experiment output. Wall-clock time lives here in memory but is
/// emitted into a separate timing.json sidecar, so every data file stays
/// bitwise reproducible across identical runs.
struct RunReport {
    ExperimentConfig config;
    std::vector<CellResult> cells;
    Aggregate aggregate;
    double wall_clock_seconds = 0.0;
};

namespace detail {

/// Config echo as a flat string-valued object with the canonical keys.
inline nlohmann::ordered_json config_json(const ExperimentConfig& cfg) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    std::istringstream is(emit_config(cfg));
    std::string line;
    while (std::getline(is, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        j[ConfigReader::trim(line.substr(0, eq))] = ConfigReader::trim(line.substr(eq + 1));
    }
    return j;
}

inline nlohmann::ordered_json json_or_null(double v) {
    return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

inline nlohmann::ordered_json cell_json(const CellResult& c) {
    nlohmann::ordered_json j;
    j["seed"] = c.seed;
    j["target_domain"] = c.target_domain;
    j["train_loss"] = json_or_null(c.train_loss);
    j["val_accuracy"] = json_or_null(c.val_accuracy);
    j["test_accuracy"] = json_or_null(c.test_accuracy);
    j["grad_sq_norm"] = json_or_null(c.grad_sq_norm);
    j["lambda_max"] = json_or_null(c.lambda_max);
    j["metric_spectral"] = json_or_null(c.metric_spectral);
    auto fd = nlohmann::ordered_json::array();
    for (const auto& [rho, value] : c.metric_fd) fd.push_back({{"rho", rho}, {"value", value}});
    j["metric_fd"] = fd;
    j["diverged"] = c.diverged;
    j["error"] = c.error;
    return j;
}

inline double json_double(const nlohmann::json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace detail

inline nlohmann::ordered_json report_json(const RunReport& report) {
    nlohmann::ordered_json j;
    j["config"] = detail::config_json(report.config);
    // the meta objective is the MixStyle-perturbed batch only on the batched
    // task; analytic tasks evaluate both roles on the training objective
    j["meta_objective"] = (report.config.task == TaskKind::Dg &&
                           report.config.optimizer == OptimizerKind::Mecam)
                              ? "mixstyle-batch"
                              : "train-objective";
    auto cells = nlohmann::ordered_json::array();
    for (const auto& c : report.cells) cells.push_back(detail::cell_json(c));
    j["cells"] = cells;
    nlohmann::ordered_json agg;
    agg["cells"] = report.aggregate.cells;
    agg["diverged"] = report.aggregate.diverged;
    agg["mean_train_loss"] = detail::json_or_null(report.aggregate.mean_train_loss);
    agg["std_train_loss"] = detail::json_or_null(report.aggregate.std_train_loss);
    agg["mean_val_accuracy"] = detail::json_or_null(report.aggregate.mean_val_accuracy);
    agg["std_val_accuracy"] = detail::json_or_null(report.aggregate.std_val_accuracy);
    agg["mean_test_accuracy"] = detail::json_or_null(report.aggregate.mean_test_accuracy);
    agg["std_test_accuracy"] = detail::json_or_null(report.aggregate.std_test_accuracy);
    j["aggregate"] = agg;
    return j;
}

inline RunReport parse_report_json(const nlohmann::json& j) {
    RunReport report;
    std::string cfg_text;
    for (const auto& [key, value] : j.at("config").items()) {
        cfg_text += key + " = " + value.get<std::string>() + "\n";
    }
    report.config = parse_config_text(cfg_text);
    for (const auto& cj : j.at("cells")) {
        CellResult c;
        c.seed = cj.at("seed").get<std::uint64_t>();
        c.target_domain = cj.at("target_domain").get<int>();
        c.train_loss = detail::json_double(cj.at("train_loss"));
        c.val_accuracy = detail::json_double(cj.at("val_accuracy"));
        c.test_accuracy = detail::json_double(cj.at("test_accuracy"));
        c.grad_sq_norm = detail::json_double(cj.at("grad_sq_norm"));
        c.lambda_max = detail::json_double(cj.at("lambda_max"));
        c.metric_spectral = detail::json_double(cj.at("metric_spectral"));
        for (const auto& fd : cj.at("metric_fd")) {
            c.metric_fd.emplace_back(fd.at("rho").get<double>(), fd.at("value").get<double>());
        }
        c.diverged = cj.at("diverged").get<bool>();
        c.error = cj.at("error").get<std::string>();
        report.cells.push_back(std::move(c));
    }
    report.aggregate = aggregate_cells(report.cells);
    return report;
}

inline RunReport parse_report_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open report: " + path);
    nlohmann::json j = nlohmann::json::parse(is);
    return parse_report_json(j);
}

/// Schema: one `cell` row per experiment cell, then `mean` and `std` rows
/// carrying the aggregate loss/accuracy columns. Non-finite values and
/// columns that do not apply are left empty.
inline void write_report_csv(const RunReport& report, std::ostream& os) {
    os << "row,seed,target_domain,train_loss,val_accuracy,test_accuracy,grad_sq_norm,lambda_max,"
          "metric_spectral";
    std::size_t fd_cols = report.cells.empty() ? 0 : report.cells.front().metric_fd.size();
    char buf[48];
    for (std::size_t k = 0; k < fd_cols; ++k) {
        std::snprintf(buf, sizeof(buf), ",curvature_rho_%g", report.cells.front().metric_fd[k].first);
        os << buf;
    }
    os << ",diverged\n";

    auto put = [&](double v) {
        os << ",";
        if (std::isfinite(v)) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            os << buf;
        }
    };

    for (const auto& c : report.cells) {
        os << "cell," << c.seed << "," << c.target_domain;
        put(c.train_loss);
        put(c.val_accuracy);
        put(c.test_accuracy);
        put(c.grad_sq_norm);
        put(c.lambda_max);
        put(c.metric_spectral);
        for (const auto& [rho, value] : c.metric_fd) put(value);
        os << "," << (c.diverged ? 1 : 0) << "\n";
    }

    auto aggregate_row = [&](const char* name, double loss, double val, double test) {
        os << name << ",,";
        put(loss);
        put(val);
        put(test);
        os << ",,,";  // grad_sq_norm, lambda_max, metric_spectral not aggregated
        for (std::size_t k = 0; k < fd_cols; ++k) os << ",";
        os << ",\n";
    };
    aggregate_row("mean", report.aggregate.mean_train_loss, report.aggregate.mean_val_accuracy,
                  report.aggregate.mean_test_accuracy);
    aggregate_row("std", report.aggregate.std_train_loss, report.aggregate.std_val_accuracy,
                  report.aggregate.std_test_accuracy);
}

/// Writes report.<format> plus the timing.json sidecar into out_dir,
/// creating the directory if needed. timing.json is the only output that
/// changes between identical runs.
inline void emit_report(const RunReport& report, const std::string& out_dir, OutputFormat format) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + out_dir + " (" + ec.message() + ")");

    if (format == OutputFormat::Json) {
        std::string path = (fs::path(out_dir) / "report.json").string();
        std::ofstream os(path);
        if (!os) throw IoError("cannot open for writing: " + path);
        os << report_json(report).dump(2) << "\n";
        if (!os) throw IoError("write failed: " + path);
    } else {
        std::string path = (fs::path(out_dir) / "report.csv").string();
        std::ofstream os(path);
        if (!os) throw IoError("cannot open for writing: " + path);
        write_report_csv(report, os);
        if (!os) throw IoError("write failed: " + path);
    }

    std::string tpath = (fs::path(out_dir) / "timing.json").string();
    std::ofstream ts(tpath);
    if (!ts) throw IoError("cannot open for writing: " + tpath);
    nlohmann::ordered_json tj;
    tj["wall_clock_seconds"] = report.wall_clock_seconds;
    ts << tj.dump(2) << "\n";
}

}  // namespace sharpmin
