#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sharpmin/data.hpp"
#include "sharpmin/errors.hpp"
#include "sharpmin/mlp.hpp"
#include "sharpmin/objectives.hpp"
#include "sharpmin/optimizers.hpp"

namespace sharpmin {

enum class TaskKind { Quadratic, DoubleWell, Nonconvex, Dg };
enum class OutputFormat { Json, Csv };
enum class InitKind { Gaussian, Uniform, Explicit };

/// Everything a CLI run needs. Defaults mirror the reference configuration
/// the experiments were tuned on; see README for the full key reference.
struct ExperimentConfig {
    TaskKind task = TaskKind::Dg;
    OptimizerKind optimizer = OptimizerKind::Mecam;
    BaseKind base = BaseKind::AdaptiveMoment;

    std::size_t steps = 600;
    std::size_t batch_size = 32;
    std::vector<std::uint64_t> seeds = {0, 1, 2};
    std::string out_dir = "out";
    OutputFormat format = OutputFormat::Json;

    ScheduleConfig schedule{1e-2, Decay::Constant};
    PerturbConfig perturb{0.1, 1e-12, Decay::Constant};
    double alpha = 0.1;
    double beta = 0.1;
    double momentum = 0.9;

    DomainDatasetSpec data;
    double val_fraction = 0.2;
    bool data_export_csv = false;  // dg writes dataset_seed<S>.csv when set

    std::size_t mlp_hidden = 32;
    double mlp_dropout = 0.5;
    double mlp_weight_decay = 1e-4;
    double mixstyle_beta = 0.1;

    std::size_t checkpoint_every = 50;
    std::size_t eval_batch = 256;

    InitKind init_kind = InitKind::Gaussian;
    double init_scale = 1.0;
    double init_lo = -0.5;
    double init_hi = 1.5;
    std::vector<double> init_values;

    std::size_t nonconvex_dim = 10;
    std::vector<double> quadratic_diag = {1.0, 4.0};
    DoubleWellSpec well;

    double landscape_extent = 1.0;
    std::size_t landscape_resolution = 25;
    std::vector<double> curvature_rhos = {0.01, 0.05, 0.1, 0.2, 0.5};

    OptimizerConfig optimizer_config() const {
        OptimizerConfig cfg;
        cfg.kind = optimizer;
        cfg.base = base;
        cfg.schedule = schedule;
        cfg.perturb = perturb;
        cfg.alpha = alpha;
        cfg.beta = beta;
        cfg.momentum = momentum;
        return cfg;
    }

    bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {

struct ConfigEntry {
    std::string value;
    std::size_t line = 0;
    bool consumed = false;
};

class ConfigReader {
public:
    explicit ConfigReader(const std::string& text) {
        std::istringstream in(text);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            std::string trimmed = trim(line);
            if (trimmed.empty() || trimmed[0] == '#') continue;
            auto eq = trimmed.find('=');
            if (eq == std::string::npos) {
                throw ConfigError("line " + std::to_string(lineno) +
                                  ": expected 'key = value', got '" + trimmed + "'");
            }
            std::string key = trim(trimmed.substr(0, eq));
            std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty()) {
                throw ConfigError("line " + std::to_string(lineno) + ": empty key");
            }
            if (entries_.count(key)) {
                throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key +
                                  "' (first set on line " + std::to_string(entries_[key].line) + ")");
            }
            entries_[key] = ConfigEntry{value, lineno, false};
        }
    }

    bool has(const std::string& key) const { return entries_.count(key) != 0; }

    bool fetch(const std::string& key, std::string& out, std::size_t& line) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return false;
        it->second.consumed = true;
        out = it->second.value;
        line = it->second.line;
        return true;
    }

    void reject_unknown() const {
        for (const auto& [key, entry] : entries_) {
            if (!entry.consumed) {
                throw ConfigError("line " + std::to_string(entry.line) + ": unknown key '" + key +
                                  "'");
            }
        }
    }

    static std::string trim(const std::string& s) {
        std::size_t b = 0, e = s.size();
        while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
        return s.substr(b, e - b);
    }

private:
    std::map<std::string, ConfigEntry> entries_;
};

inline double parse_double(const std::string& key, const std::string& value, std::size_t line) {
    try {
        std::size_t pos = 0;
        double d = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return d;
    } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(line) + ": key '" + key +
                          "': expected a real number, got '" + value + "'");
    }
}

inline long long parse_int(const std::string& key, const std::string& value, std::size_t line) {
    try {
        std::size_t pos = 0;
        long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(line) + ": key '" + key +
                          "': expected an integer, got '" + value + "'");
    }
}

inline std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> parts;
    std::stringstream ss(value);
    std::string cell;
    while (std::getline(ss, cell, ',')) parts.push_back(ConfigReader::trim(cell));
    return parts;
}

}  // namespace detail

/// Parses the flat key = value configuration format. Unknown keys, duplicate
/// keys, type mismatches, and constraint violations each raise ConfigError
/// with the offending key and line number.
inline ExperimentConfig parse_config_text(const std::string& text) {
    detail::ConfigReader reader(text);
    ExperimentConfig cfg;

    std::string value;
    std::size_t line = 0;

    auto get_double = [&](const std::string& key, double& out) {
        if (reader.fetch(key, value, line)) out = detail::parse_double(key, value, line);
    };
    auto get_size = [&](const std::string& key, std::size_t& out, long long min_value) {
        if (reader.fetch(key, value, line)) {
            long long v = detail::parse_int(key, value, line);
            if (v < min_value) {
                throw ConfigError("line " + std::to_string(line) + ": key '" + key +
                                  "': must be >= " + std::to_string(min_value));
            }
            out = static_cast<std::size_t>(v);
        }
    };
    auto get_enum = [&](const std::string& key, const std::vector<std::pair<std::string, int>>& names,
                        int& out) {
        if (!reader.fetch(key, value, line)) return;
        for (const auto& [name, id] : names) {
            if (value == name) {
                out = id;
                return;
            }
        }
        std::string allowed;
        for (const auto& [name, id] : names) allowed += (allowed.empty() ? "" : ", ") + name;
        throw ConfigError("line " + std::to_string(line) + ": key '" + key + "': got '" + value +
                          "', expected one of: " + allowed);
    };

    int task = static_cast<int>(cfg.task);
    get_enum("task",
             {{"quadratic", 0}, {"double-well", 1}, {"nonconvex", 2}, {"dg", 3}}, task);
    cfg.task = static_cast<TaskKind>(task);

    int opt = static_cast<int>(cfg.optimizer);
    get_enum("optimizer",
             {{"gd", 0}, {"momentum", 1}, {"adaptive-moment", 2}, {"sam", 3}, {"mecam", 4}}, opt);
    cfg.optimizer = static_cast<OptimizerKind>(opt);

    int base = static_cast<int>(cfg.base);
    get_enum("base", {{"gd", 0}, {"momentum", 1}, {"adaptive-moment", 2}}, base);
    cfg.base = static_cast<BaseKind>(base);

    get_size("steps", cfg.steps, 1);
    get_size("batch_size", cfg.batch_size, 1);

    std::size_t seeds_line = 0;
    if (reader.fetch("seeds", value, seeds_line)) {
        cfg.seeds.clear();
        for (const auto& cell : detail::split_list(value)) {
            long long v = detail::parse_int("seeds", cell, seeds_line);
            if (v < 0) {
                throw ConfigError("line " + std::to_string(seeds_line) +
                                  ": key 'seeds': seeds must be nonnegative");
            }
            cfg.seeds.push_back(static_cast<std::uint64_t>(v));
        }
        if (cfg.seeds.empty()) {
            throw ConfigError("line " + std::to_string(seeds_line) +
                              ": key 'seeds': list must be non-empty");
        }
    }

    if (reader.fetch("out_dir", value, line)) cfg.out_dir = value;

    int format = static_cast<int>(cfg.format);
    get_enum("format", {{"json", 0}, {"csv", 1}}, format);
    cfg.format = static_cast<OutputFormat>(format);

    get_double("schedule.eta0", cfg.schedule.eta0);
    int decay = static_cast<int>(cfg.schedule.decay);
    get_enum("schedule.decay", {{"constant", 0}, {"inverse-sqrt", 1}}, decay);
    cfg.schedule.decay = static_cast<Decay>(decay);

    get_double("perturb.rho0", cfg.perturb.rho0);
    get_double("perturb.epsilon", cfg.perturb.epsilon);
    decay = static_cast<int>(cfg.perturb.decay);
    get_enum("perturb.decay", {{"constant", 0}, {"inverse-sqrt", 1}}, decay);
    cfg.perturb.decay = static_cast<Decay>(decay);

    std::size_t alpha_line = 0, beta_line = 0;
    bool alpha_set = false, beta_set = false;
    if (reader.fetch("mecam.alpha", value, alpha_line)) {
        cfg.alpha = detail::parse_double("mecam.alpha", value, alpha_line);
        alpha_set = true;
    }
    if (reader.fetch("mecam.beta", value, beta_line)) {
        cfg.beta = detail::parse_double("mecam.beta", value, beta_line);
        beta_set = true;
    }
    if (cfg.optimizer != OptimizerKind::Mecam && (alpha_set || beta_set)) {
        throw ConfigError("line " + std::to_string(alpha_set ? alpha_line : beta_line) +
                          ": key '" + std::string(alpha_set ? "mecam.alpha" : "mecam.beta") +
                          "': only meaningful when optimizer = mecam");
    }
    if (cfg.optimizer == OptimizerKind::Mecam && cfg.beta > cfg.alpha) {
        throw ConfigError("constraint violated: mecam.beta (" + std::to_string(cfg.beta) +
                          ") must not exceed mecam.alpha (" + std::to_string(cfg.alpha) + ")");
    }

    get_double("momentum", cfg.momentum);

    get_size("data.classes", cfg.data.classes, 2);
    get_size("data.domains", cfg.data.domains, 3);
    get_size("data.per_domain", cfg.data.per_domain, 2);
    get_size("data.channels", cfg.data.channels, 1);
    get_size("data.positions", cfg.data.positions, 2);
    get_double("data.style_spread", cfg.data.style_spread);
    get_double("data.class_separation", cfg.data.class_separation);
    get_double("data.latent_noise", cfg.data.latent_noise);
    get_double("data.val_fraction", cfg.val_fraction);
    if (!(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0)) {
        throw ConfigError("key 'data.val_fraction': must lie in (0, 1)");
    }
    if (reader.fetch("data.export_csv", value, line)) {
        if (value == "true") {
            cfg.data_export_csv = true;
        } else if (value == "false") {
            cfg.data_export_csv = false;
        } else {
            throw ConfigError("line " + std::to_string(line) +
                              ": key 'data.export_csv': expected true or false, got '" + value +
                              "'");
        }
    }

    get_size("mlp.hidden", cfg.mlp_hidden, 0);
    get_double("mlp.dropout", cfg.mlp_dropout);
    get_double("mlp.weight_decay", cfg.mlp_weight_decay);
    get_double("mixstyle.beta_param", cfg.mixstyle_beta);

    get_size("dg.checkpoint_every", cfg.checkpoint_every, 1);
    get_size("dg.eval_batch", cfg.eval_batch, 1);

    int init = static_cast<int>(cfg.init_kind);
    get_enum("init.kind", {{"gaussian", 0}, {"uniform", 1}, {"explicit", 2}}, init);
    cfg.init_kind = static_cast<InitKind>(init);
    get_double("init.scale", cfg.init_scale);
    get_double("init.lo", cfg.init_lo);
    get_double("init.hi", cfg.init_hi);
    if (reader.fetch("init.values", value, line)) {
        cfg.init_values.clear();
        for (const auto& cell : detail::split_list(value)) {
            cfg.init_values.push_back(detail::parse_double("init.values", cell, line));
        }
    }

    get_size("nonconvex.dim", cfg.nonconvex_dim, 2);
    if (reader.fetch("quadratic.diag", value, line)) {
        cfg.quadratic_diag.clear();
        for (const auto& cell : detail::split_list(value)) {
            cfg.quadratic_diag.push_back(detail::parse_double("quadratic.diag", cell, line));
        }
        if (cfg.quadratic_diag.empty()) {
            throw ConfigError("line " + std::to_string(line) + ": key 'quadratic.diag': empty list");
        }
    }

    get_double("well.sharp_center", cfg.well.sharp_center);
    get_double("well.flat_center", cfg.well.flat_center);
    get_double("well.sharp_curvature", cfg.well.sharp_curvature);
    get_double("well.flat_curvature", cfg.well.flat_curvature);
    get_double("well.sharp_depth", cfg.well.sharp_depth);
    get_double("well.flat_depth", cfg.well.flat_depth);
    get_double("well.blend_margin", cfg.well.blend_margin);

    get_double("landscape.extent", cfg.landscape_extent);
    get_size("landscape.resolution", cfg.landscape_resolution, 1);
    if (reader.fetch("curvature.rhos", value, line)) {
        cfg.curvature_rhos.clear();
        for (const auto& cell : detail::split_list(value)) {
            double rho = detail::parse_double("curvature.rhos", cell, line);
            if (!(rho > 0.0)) {
                throw ConfigError("line " + std::to_string(line) +
                                  ": key 'curvature.rhos': all entries must be positive");
            }
            cfg.curvature_rhos.push_back(rho);
        }
        if (cfg.curvature_rhos.empty()) {
            throw ConfigError("line " + std::to_string(line) + ": key 'curvature.rhos': empty list");
        }
    }

    reader.reject_unknown();
    cfg.optimizer_config().validate();
    return cfg;
}

inline ExperimentConfig parse_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config file: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config_text(ss.str());
}

namespace detail {

inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

template <typename T>
std::string fmt_list(const std::vector<T>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ",";
        if constexpr (std::is_same_v<T, double>) {
            out += fmt_double(values[i]);
        } else {
            out += std::to_string(values[i]);
        }
    }
    return out;
}

}  // namespace detail

inline const char* to_string(TaskKind t) {
    switch (t) {
        case TaskKind::Quadratic: return "quadratic";
        case TaskKind::DoubleWell: return "double-well";
        case TaskKind::Nonconvex: return "nonconvex";
        case TaskKind::Dg: default: return "dg";
    }
}

inline const char* to_string(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::Gd: return "gd";
        case OptimizerKind::Momentum: return "momentum";
        case OptimizerKind::AdaptiveMoment: return "adaptive-moment";
        case OptimizerKind::Sam: return "sam";
        case OptimizerKind::Mecam: default: return "mecam";
    }
}

inline const char* to_string(BaseKind k) {
    switch (k) {
        case BaseKind::Gd: return "gd";
        case BaseKind::Momentum: return "momentum";
        case BaseKind::AdaptiveMoment: default: return "adaptive-moment";
    }
}

inline const char* to_string(Decay d) {
    return d == Decay::InverseSqrt ? "inverse-sqrt" : "constant";
}

inline const char* to_string(OutputFormat f) { return f == OutputFormat::Csv ? "csv" : "json"; }

inline const char* to_string(InitKind k) {
    switch (k) {
        case InitKind::Uniform: return "uniform";
        case InitKind::Explicit: return "explicit";
        case InitKind::Gaussian: default: return "gaussian";
    }
}

/// Canonical emission; parse_config_text(emit_config(cfg)) == cfg.
inline std::string emit_config(const ExperimentConfig& cfg) {
    using detail::fmt_double;
    using detail::fmt_list;
    std::ostringstream os;
    os << "task = " << to_string(cfg.task) << "\n";
    os << "optimizer = " << to_string(cfg.optimizer) << "\n";
    os << "base = " << to_string(cfg.base) << "\n";
    os << "steps = " << cfg.steps << "\n";
    os << "batch_size = " << cfg.batch_size << "\n";
    os << "seeds = " << fmt_list(cfg.seeds) << "\n";
    os << "out_dir = " << cfg.out_dir << "\n";
    os << "format = " << to_string(cfg.format) << "\n";
    os << "schedule.eta0 = " << fmt_double(cfg.schedule.eta0) << "\n";
    os << "schedule.decay = " << to_string(cfg.schedule.decay) << "\n";
    os << "perturb.rho0 = " << fmt_double(cfg.perturb.rho0) << "\n";
    os << "perturb.epsilon = " << fmt_double(cfg.perturb.epsilon) << "\n";
    os << "perturb.decay = " << to_string(cfg.perturb.decay) << "\n";
    if (cfg.optimizer == OptimizerKind::Mecam) {
        os << "mecam.alpha = " << fmt_double(cfg.alpha) << "\n";
        os << "mecam.beta = " << fmt_double(cfg.beta) << "\n";
    }
    os << "momentum = " << fmt_double(cfg.momentum) << "\n";
    os << "data.classes = " << cfg.data.classes << "\n";
    os << "data.domains = " << cfg.data.domains << "\n";
    os << "data.per_domain = " << cfg.data.per_domain << "\n";
    os << "data.channels = " << cfg.data.channels << "\n";
    os << "data.positions = " << cfg.data.positions << "\n";
    os << "data.style_spread = " << fmt_double(cfg.data.style_spread) << "\n";
    os << "data.class_separation = " << fmt_double(cfg.data.class_separation) << "\n";
    os << "data.latent_noise = " << fmt_double(cfg.data.latent_noise) << "\n";
    os << "data.val_fraction = " << fmt_double(cfg.val_fraction) << "\n";
    os << "data.export_csv = " << (cfg.data_export_csv ? "true" : "false") << "\n";
    os << "mlp.hidden = " << cfg.mlp_hidden << "\n";
    os << "mlp.dropout = " << fmt_double(cfg.mlp_dropout) << "\n";
    os << "mlp.weight_decay = " << fmt_double(cfg.mlp_weight_decay) << "\n";
    os << "mixstyle.beta_param = " << fmt_double(cfg.mixstyle_beta) << "\n";
    os << "dg.checkpoint_every = " << cfg.checkpoint_every << "\n";
    os << "dg.eval_batch = " << cfg.eval_batch << "\n";
    os << "init.kind = " << to_string(cfg.init_kind) << "\n";
    os << "init.scale = " << fmt_double(cfg.init_scale) << "\n";
    os << "init.lo = " << fmt_double(cfg.init_lo) << "\n";
    os << "init.hi = " << fmt_double(cfg.init_hi) << "\n";
    if (!cfg.init_values.empty()) os << "init.values = " << fmt_list(cfg.init_values) << "\n";
    os << "nonconvex.dim = " << cfg.nonconvex_dim << "\n";
    os << "quadratic.diag = " << fmt_list(cfg.quadratic_diag) << "\n";
    os << "well.sharp_center = " << fmt_double(cfg.well.sharp_center) << "\n";
    os << "well.flat_center = " << fmt_double(cfg.well.flat_center) << "\n";
    os << "well.sharp_curvature = " << fmt_double(cfg.well.sharp_curvature) << "\n";
    os << "well.flat_curvature = " << fmt_double(cfg.well.flat_curvature) << "\n";
    os << "well.sharp_depth = " << fmt_double(cfg.well.sharp_depth) << "\n";
    os << "well.flat_depth = " << fmt_double(cfg.well.flat_depth) << "\n";
    os << "well.blend_margin = " << fmt_double(cfg.well.blend_margin) << "\n";
    os << "landscape.extent = " << fmt_double(cfg.landscape_extent) << "\n";
    os << "landscape.resolution = " << cfg.landscape_resolution << "\n";
    os << "curvature.rhos = " << fmt_list(cfg.curvature_rhos) << "\n";
    return os.str();
}

}  // namespace sharpmin
