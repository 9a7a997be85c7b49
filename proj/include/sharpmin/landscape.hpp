#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sharpmin/errors.hpp"
#include "sharpmin/objective.hpp"
#include "sharpmin/rng.hpp"
#include "sharpmin/vec.hpp"

namespace sharpmin {

/// Loss samples over a 2-D plane spanned by two orthogonal unit directions
/// around a center point. values is (2n+1) x (2n+1), row-major; the cell
/// (n, n) is the unperturbed center.
struct LandscapeGrid {
    ParamVector center;
    ParamVector dir_u;
    ParamVector dir_v;
    double extent = 1.0;
    std::size_t resolution = 25;  // grid is (2*resolution+1)^2
    std::vector<double> values;

    std::size_t side() const { return 2 * resolution + 1; }
    double at(std::size_t i, std::size_t j) const { return values[i * side() + j]; }
    double center_value() const { return at(resolution, resolution); }

    /// offset of grid index along one axis, in [-extent, extent]
    double coord(std::size_t idx) const {
        return extent * (static_cast<double>(idx) - static_cast<double>(resolution)) /
               static_cast<double>(resolution);
    }

    /// mean of (value - center value) over all cells, the flatness summary
    double mean_excess() const {
        double c = center_value();
        double s = 0.0;
        for (double v : values) s += v - c;
        return s / static_cast<double>(values.size());
    }
};

/// Samples the loss plane spanned by two random orthogonal Gaussian
/// directions (both normalized to unit length) around a converged point.
/// Collinear draws are retried up to 8 times before giving up.
inline LandscapeGrid sample_landscape(const Objective& obj, const ParamVector& center,
                                      double extent, std::size_t n, Rng& rng) {
    if (!(extent > 0.0)) throw SpecError("sample_landscape: extent must be positive");
    if (n == 0) throw SpecError("sample_landscape: resolution must be >= 1");

    LandscapeGrid grid;
    grid.center = center;
    grid.extent = extent;
    grid.resolution = n;

    grid.dir_u = normalized(gaussian_vector(rng, center.size()));
    bool ok = false;
    for (int attempt = 0; attempt < 8 && !ok; ++attempt) {
        ParamVector draw = gaussian_vector(rng, center.size());
        ParamVector v = orthogonalize(grid.dir_u, draw);
        double vn = norm(v);
        if (vn > 1e-12 * norm(draw)) {
            grid.dir_v = scale(1.0 / vn, v);
            ok = true;
        }
    }
    if (!ok) throw DegenerateDirectionError("sample_landscape: could not draw an orthogonal direction");

    const std::size_t side = grid.side();
    grid.values.resize(side * side);
    ParamVector probe(center.size());
    for (std::size_t i = 0; i < side; ++i) {
        double a = grid.coord(i);
        for (std::size_t j = 0; j < side; ++j) {
            double b = grid.coord(j);
            for (std::size_t k = 0; k < center.size(); ++k) {
                probe[k] = center[k] + a * grid.dir_u[k] + b * grid.dir_v[k];
            }
            grid.values[i * side + j] = obj.value(probe);
        }
    }
    return grid;
}

/// CSV rows a,b,loss in row-major grid order.
inline void write_landscape_csv(const LandscapeGrid& grid, std::ostream& os) {
    os << "a,b,loss\n";
    char buf[32];
    const std::size_t side = grid.side();
    for (std::size_t i = 0; i < side; ++i) {
        for (std::size_t j = 0; j < side; ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", grid.coord(i));
            os << buf << ",";
            std::snprintf(buf, sizeof(buf), "%.17g", grid.coord(j));
            os << buf << ",";
            std::snprintf(buf, sizeof(buf), "%.17g", grid.at(i, j));
            os << buf << "\n";
        }
    }
}

inline void write_landscape_csv(const LandscapeGrid& grid, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path);
    write_landscape_csv(grid, os);
    if (!os) throw IoError("write failed: " + path);
}

inline void write_landscape_meta(const LandscapeGrid& grid, std::uint64_t seed,
                                 const std::string& path) {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["extent"] = grid.extent;
    j["n"] = grid.resolution;
    j["normalization"] = "unit";
    j["center_loss"] = grid.center_value();
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << j.dump(2) << "\n";
    if (!os) throw IoError("write failed: " + path);
}

}  // namespace sharpmin
