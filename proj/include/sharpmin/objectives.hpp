#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <utility>
#include <vector>

#include "sharpmin/errors.hpp"
#include "sharpmin/objective.hpp"
#include "sharpmin/vec.hpp"

namespace sharpmin {

// ---------------------------------------------------------------------------
// Quadratic bowl f(x) = 1/2 x'Ax with symmetric A. Gradient Ax, Hessian A.
// Serves as the exactness oracle for the curvature machinery: second
// differences and Hessian-vector products have no truncation error here.
// ---------------------------------------------------------------------------

struct QuadraticSpec {
    std::size_t dim = 0;
    std::vector<double> matrix;  // row-major dim x dim

    static QuadraticSpec diagonal(const std::vector<double>& diag) {
        QuadraticSpec spec;
        spec.dim = diag.size();
        spec.matrix.assign(diag.size() * diag.size(), 0.0);
        for (std::size_t i = 0; i < diag.size(); ++i) spec.matrix[i * diag.size() + i] = diag[i];
        return spec;
    }
};

class QuadraticObjective final : public Objective {
public:
    explicit QuadraticObjective(QuadraticSpec spec) : spec_(std::move(spec)) {
        if (spec_.dim == 0 || spec_.matrix.size() != spec_.dim * spec_.dim) {
            throw SpecError("quadratic_objective: matrix must be dim x dim with dim >= 1");
        }
        for (std::size_t i = 0; i < spec_.dim; ++i) {
            for (std::size_t j = i + 1; j < spec_.dim; ++j) {
                if (std::abs(entry(i, j) - entry(j, i)) > 1e-12) {
                    throw SpecError("quadratic_objective: matrix is not symmetric");
                }
            }
        }
    }

    std::size_t dim() const override { return spec_.dim; }

    double value(const ParamVector& theta) const override {
        if (theta.size() != spec_.dim) throw DimensionError("quadratic: wrong dimension");
        double s = 0.0;
        for (std::size_t i = 0; i < spec_.dim; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < spec_.dim; ++j) row += entry(i, j) * theta[j];
            s += theta[i] * row;
        }
        return 0.5 * s;
    }

    ParamVector gradient(const ParamVector& theta) const override {
        if (theta.size() != spec_.dim) throw DimensionError("quadratic: wrong dimension");
        ParamVector g(spec_.dim, 0.0);
        for (std::size_t i = 0; i < spec_.dim; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < spec_.dim; ++j) row += entry(i, j) * theta[j];
            g[i] = row;
        }
        return g;
    }

private:
    double entry(std::size_t i, std::size_t j) const { return spec_.matrix[i * spec_.dim + j]; }

    QuadraticSpec spec_;
};

inline std::unique_ptr<Objective> quadratic_objective(QuadraticSpec spec) {
    return std::make_unique<QuadraticObjective>(std::move(spec));
}

// ---------------------------------------------------------------------------
// One-dimensional double well: a sharp bowl and a flat bowl joined by a
// quintic smoothstep blend over the middle of the gap. Each center keeps a
// pure-quadratic margin (blend_margin of the center distance on its side),
// so near the minima the function IS its bowl: stationarity is exact and the
// second derivative equals the prescribed curvature with no blend residue.
// The smoothstep has vanishing first and second derivatives at its ends,
// which keeps the assembled function C^2 at the margin boundaries.
// ---------------------------------------------------------------------------

struct DoubleWellSpec {
    double sharp_center = 0.0;
    double flat_center = 1.0;
    double sharp_curvature = 100.0;
    double flat_curvature = 1.0;
    double sharp_depth = 0.0;
    double flat_depth = 0.0;
    double blend_margin = 0.2;  // per-side pure-quadratic fraction, in (0, 0.5)

    bool operator==(const DoubleWellSpec&) const = default;
};

class DoubleWellObjective final : public Objective {
public:
    explicit DoubleWellObjective(const DoubleWellSpec& spec) : spec_(spec) {
        if (!(spec_.sharp_curvature > spec_.flat_curvature) || !(spec_.flat_curvature > 0.0)) {
            throw SpecError("double_well_objective: need sharp_curvature > flat_curvature > 0");
        }
        if (spec_.sharp_center == spec_.flat_center) {
            throw SpecError("double_well_objective: well centers must differ");
        }
        if (!(spec_.blend_margin > 0.0 && spec_.blend_margin < 0.5)) {
            throw SpecError("double_well_objective: blend_margin must lie in (0, 0.5)");
        }
    }

    std::size_t dim() const override { return 1; }

    double value(const ParamVector& theta) const override {
        check(theta);
        return eval(theta[0]).first;
    }

    ParamVector gradient(const ParamVector& theta) const override {
        check(theta);
        return {eval(theta[0]).second};
    }

    double value_at(double x) const { return eval(x).first; }
    double gradient_at(double x) const { return eval(x).second; }

    const DoubleWellSpec& spec() const { return spec_; }

private:
    void check(const ParamVector& theta) const {
        if (theta.size() != 1) throw DimensionError("double_well: 1-D objective");
    }

    // (value, derivative) at x.
    std::pair<double, double> eval(double x) const {
        const double c1 = spec_.sharp_center;
        const double c2 = spec_.flat_center;
        const double span = c2 - c1;

        double q1 = spec_.sharp_depth + 0.5 * spec_.sharp_curvature * (x - c1) * (x - c1);
        double dq1 = spec_.sharp_curvature * (x - c1);
        double q2 = spec_.flat_depth + 0.5 * spec_.flat_curvature * (x - c2) * (x - c2);
        double dq2 = spec_.flat_curvature * (x - c2);

        const double m = spec_.blend_margin;
        double s_raw = (x - c1) / span;
        if (s_raw <= m) return {q1, dq1};
        if (s_raw >= 1.0 - m) return {q2, dq2};

        double s = (s_raw - m) / (1.0 - 2.0 * m);
        double w = s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
        double dw_ds = 30.0 * s * s * (1.0 - s) * (1.0 - s);
        double dw_dx = dw_ds / (span * (1.0 - 2.0 * m));

        double f = (1.0 - w) * q1 + w * q2;
        double df = (1.0 - w) * dq1 + w * dq2 + dw_dx * (q2 - q1);
        return {f, df};
    }

    DoubleWellSpec spec_;
};

inline std::unique_ptr<DoubleWellObjective> double_well_objective(const DoubleWellSpec& spec) {
    return std::make_unique<DoubleWellObjective>(spec);
}

// ---------------------------------------------------------------------------
// Chained Rosenbrock, the smooth nonconvex benchmark:
//   f(x) = sum_i 100 (x_{i+1} - x_i^2)^2 + (1 - x_i)^2
// Global minimum at all-ones with value 0.
// ---------------------------------------------------------------------------

class RosenbrockObjective final : public Objective {
public:
    explicit RosenbrockObjective(std::size_t dim) : dim_(dim) {
        if (dim_ < 2) throw SpecError("smooth_nonconvex_objective: dim must be >= 2");
    }

    std::size_t dim() const override { return dim_; }

    double value(const ParamVector& x) const override {
        if (x.size() != dim_) throw DimensionError("rosenbrock: wrong dimension");
        double s = 0.0;
        for (std::size_t i = 0; i + 1 < dim_; ++i) {
            double a = x[i + 1] - x[i] * x[i];
            double b = 1.0 - x[i];
            s += 100.0 * a * a + b * b;
        }
        return s;
    }

    ParamVector gradient(const ParamVector& x) const override {
        if (x.size() != dim_) throw DimensionError("rosenbrock: wrong dimension");
        ParamVector g(dim_, 0.0);
        for (std::size_t i = 0; i + 1 < dim_; ++i) {
            double a = x[i + 1] - x[i] * x[i];
            g[i] += -400.0 * x[i] * a - 2.0 * (1.0 - x[i]);
            g[i + 1] += 200.0 * a;
        }
        return g;
    }

private:
    std::size_t dim_;
};

inline std::unique_ptr<Objective> smooth_nonconvex_objective(std::size_t dim) {
    return std::make_unique<RosenbrockObjective>(dim);
}

}  // namespace sharpmin
