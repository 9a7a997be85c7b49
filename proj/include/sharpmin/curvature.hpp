#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sharpmin/errors.hpp"
#include "sharpmin/objective.hpp"
#include "sharpmin/perturbation.hpp"
#include "sharpmin/rng.hpp"
#include "sharpmin/vec.hpp"

namespace sharpmin {

/// Below this gradient norm the perturbation direction collapses, so the
/// finite-difference metric falls back to a seeded random unit direction.
inline constexpr double kGradientFloor = 1e-8;

/// Central second difference along a unit direction:
///   (f(x + s u) + f(x - s u) - 2 f(x)) / s^2  ~  u'Hu + O(s^2)
/// Exact on quadratics for any s.
inline double directional_second_difference(const Objective& obj, const ParamVector& theta,
                                            const ParamVector& direction, double s) {
    require_same_dim(theta, direction, "directional_second_difference");
    if (!(s > 0.0)) throw SpecError("directional_second_difference: s must be positive");
    if (std::abs(norm(direction) - 1.0) > 1e-10) {
        throw DegenerateDirectionError("directional_second_difference: direction must be unit norm");
    }
    double fp = obj.value(add_scaled(theta, s, direction));
    double fm = obj.value(add_scaled(theta, -s, direction));
    double f0 = obj.value(theta);
    return (fp + fm - 2.0 * f0) / (s * s);
}

/// Finite-difference curvature metric along an explicit perturbation vector:
///   |f(x+d) + f(x-d) - 2 f(x)| / (||grad f(x)||^2 + 1)
inline double fd_curvature_metric_along(const Objective& obj, const ParamVector& theta,
                                        const ParamVector& delta) {
    require_same_dim(theta, delta, "fd_curvature_metric_along");
    double fp = obj.value(add(theta, delta));
    double fm = obj.value(sub(theta, delta));
    double f0 = obj.value(theta);
    double gsq = squared_norm(obj.gradient(theta));
    return std::abs(fp + fm - 2.0 * f0) / (gsq + 1.0);
}

/// Curvature metric with the ascent-direction perturbation delta =
/// rho g/(||g||+eps). Near-stationary points (||g|| below the gradient
/// floor) switch to a seeded random unit direction scaled by rho, so the
/// estimator keeps measuring curvature instead of degenerating to zero.
inline double fd_curvature_metric(const Objective& obj, const ParamVector& theta, double rho,
                                  double eps, Rng& rng) {
    if (!(rho > 0.0)) throw SpecError("fd_curvature_metric: rho must be positive");
    ParamVector g = obj.gradient(theta);
    ParamVector delta;
    if (norm(g) < kGradientFloor) {
        delta = scale(rho, normalized(gaussian_vector(rng, theta.size())));
    } else {
        delta = sam_perturbation(g, rho, eps);
    }
    return fd_curvature_metric_along(obj, theta, delta);
}

/// Matrix-free Hessian-vector product by central differences of the
/// gradient. The probe direction is normalized before differencing and the
/// result rescaled, keeping the step size meaningful for any ||v||.
inline ParamVector hvp(const Objective& obj, const ParamVector& theta, const ParamVector& v,
                       double eps = 1e-5) {
    require_same_dim(theta, v, "hvp");
    if (!(eps > 0.0)) throw SpecError("hvp: eps must be positive");
    double vn = norm(v);
    if (vn == 0.0) throw DegenerateDirectionError("hvp: zero direction");
    ParamVector unit = scale(1.0 / vn, v);
    ParamVector gp = obj.gradient(add_scaled(theta, eps, unit));
    ParamVector gm = obj.gradient(add_scaled(theta, -eps, unit));
    ParamVector out(v.size());
    double c = vn / (2.0 * eps);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * (gp[i] - gm[i]);
    return out;
}

struct PowerIterationResult {
    double lambda_max = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

/// Power iteration on hvp with Rayleigh-quotient estimates. Non-convergence
/// within max_iters returns the best estimate with converged = false.
inline PowerIterationResult power_iteration_lambda_max(const Objective& obj,
                                                       const ParamVector& theta,
                                                       std::size_t max_iters, double tol,
                                                       Rng& rng) {
    if (max_iters == 0) throw SpecError("power_iteration: max_iters must be >= 1");
    if (!(tol > 0.0)) throw SpecError("power_iteration: tol must be positive");

    ParamVector v = normalized(gaussian_vector(rng, theta.size()));
    PowerIterationResult res;
    double prev = 0.0;
    for (std::size_t it = 1; it <= max_iters; ++it) {
        ParamVector w = hvp(obj, theta, v);
        double lambda = dot(v, w);  // Rayleigh quotient, v is unit norm
        res.lambda_max = lambda;
        res.iterations = it;
        double wn = norm(w);
        if (wn < 1e-300) {
            // Hessian annihilates the probe; spectrum along it is zero.
            res.lambda_max = 0.0;
            res.converged = true;
            return res;
        }
        if (it > 1 && std::abs(lambda - prev) < tol * std::max(1.0, std::abs(lambda))) {
            res.converged = true;
            return res;
        }
        prev = lambda;
        v = scale(1.0 / wn, w);
    }
    return res;
}

/// Everything the curvature CLI reports about one point.
struct CurvatureReport {
    ParamVector point;
    double grad_sq_norm = 0.0;
    double lambda_max = 0.0;
    double metric_spectral = 0.0;  // lambda_max / (grad_sq_norm + 1)
    std::vector<std::pair<double, double>> metric_fd;  // (rho, metric)
    std::size_t iterations = 0;
    bool converged = false;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["point"] = point;
        j["grad_sq_norm"] = grad_sq_norm;
        j["lambda_max"] = lambda_max;
        j["metric_spectral"] = metric_spectral;
        auto fd = nlohmann::ordered_json::array();
        for (const auto& [rho, value] : metric_fd) {
            fd.push_back({{"rho", rho}, {"value", value}});
        }
        j["metric_fd"] = fd;
        j["iterations"] = iterations;
        j["converged"] = converged;
        return j;
    }

    void write_json(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw IoError("cannot open for writing: " + path);
        os << to_json().dump(2) << "\n";
        if (!os) throw IoError("write failed: " + path);
    }
};

inline std::vector<double> default_curvature_rhos() { return {0.01, 0.05, 0.1, 0.2, 0.5}; }

/// Evaluates the finite-difference metric for every rho plus the spectral
/// quantities. One perturbation direction is fixed up front (ascent
/// direction, or the random fallback at near-stationary points) and reused
/// across the whole rho list, so entries within one sweep are comparable.
inline CurvatureReport curvature_sweep(const Objective& obj, const ParamVector& theta,
                                       const std::vector<double>& rho_list, double eps, Rng& rng,
                                       std::size_t power_iters = 200, double power_tol = 1e-10) {
    if (rho_list.empty()) throw SpecError("curvature_sweep: rho list must be non-empty");
    for (double rho : rho_list) {
        if (!(rho > 0.0)) throw SpecError("curvature_sweep: all rho must be positive");
    }

    CurvatureReport report;
    report.point = theta;
    ParamVector g = obj.gradient(theta);
    report.grad_sq_norm = squared_norm(g);

    ParamVector direction;  // unit vector; scaled per rho below
    double gnorm = norm(g);
    if (gnorm < kGradientFloor) {
        direction = normalized(gaussian_vector(rng, theta.size()));
    } else {
        direction = scale(1.0 / gnorm, g);
    }

    for (double rho : rho_list) {
        double radius = gnorm < kGradientFloor ? rho : rho * gnorm / (gnorm + eps);
        double metric = fd_curvature_metric_along(obj, theta, scale(radius, direction));
        report.metric_fd.emplace_back(rho, metric);
    }

    PowerIterationResult pi = power_iteration_lambda_max(obj, theta, power_iters, power_tol, rng);
    report.lambda_max = pi.lambda_max;
    report.iterations = pi.iterations;
    report.converged = pi.converged;
    report.metric_spectral = pi.lambda_max / (report.grad_sq_norm + 1.0);
    return report;
}

}  // namespace sharpmin
