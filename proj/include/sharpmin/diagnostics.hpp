#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "sharpmin/errors.hpp"
#include "sharpmin/optimizers.hpp"

namespace sharpmin {

/// Running mean of the squared gradient norms, M(T) = (1/T) sum_{t<=T} ||g_t||^2.
inline std::vector<double> running_mean_grad_sq(const Trajectory& traj) {
    std::vector<double> mean(traj.records.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < traj.records.size(); ++i) {
        acc += traj.records[i].grad_sq_norm;
        mean[i] = acc / static_cast<double>(i + 1);
    }
    return mean;
}

struct RateFit {
    double c1 = 0.0;  // coefficient of 1/sqrt(T)
    double c2 = 0.0;  // coefficient of log(T)/sqrt(T)
    double r_squared = 0.0;
};

/// Least-squares fit of samples (T_k, M_k) against (c1 + c2 log T)/sqrt(T)
/// with both coefficients clamped to be nonnegative. Two-variable problem,
/// so the nonnegative solution is the unconstrained one or a one-basis refit.
inline RateFit fit_decay_rate(const std::vector<double>& ts, const std::vector<double>& ms) {
    if (ts.size() != ms.size() || ts.size() < 3) {
        throw SpecError("fit_decay_rate: need at least 3 matching samples");
    }
    const std::size_t n = ts.size();
    std::vector<double> x1(n), x2(n);
    for (std::size_t i = 0; i < n; ++i) {
        double inv_sqrt = 1.0 / std::sqrt(ts[i]);
        x1[i] = inv_sqrt;
        x2[i] = std::log(ts[i]) * inv_sqrt;
    }

    auto dotv = [n](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
        return s;
    };

    double a11 = dotv(x1, x1), a12 = dotv(x1, x2), a22 = dotv(x2, x2);
    double b1 = dotv(x1, ms), b2 = dotv(x2, ms);
    double det = a11 * a22 - a12 * a12;

    RateFit fit;
    if (std::abs(det) > 1e-300) {
        fit.c1 = (b1 * a22 - b2 * a12) / det;
        fit.c2 = (a11 * b2 - a12 * b1) / det;
    }
    if (fit.c1 < 0.0 || fit.c2 < 0.0) {
        // Refit on whichever single basis explains more, coefficient clamped at 0.
        double c1_only = a11 > 0.0 ? std::max(0.0, b1 / a11) : 0.0;
        double c2_only = a22 > 0.0 ? std::max(0.0, b2 / a22) : 0.0;
        auto sse = [&](double c1, double c2) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double r = ms[i] - c1 * x1[i] - c2 * x2[i];
                s += r * r;
            }
            return s;
        };
        if (sse(c1_only, 0.0) <= sse(0.0, c2_only)) {
            fit.c1 = c1_only;
            fit.c2 = 0.0;
        } else {
            fit.c1 = 0.0;
            fit.c2 = c2_only;
        }
    }

    double mean = 0.0;
    for (double m : ms) mean += m;
    mean /= static_cast<double>(n);
    double ss_tot = 0.0, ss_res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double pred = fit.c1 * x1[i] + fit.c2 * x2[i];
        ss_res += (ms[i] - pred) * (ms[i] - pred);
        ss_tot += (ms[i] - mean) * (ms[i] - mean);
    }
    fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
    return fit;
}

}  // namespace sharpmin
