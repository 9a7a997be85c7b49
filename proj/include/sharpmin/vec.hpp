#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "sharpmin/errors.hpp"

namespace sharpmin {

/// Flat parameter vector. All optimizable state lives in one of these.
using ParamVector = std::vector<double>;

inline void require_same_dim(const ParamVector& a, const ParamVector& b, const char* where) {
    if (a.size() != b.size()) {
        throw DimensionError(std::string(where) + ": dimension mismatch (" +
                             std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
    }
}

inline bool all_finite(const ParamVector& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

inline double dot(const ParamVector& a, const ParamVector& b) {
    require_same_dim(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double squared_norm(const ParamVector& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

inline double norm(const ParamVector& v) { return std::sqrt(squared_norm(v)); }

inline ParamVector add(const ParamVector& a, const ParamVector& b) {
    require_same_dim(a, b, "add");
    ParamVector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

inline ParamVector sub(const ParamVector& a, const ParamVector& b) {
    require_same_dim(a, b, "sub");
    ParamVector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

inline ParamVector scale(double c, const ParamVector& v) {
    ParamVector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = c * v[i];
    return out;
}

/// y += c * x
inline void axpy(double c, const ParamVector& x, ParamVector& y) {
    require_same_dim(x, y, "axpy");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += c * x[i];
}

/// a + c * b without mutating either argument.
inline ParamVector add_scaled(const ParamVector& a, double c, const ParamVector& b) {
    require_same_dim(a, b, "add_scaled");
    ParamVector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + c * b[i];
    return out;
}

inline ParamVector normalized(const ParamVector& v) {
    double n = norm(v);
    if (n == 0.0) throw DegenerateDirectionError("normalized: zero vector");
    return scale(1.0 / n, v);
}

/// Removes from v its component along u: v - (<u,v>/<u,u>) u.
/// The result is orthogonal to u up to round-off.
inline ParamVector orthogonalize(const ParamVector& u, const ParamVector& v) {
    require_same_dim(u, v, "orthogonalize");
    double uu = squared_norm(u);
    if (uu == 0.0) throw DegenerateDirectionError("orthogonalize: reference direction is zero");
    double coeff = dot(u, v) / uu;
    return add_scaled(v, -coeff, u);
}

}  // namespace sharpmin
