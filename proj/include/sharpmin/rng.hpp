#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "sharpmin/errors.hpp"
#include "sharpmin/vec.hpp"

namespace sharpmin {

/// Deterministic pseudo-random generator on the SplitMix64 recurrence.
///
/// The whole laboratory keys its reproducibility claims on this class:
/// identical seeds give identical streams on every platform, because the
/// recurrence is pure 64-bit integer arithmetic and the floating-point
/// conversions below are exact. Gaussian draws use Box-Muller on the same
/// uniform stream, so they inherit the determinism.
///
/// Single-owner: never share one instance across threads. Parallel work
/// derives independent generators via fork().
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_value_(seed), state_(seed) {}

    std::uint64_t seed() const { return seed_value_; }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1), 53 significant bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform index in [0, n).
    std::size_t uniform_index(std::size_t n) {
        if (n == 0) throw SpecError("uniform_index: empty range");
        std::size_t i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
        return i < n ? i : n - 1;
    }

    /// Standard normal via Box-Muller; the sine partner is cached, so draws
    /// consume the uniform stream in a fixed, documented order.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        // 1 - u1 lies in (0, 1], so the log never sees zero.
        double r = std::sqrt(-2.0 * std::log1p(-u1));
        double angle = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(angle);
        has_spare_ = true;
        return r * std::cos(angle);
    }

    /// Beta(a, b) draw by Johnk's rejection method; exact for shape
    /// parameters <= 1, which covers the MixStyle default Beta(0.1, 0.1).
    double beta(double a, double b) {
        if (a <= 0.0 || b <= 0.0) throw SpecError("beta: shape parameters must be positive");
        for (;;) {
            double x = std::pow(uniform(), 1.0 / a);
            double y = std::pow(uniform(), 1.0 / b);
            double s = x + y;
            if (s > 0.0 && s <= 1.0) return x / s;
        }
    }

    /// Independent generator for a named substream. Mixing runs the seed and
    /// stream id through one SplitMix64 scramble each, so forked streams do
    /// not overlap with the parent for any practical draw count.
    Rng fork(std::uint64_t stream) const {
        std::uint64_t mixed = scramble(seed_value_ + 0x9E3779B97F4A7C15ULL * (stream + 1));
        return Rng(mixed, mixed);
    }

private:
    Rng(std::uint64_t seed, std::uint64_t state) : seed_value_(seed), state_(state) {}

    static std::uint64_t scramble(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_value_ = 0;
    std::uint64_t state_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

inline Rng seeded_rng(std::uint64_t seed) { return Rng(seed); }

/// Combine a base seed with a stream index into a fresh seed. Used to give
/// each (seed, domain/cell) pair its own generator.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return Rng(base).fork(stream).seed();
}

inline ParamVector gaussian_vector(Rng& rng, std::size_t dim) {
    if (dim == 0) throw DimensionError("gaussian_vector: dim must be >= 1");
    ParamVector v(dim);
    for (double& x : v) x = rng.gaussian();
    return v;
}

/// Fisher-Yates shuffle driven by the seeded stream.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
    if (items.size() < 2) return;
    for (std::size_t i = items.size() - 1; i > 0; --i) {
        std::size_t j = rng.uniform_index(i + 1);
        std::swap(items[i], items[j]);
    }
}

}  // namespace sharpmin
