#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "sharpmin/errors.hpp"
#include "sharpmin/rng.hpp"

namespace sharpmin {

/// Guard added to per-channel variance before taking the square root, so
/// zero-variance channels normalize against eps_std instead of dividing by
/// zero. Mixing and normalization use the same guarded statistic, which makes
/// lambda = 1 restore the input exactly.
inline constexpr double kMixStyleEpsStd = 1e-6;

/// Per-channel instance statistics of one sample: mean and guarded std over
/// the position axis.
struct ChannelStats {
    std::vector<double> mean;  // one per channel
    std::vector<double> std;   // sqrt(population variance + eps_std^2)
};

inline ChannelStats channel_stats(const double* row, std::size_t channels, std::size_t positions,
                                  double eps_std = kMixStyleEpsStd) {
    ChannelStats st;
    st.mean.resize(channels);
    st.std.resize(channels);
    for (std::size_t c = 0; c < channels; ++c) {
        const double* x = row + c * positions;
        double mean = 0.0;
        for (std::size_t s = 0; s < positions; ++s) mean += x[s];
        mean /= static_cast<double>(positions);
        double var = 0.0;
        for (std::size_t s = 0; s < positions; ++s) {
            double d = x[s] - mean;
            var += d * d;
        }
        var /= static_cast<double>(positions);
        st.mean[c] = mean;
        st.std[c] = std::sqrt(var + eps_std * eps_std);
    }
    return st;
}

/// Core mixing step with explicit pairing and mixing weights.
///
/// Sample i is normalized by its own channel statistics and re-styled with
/// the convex combination of its statistics and partner[i]'s:
///   out = (lam*std_i + (1-lam)*std_j) * (x - mean_i) / std_i
///       + (lam*mean_i + (1-lam)*mean_j)
inline std::vector<double> mixstyle_apply(const std::vector<double>& features, std::size_t batch,
                                          std::size_t channels, std::size_t positions,
                                          const std::vector<std::size_t>& partner,
                                          const std::vector<double>& lambda,
                                          double eps_std = kMixStyleEpsStd) {
    const std::size_t dim = channels * positions;
    if (features.size() != batch * dim) throw DimensionError("mixstyle: bad feature shape");
    if (partner.size() != batch || lambda.size() != batch) {
        throw DimensionError("mixstyle: pairing/lambda length must equal batch");
    }
    if (batch < 2) throw DataError("mixstyle: batch must have at least 2 samples");
    if (positions < 2) throw DataError("mixstyle: need at least 2 positions per channel");

    std::vector<ChannelStats> stats(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        stats[i] = channel_stats(features.data() + i * dim, channels, positions, eps_std);
    }

    std::vector<double> out(features.size());
    for (std::size_t i = 0; i < batch; ++i) {
        std::size_t j = partner[i];
        if (j >= batch) throw DimensionError("mixstyle: partner index out of range");
        double lam = lambda[i];
        const double* x = features.data() + i * dim;
        double* y = out.data() + i * dim;
        for (std::size_t c = 0; c < channels; ++c) {
            double mix_std = lam * stats[i].std[c] + (1.0 - lam) * stats[j].std[c];
            double mix_mean = lam * stats[i].mean[c] + (1.0 - lam) * stats[j].mean[c];
            double inv = 1.0 / stats[i].std[c];
            for (std::size_t s = 0; s < positions; ++s) {
                std::size_t k = c * positions + s;
                y[k] = mix_std * (x[k] - stats[i].mean[c]) * inv + mix_mean;
            }
        }
    }
    return out;
}

/// Seeded MixStyle: partners come from one shuffle of the batch and each
/// sample draws its own lambda ~ Beta(beta_param, beta_param).
inline std::vector<double> mixstyle_transform(const std::vector<double>& features,
                                              std::size_t batch, std::size_t channels,
                                              std::size_t positions, Rng& rng,
                                              double beta_param = 0.1,
                                              double eps_std = kMixStyleEpsStd) {
    if (batch < 2) throw DataError("mixstyle: batch must have at least 2 samples");
    if (positions < 2) throw DataError("mixstyle: need at least 2 positions per channel");
    std::vector<std::size_t> partner(batch);
    std::iota(partner.begin(), partner.end(), std::size_t{0});
    shuffle(partner, rng);
    std::vector<double> lambda(batch);
    for (double& l : lambda) l = rng.beta(beta_param, beta_param);
    return mixstyle_apply(features, batch, channels, positions, partner, lambda, eps_std);
}

}  // namespace sharpmin
