#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "sharpmin/data.hpp"
#include "sharpmin/errors.hpp"
#include "sharpmin/objective.hpp"
#include "sharpmin/rng.hpp"
#include "sharpmin/vec.hpp"

namespace sharpmin {

/// One-hidden-layer rectifier classifier with softmax cross-entropy loss,
/// optional inverted dropout on the hidden activations and coupled L2 weight
/// decay folded into the loss. hidden_dim = 0 degenerates to a plain linear
/// softmax classifier (used as the linear probe in distribution-shift checks).
struct MlpSpec {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 32;
    std::size_t num_classes = 2;
    double dropout = 0.0;       // in [0, 1)
    double weight_decay = 0.0;  // >= 0
};

class MlpModel {
public:
    explicit MlpModel(const MlpSpec& spec) : spec_(spec) {
        if (spec_.input_dim == 0 || spec_.num_classes < 2) {
            throw SpecError("mlp: need input_dim >= 1 and num_classes >= 2");
        }
        if (!(spec_.dropout >= 0.0 && spec_.dropout < 1.0)) {
            throw SpecError("mlp: dropout must lie in [0, 1)");
        }
        if (spec_.weight_decay < 0.0) throw SpecError("mlp: weight_decay must be >= 0");
    }

    const MlpSpec& spec() const { return spec_; }

    /// sum over layers of (fan_in + 1) * fan_out
    std::size_t param_count() const {
        if (spec_.hidden_dim == 0) return (spec_.input_dim + 1) * spec_.num_classes;
        return (spec_.input_dim + 1) * spec_.hidden_dim +
               (spec_.hidden_dim + 1) * spec_.num_classes;
    }

    /// Small Gaussian init, std 0.1/sqrt(fan_in), zero biases. Kept small so
    /// an untrained net emits a near-uniform softmax.
    ParamVector init_params(Rng& rng) const {
        ParamVector theta(param_count(), 0.0);
        std::size_t k = 0;
        if (spec_.hidden_dim > 0) {
            double s1 = 0.1 / std::sqrt(static_cast<double>(spec_.input_dim));
            for (std::size_t i = 0; i < spec_.hidden_dim * spec_.input_dim; ++i) {
                theta[k++] = s1 * rng.gaussian();
            }
            k += spec_.hidden_dim;  // b1 = 0
            double s2 = 0.1 / std::sqrt(static_cast<double>(spec_.hidden_dim));
            for (std::size_t i = 0; i < spec_.num_classes * spec_.hidden_dim; ++i) {
                theta[k++] = s2 * rng.gaussian();
            }
        } else {
            double s = 0.1 / std::sqrt(static_cast<double>(spec_.input_dim));
            for (std::size_t i = 0; i < spec_.num_classes * spec_.input_dim; ++i) {
                theta[k++] = s * rng.gaussian();
            }
        }
        return theta;
    }

    double loss(const ParamVector& theta, const Batch& batch, std::uint64_t mask_seed,
                bool train_mode) const {
        auto per_sample = per_sample_losses(theta, batch, mask_seed, train_mode);
        double mean = 0.0;
        for (double l : per_sample) mean += l;
        mean /= static_cast<double>(per_sample.size());
        return mean + 0.5 * spec_.weight_decay * squared_norm(theta);
    }

    std::vector<double> per_sample_losses(const ParamVector& theta, const Batch& batch,
                                          std::uint64_t mask_seed, bool train_mode) const {
        check_inputs(theta, batch);
        auto mask = dropout_mask(batch.size(), mask_seed, train_mode);
        std::vector<double> losses(batch.size());
        std::vector<double> hidden(spec_.hidden_dim), logits(spec_.num_classes);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            forward(theta, batch.row(i), mask_row(mask, i), hidden, logits);
            losses[i] = cross_entropy(logits, batch.labels[i]);
        }
        return losses;
    }

    ParamVector loss_gradient(const ParamVector& theta, const Batch& batch,
                              std::uint64_t mask_seed, bool train_mode) const {
        check_inputs(theta, batch);
        auto mask = dropout_mask(batch.size(), mask_seed, train_mode);
        const std::size_t D = spec_.input_dim, H = spec_.hidden_dim, K = spec_.num_classes;
        const double inv_b = 1.0 / static_cast<double>(batch.size());

        ParamVector grad(param_count(), 0.0);
        std::vector<double> hidden(H), logits(K), probs(K), dhidden(H);

        for (std::size_t i = 0; i < batch.size(); ++i) {
            const double* x = batch.row(i);
            const double* m = mask_row(mask, i);
            forward(theta, x, m, hidden, logits);
            softmax(logits, probs);
            // dL/dlogit = (softmax - onehot) / batch
            probs[static_cast<std::size_t>(batch.labels[i])] -= 1.0;
            for (double& p : probs) p *= inv_b;

            if (H > 0) {
                const double* w2 = theta.data() + off_w2();
                double* gw2 = grad.data() + off_w2();
                double* gb2 = grad.data() + off_b2();
                for (std::size_t kcls = 0; kcls < K; ++kcls) {
                    for (std::size_t h = 0; h < H; ++h) gw2[kcls * H + h] += probs[kcls] * hidden[h];
                    gb2[kcls] += probs[kcls];
                }
                for (std::size_t h = 0; h < H; ++h) {
                    double acc = 0.0;
                    for (std::size_t kcls = 0; kcls < K; ++kcls) acc += w2[kcls * H + h] * probs[kcls];
                    // hidden[h] > 0 iff the rectifier passed and the mask kept the unit.
                    dhidden[h] = hidden[h] > 0.0 ? acc * (m ? m[h] : 1.0) : 0.0;
                }
                double* gw1 = grad.data() + off_w1();
                double* gb1 = grad.data() + off_b1();
                for (std::size_t h = 0; h < H; ++h) {
                    if (dhidden[h] == 0.0) continue;
                    for (std::size_t d = 0; d < D; ++d) gw1[h * D + d] += dhidden[h] * x[d];
                    gb1[h] += dhidden[h];
                }
            } else {
                double* gw = grad.data();
                double* gb = grad.data() + K * D;
                for (std::size_t kcls = 0; kcls < K; ++kcls) {
                    for (std::size_t d = 0; d < D; ++d) gw[kcls * D + d] += probs[kcls] * x[d];
                    gb[kcls] += probs[kcls];
                }
            }
        }
        if (spec_.weight_decay > 0.0) axpy(spec_.weight_decay, theta, grad);
        return grad;
    }

    std::vector<double> predict_proba(const ParamVector& theta, const double* row) const {
        std::vector<double> hidden(spec_.hidden_dim), logits(spec_.num_classes),
            probs(spec_.num_classes);
        forward(theta, row, nullptr, hidden, logits);
        softmax(logits, probs);
        return probs;
    }

    /// Fraction of batch rows whose argmax logit matches the label; dropout off.
    double accuracy(const ParamVector& theta, const Batch& batch) const {
        check_inputs(theta, batch);
        std::vector<double> hidden(spec_.hidden_dim), logits(spec_.num_classes);
        std::size_t hits = 0;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            forward(theta, batch.row(i), nullptr, hidden, logits);
            std::size_t best = 0;
            for (std::size_t k = 1; k < logits.size(); ++k) {
                if (logits[k] > logits[best]) best = k;
            }
            if (static_cast<int>(best) == batch.labels[i]) ++hits;
        }
        return static_cast<double>(hits) / static_cast<double>(batch.size());
    }

private:
    std::size_t off_w1() const { return 0; }
    std::size_t off_b1() const { return spec_.hidden_dim * spec_.input_dim; }
    std::size_t off_w2() const { return off_b1() + spec_.hidden_dim; }
    std::size_t off_b2() const { return off_w2() + spec_.num_classes * spec_.hidden_dim; }

    void check_inputs(const ParamVector& theta, const Batch& batch) const {
        if (theta.size() != param_count()) throw DimensionError("mlp: wrong parameter count");
        if (batch.size() == 0) throw DataError("mlp: empty batch");
        if (batch.feature_dim != spec_.input_dim) throw DimensionError("mlp: wrong feature_dim");
        for (int label : batch.labels) {
            if (label < 0 || label >= static_cast<int>(spec_.num_classes)) {
                throw DataError("mlp: label " + std::to_string(label) + " outside [0, " +
                                std::to_string(spec_.num_classes) + ")");
            }
        }
    }

    /// Inverted dropout: kept units are pre-scaled by 1/(1-p), so evaluation
    /// needs no rescaling. One Bernoulli stream per mask_seed; the same seed
    /// reproduces the same mask, which keeps value/gradient pairs consistent.
    std::vector<double> dropout_mask(std::size_t batch, std::uint64_t mask_seed,
                                     bool train_mode) const {
        if (!train_mode || spec_.dropout == 0.0 || spec_.hidden_dim == 0) return {};
        Rng rng(mask_seed);
        double keep = 1.0 - spec_.dropout;
        std::vector<double> mask(batch * spec_.hidden_dim);
        for (double& m : mask) m = rng.uniform() < keep ? 1.0 / keep : 0.0;
        return mask;
    }

    const double* mask_row(const std::vector<double>& mask, std::size_t i) const {
        return mask.empty() ? nullptr : mask.data() + i * spec_.hidden_dim;
    }

    void forward(const ParamVector& theta, const double* x, const double* mask,
                 std::vector<double>& hidden, std::vector<double>& logits) const {
        const std::size_t D = spec_.input_dim, H = spec_.hidden_dim, K = spec_.num_classes;
        if (H > 0) {
            const double* w1 = theta.data() + off_w1();
            const double* b1 = theta.data() + off_b1();
            for (std::size_t h = 0; h < H; ++h) {
                double acc = b1[h];
                const double* row = w1 + h * D;
                for (std::size_t d = 0; d < D; ++d) acc += row[d] * x[d];
                double a = acc > 0.0 ? acc : 0.0;
                hidden[h] = mask ? a * mask[h] : a;
            }
            const double* w2 = theta.data() + off_w2();
            const double* b2 = theta.data() + off_b2();
            for (std::size_t k = 0; k < K; ++k) {
                double acc = b2[k];
                const double* row = w2 + k * H;
                for (std::size_t h = 0; h < H; ++h) acc += row[h] * hidden[h];
                logits[k] = acc;
            }
        } else {
            const double* w = theta.data();
            const double* b = theta.data() + K * D;
            for (std::size_t k = 0; k < K; ++k) {
                double acc = b[k];
                const double* row = w + k * D;
                for (std::size_t d = 0; d < D; ++d) acc += row[d] * x[d];
                logits[k] = acc;
            }
        }
    }

    static void softmax(const std::vector<double>& logits, std::vector<double>& probs) {
        double maxv = logits[0];
        for (double z : logits) maxv = std::max(maxv, z);
        double denom = 0.0;
        for (std::size_t k = 0; k < logits.size(); ++k) {
            probs[k] = std::exp(logits[k] - maxv);
            denom += probs[k];
        }
        for (double& p : probs) p /= denom;
    }

    static double cross_entropy(const std::vector<double>& logits, int label) {
        double maxv = logits[0];
        for (double z : logits) maxv = std::max(maxv, z);
        double lse = 0.0;
        for (double z : logits) lse += std::exp(z - maxv);
        lse = maxv + std::log(lse);
        return lse - logits[static_cast<std::size_t>(label)];
    }

    MlpSpec spec_;
};

/// Objective over a fixed batch and dropout mask. Copies the batch so the
/// instance stays valid independently of the caller.
class BoundMlpObjective final : public Objective {
public:
    BoundMlpObjective(const MlpModel& model, Batch batch, std::uint64_t mask_seed,
                      bool train_mode)
        : model_(&model), batch_(std::move(batch)), mask_seed_(mask_seed),
          train_mode_(train_mode) {}

    std::size_t dim() const override { return model_->param_count(); }

    double value(const ParamVector& theta) const override {
        return model_->loss(theta, batch_, mask_seed_, train_mode_);
    }

    ParamVector gradient(const ParamVector& theta) const override {
        return model_->loss_gradient(theta, batch_, mask_seed_, train_mode_);
    }

    const Batch& batch() const { return batch_; }

private:
    const MlpModel* model_;
    Batch batch_;
    std::uint64_t mask_seed_;
    bool train_mode_;
};

struct MlpInit {
    std::shared_ptr<MlpModel> model;
    ParamVector theta0;
};

inline MlpInit mlp_objective(const MlpSpec& spec, Rng& init_rng) {
    MlpInit out;
    out.model = std::make_shared<MlpModel>(spec);
    out.theta0 = out.model->init_params(init_rng);
    return out;
}

}  // namespace sharpmin
