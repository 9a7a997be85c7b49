#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "sharpmin/errors.hpp"
#include "sharpmin/rng.hpp"

namespace sharpmin {

/// Mini-batch view materialized from a split: row-major features, one row per
/// sample, feature_dim = channels * positions.
struct Batch {
    std::size_t feature_dim = 0;
    std::vector<double> features;  // size() == labels.size() * feature_dim
    std::vector<int> labels;
    std::vector<int> domain_ids;

    std::size_t size() const { return labels.size(); }
    const double* row(std::size_t i) const { return features.data() + i * feature_dim; }
};

/// Per-channel affine style of one domain.
struct DomainStyle {
    std::vector<double> scale;  // one per channel
    std::vector<double> shift;
};

/// Labeled samples partitioned into styled domains. Every domain shares the
/// same class-conditional latent distribution; only the per-channel affine
/// style differs between domains.
struct DomainDataset {
    std::size_t channels = 0;
    std::size_t positions = 0;
    std::size_t classes = 0;

    struct Domain {
        int id = 0;
        DomainStyle style;
        std::vector<double> features;  // row-major, per_domain x (channels*positions)
        std::vector<int> labels;

        std::size_t size() const { return labels.size(); }
    };

    std::vector<Domain> domains;

    std::size_t feature_dim() const { return channels * positions; }
    std::size_t total_samples() const {
        std::size_t n = 0;
        for (const auto& d : domains) n += d.size();
        return n;
    }
};

struct DomainDatasetSpec {
    std::size_t classes = 3;
    std::size_t domains = 4;
    std::size_t per_domain = 500;
    std::size_t channels = 4;
    std::size_t positions = 8;
    double style_spread = 1.5;
    double class_separation = 0.7;
    double latent_noise = 0.8;

    bool operator==(const DomainDatasetSpec&) const = default;
};

/// Generates the synthetic multi-domain classification task.
///
/// Latents: class c has a fixed mean pattern mu_c (drawn once, shared by all
/// domains); a sample is mu_c plus i.i.d. Gaussian noise. Styling: domain d
/// maps channel ch as x -> exp(spread * a) * x + spread * b with (a, b) drawn
/// per (domain, channel). spread = 0 makes every domain identically
/// distributed. Labels are assigned round-robin, so each domain is class-
/// balanced to within one sample.
inline DomainDataset generate_domains(const DomainDatasetSpec& spec, std::uint64_t seed) {
    if (spec.classes < 2) throw SpecError("generate_domains: classes must be >= 2");
    if (spec.domains < 3) throw SpecError("generate_domains: domains must be >= 3");
    if (spec.per_domain < spec.classes) {
        throw SpecError("generate_domains: per_domain must be >= classes");
    }
    if (spec.channels == 0 || spec.positions == 0) {
        throw SpecError("generate_domains: channels and positions must be >= 1");
    }

    DomainDataset data;
    data.channels = spec.channels;
    data.positions = spec.positions;
    data.classes = spec.classes;

    const std::size_t dim = spec.channels * spec.positions;
    Rng base(seed);

    Rng class_rng = base.fork(1);
    std::vector<std::vector<double>> class_means(spec.classes, std::vector<double>(dim));
    for (auto& mean : class_means) {
        for (double& m : mean) m = spec.class_separation * class_rng.gaussian();
    }

    Rng style_rng = base.fork(2);
    data.domains.resize(spec.domains);
    for (std::size_t d = 0; d < spec.domains; ++d) {
        auto& dom = data.domains[d];
        dom.id = static_cast<int>(d);
        dom.style.scale.resize(spec.channels);
        dom.style.shift.resize(spec.channels);
        for (std::size_t c = 0; c < spec.channels; ++c) {
            dom.style.scale[c] = std::exp(spec.style_spread * style_rng.gaussian());
            dom.style.shift[c] = spec.style_spread * style_rng.gaussian();
        }
    }

    for (std::size_t d = 0; d < spec.domains; ++d) {
        auto& dom = data.domains[d];
        Rng sample_rng = base.fork(16 + d);
        dom.features.resize(spec.per_domain * dim);
        dom.labels.resize(spec.per_domain);
        for (std::size_t i = 0; i < spec.per_domain; ++i) {
            int label = static_cast<int>(i % spec.classes);
            dom.labels[i] = label;
            double* row = dom.features.data() + i * dim;
            const auto& mean = class_means[static_cast<std::size_t>(label)];
            for (std::size_t c = 0; c < spec.channels; ++c) {
                for (std::size_t s = 0; s < spec.positions; ++s) {
                    std::size_t k = c * spec.positions + s;
                    double latent = mean[k] + spec.latent_noise * sample_rng.gaussian();
                    row[k] = dom.style.scale[c] * latent + dom.style.shift[c];
                }
            }
        }
    }
    return data;
}

/// Materialized subset of a dataset used for training or evaluation.
struct Split {
    std::size_t feature_dim = 0;
    std::vector<double> features;
    std::vector<int> labels;
    std::vector<int> domain_ids;

    std::size_t size() const { return labels.size(); }

    void append(const DomainDataset::Domain& dom, std::size_t index, std::size_t dim) {
        feature_dim = dim;
        const double* row = dom.features.data() + index * dim;
        features.insert(features.end(), row, row + dim);
        labels.push_back(dom.labels[index]);
        domain_ids.push_back(dom.id);
    }

    Batch as_batch() const {
        return Batch{feature_dim, features, labels, domain_ids};
    }

    Batch head(std::size_t n) const {
        n = std::min(n, size());
        Batch b;
        b.feature_dim = feature_dim;
        b.features.assign(features.begin(),
                          features.begin() + static_cast<std::ptrdiff_t>(n * feature_dim));
        b.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n));
        b.domain_ids.assign(domain_ids.begin(), domain_ids.begin() + static_cast<std::ptrdiff_t>(n));
        return b;
    }
};

struct SplitTriple {
    Split train;
    Split validation;
    Split test;
};

/// Leave-one-domain-out split: the target domain becomes the test set in
/// full; every other domain contributes its trailing val_fraction of samples
/// to validation and the rest to training. Round-robin labels make the tail
/// as class-balanced as the head, so no reshuffle is needed here.
inline SplitTriple leave_one_out_split(const DomainDataset& data, int target,
                                       double val_fraction) {
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
        throw SpecError("leave_one_out_split: val_fraction must lie in (0, 1)");
    }
    bool found = false;
    for (const auto& dom : data.domains) {
        if (dom.id == target) found = true;
    }
    if (!found) {
        throw DataError("leave_one_out_split: unknown target domain " + std::to_string(target));
    }

    SplitTriple out;
    const std::size_t dim = data.feature_dim();
    for (const auto& dom : data.domains) {
        if (dom.id == target) {
            for (std::size_t i = 0; i < dom.size(); ++i) out.test.append(dom, i, dim);
            continue;
        }
        if (dom.size() < 2) {
            throw DataError("leave_one_out_split: source domain " + std::to_string(dom.id) +
                            " has fewer than 2 samples");
        }
        std::size_t val_count = static_cast<std::size_t>(
            std::llround(val_fraction * static_cast<double>(dom.size())));
        val_count = std::clamp<std::size_t>(val_count, 1, dom.size() - 1);
        std::size_t train_count = dom.size() - val_count;
        for (std::size_t i = 0; i < train_count; ++i) out.train.append(dom, i, dim);
        for (std::size_t i = train_count; i < dom.size(); ++i) out.validation.append(dom, i, dim);
    }
    out.train.feature_dim = dim;
    out.validation.feature_dim = dim;
    out.test.feature_dim = dim;
    return out;
}

/// Without-replacement mini-batch iterator. Each epoch is a fresh seeded
/// permutation of the split; an epoch's final batch may be short when
/// batch_size does not divide the split size.
class Batcher {
public:
    Batcher(const Split& split, std::size_t batch_size)
        : split_(&split), batch_size_(batch_size) {
        if (split.size() == 0) throw DataError("next_batch: split is empty");
        if (batch_size == 0 || batch_size > split.size()) {
            throw DataError("next_batch: batch_size " + std::to_string(batch_size) +
                            " invalid for split of " + std::to_string(split.size()));
        }
        order_.resize(split.size());
        std::iota(order_.begin(), order_.end(), std::size_t{0});
    }

    Batch next(Rng& rng) {
        if (cursor_ == 0) shuffle(order_, rng);
        std::size_t take = std::min(batch_size_, order_.size() - cursor_);
        Batch b;
        b.feature_dim = split_->feature_dim;
        b.features.reserve(take * b.feature_dim);
        b.labels.reserve(take);
        b.domain_ids.reserve(take);
        for (std::size_t k = 0; k < take; ++k) {
            std::size_t i = order_[cursor_ + k];
            const double* row = split_->features.data() + i * split_->feature_dim;
            b.features.insert(b.features.end(), row, row + split_->feature_dim);
            b.labels.push_back(split_->labels[i]);
            b.domain_ids.push_back(split_->domain_ids[i]);
        }
        cursor_ += take;
        if (cursor_ >= order_.size()) cursor_ = 0;
        return b;
    }

private:
    const Split* split_;
    std::size_t batch_size_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
};

inline Batch next_batch(Batcher& batcher, Rng& rng) { return batcher.next(rng); }

// ---------------------------------------------------------------------------
// CSV round trip, header: domain,label,f_0,...,f_{CS-1}
// ---------------------------------------------------------------------------

inline void write_dataset_csv(const DomainDataset& data, std::ostream& os) {
    const std::size_t dim = data.feature_dim();
    os << "domain,label";
    for (std::size_t k = 0; k < dim; ++k) os << ",f_" << k;
    os << "\n";
    char buf[32];
    for (const auto& dom : data.domains) {
        for (std::size_t i = 0; i < dom.size(); ++i) {
            os << dom.id << "," << dom.labels[i];
            const double* row = dom.features.data() + i * dim;
            for (std::size_t k = 0; k < dim; ++k) {
                std::snprintf(buf, sizeof(buf), "%.17g", row[k]);
                os << "," << buf;
            }
            os << "\n";
        }
    }
}

inline void write_dataset_csv(const DomainDataset& data, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path);
    write_dataset_csv(data, os);
    if (!os) throw IoError("write failed: " + path);
}

/// Reads a dataset CSV produced by write_dataset_csv. Channel/position shape
/// is not stored in the file, so the caller supplies it.
inline DomainDataset read_dataset_csv(std::istream& is, std::size_t channels,
                                      std::size_t positions, std::size_t classes) {
    DomainDataset data;
    data.channels = channels;
    data.positions = positions;
    data.classes = classes;
    const std::size_t dim = channels * positions;

    std::string line;
    if (!std::getline(is, line)) throw IoError("dataset csv: missing header");

    auto find_domain = [&data](int id) -> DomainDataset::Domain& {
        for (auto& d : data.domains) {
            if (d.id == id) return d;
        }
        data.domains.emplace_back();
        data.domains.back().id = id;
        return data.domains.back();
    };

    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        if (!std::getline(ss, cell, ',')) throw IoError("dataset csv: bad row");
        int domain_id = std::stoi(cell);
        if (!std::getline(ss, cell, ',')) throw IoError("dataset csv: bad row");
        int label = std::stoi(cell);
        auto& dom = find_domain(domain_id);
        dom.labels.push_back(label);
        for (std::size_t k = 0; k < dim; ++k) {
            if (!std::getline(ss, cell, ',')) throw IoError("dataset csv: short row");
            dom.features.push_back(std::stod(cell));
        }
    }
    return data;
}

inline DomainDataset read_dataset_csv(const std::string& path, std::size_t channels,
                                      std::size_t positions, std::size_t classes) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open for reading: " + path);
    return read_dataset_csv(is, channels, positions, classes);
}

}  // namespace sharpmin
