#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "icegan/diffnet/ops.hpp"

namespace icegan::losses {

// log(1 + e^z) without overflow.
template <typename T>
T softplus(T z) {
    return z > T(0) ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

// Mean over samples of the Euclidean norm of each sample's difference a - b.
// The norm's gradient at zero is taken as zero.
template <typename T>
Var mean_l2_distance(Tape<T>& tape, Var a, Var b) {
    Var diff = ops::sub(tape, a, b);
    const Tensor<T>& d = tape.value(diff);
    const std::size_t batch = d.shape().batch;
    std::vector<T> norms(batch);
    T total{};
    for (std::size_t n = 0; n < batch; ++n) {
        T sq{};
        for (T v : d.sample(n)) sq += v * v;
        norms[n] = std::sqrt(sq);
        total += norms[n];
    }
    const T inv_n = T(1) / static_cast<T>(batch);
    const std::size_t di = diff.id;
    return tape.record(Tensor<T>(Shape{1, 1, 1, 1}, total * inv_n), {diff},
                       [di, norms, inv_n](Tape<T>& t, std::size_t self) {
                           const T g = t.grad(self)[0] * inv_n;
                           const Tensor<T>& d = t.value(di);
                           Tensor<T>* gd = t.grad_target(di);
                           for (std::size_t n = 0; n < norms.size(); ++n) {
                               if (norms[n] == T(0)) continue;
                               auto src = d.sample(n);
                               auto dst = gd->sample(n);
                               for (std::size_t i = 0; i < src.size(); ++i) dst[i] += g * src[i] / norms[n];
                           }
                       });
}

// Mean of log σ(z) (or log(1 - σ(z)) when `complement`) over all elements of
// a logit tensor, evaluated stably via softplus.
template <typename T>
Var mean_log_sigmoid(Tape<T>& tape, Var logits, bool complement) {
    const Tensor<T>& z = tape.value(logits);
    T total{};
    for (T v : z.data()) total -= complement ? softplus(v) : softplus(-v);
    const T inv_n = T(1) / static_cast<T>(z.size());
    const std::size_t zi = logits.id;
    return tape.record(Tensor<T>(Shape{1, 1, 1, 1}, total * inv_n), {logits},
                       [zi, inv_n, complement](Tape<T>& t, std::size_t self) {
                           const T g = t.grad(self)[0] * inv_n;
                           const Tensor<T>& z = t.value(zi);
                           Tensor<T>* gz = t.grad_target(zi);
                           for (std::size_t i = 0; i < z.size(); ++i) {
                               const T s = ops::sigmoid_value(z[i]);
                               // d/dz log σ = 1 - σ ; d/dz log(1 - σ) = -σ
                               (*gz)[i] += g * (complement ? -s : T(1) - s);
                           }
                       });
}

// Σ_n weights[n] · (-log softmax(z_n)[labels[n]]) over a N×1×1×K logit batch.
template <typename T>
Var weighted_nll(Tape<T>& tape, Var logits, std::span<const int> labels, std::vector<T> weights) {
    const Tensor<T>& z = tape.value(logits);
    const std::size_t batch = z.shape().batch, classes = z.shape().sample_size();
    if (labels.size() != batch || weights.size() != batch)
        throw UsageError("weighted_nll: labels/weights do not match batch size");
    std::vector<T> probs(z.size());
    T total{};
    for (std::size_t n = 0; n < batch; ++n) {
        auto zs = z.sample(n);
        if (labels[n] < 0 || static_cast<std::size_t>(labels[n]) >= classes)
            throw UsageError("weighted_nll: label out of range");
        T mx = zs[0];
        for (T v : zs) mx = std::max(mx, v);
        T sum{};
        for (T v : zs) sum += std::exp(v - mx);
        const T log_sum = std::log(sum) + mx;
        for (std::size_t k = 0; k < classes; ++k) probs[n * classes + k] = std::exp(zs[k] - log_sum);
        total += weights[n] * (log_sum - zs[labels[n]]);
    }
    std::vector<int> lab(labels.begin(), labels.end());
    const std::size_t zi = logits.id;
    return tape.record(Tensor<T>(Shape{1, 1, 1, 1}, total), {logits},
                       [zi, probs = std::move(probs), lab = std::move(lab), weights = std::move(weights),
                        classes](Tape<T>& t, std::size_t self) {
                           const T g = t.grad(self)[0];
                           Tensor<T>* gz = t.grad_target(zi);
                           for (std::size_t n = 0; n < lab.size(); ++n)
                               for (std::size_t k = 0; k < classes; ++k) {
                                   const T onehot = static_cast<int>(k) == lab[n] ? T(1) : T(0);
                                   (*gz)[n * classes + k] += g * weights[n] * (probs[n * classes + k] - onehot);
                               }
                       });
}

// Per-class mean cross-entropy summed over classes. Every class in
// [0, classes) must be present.
template <typename T>
Var class_balanced_cross_entropy(Tape<T>& tape, Var logits, std::span<const int> labels, std::size_t classes = 2) {
    std::vector<std::size_t> counts(classes, 0);
    for (int l : labels) {
        if (l < 0 || static_cast<std::size_t>(l) >= classes) throw UsageError("class label out of range");
        counts[static_cast<std::size_t>(l)]++;
    }
    for (std::size_t c = 0; c < classes; ++c)
        if (counts[c] == 0) throw UsageError("class-balanced cross-entropy needs every class in the batch");
    std::vector<T> w(labels.size());
    for (std::size_t n = 0; n < labels.size(); ++n) w[n] = T(1) / static_cast<T>(counts[labels[n]]);
    return weighted_nll(tape, logits, labels, std::move(w));
}

// Plain mean cross-entropy (binary CE over a two-way softmax).
template <typename T>
Var mean_cross_entropy(Tape<T>& tape, Var logits, std::span<const int> labels) {
    if (labels.empty()) throw UsageError("cross-entropy of an empty batch");
    std::vector<T> w(labels.size(), T(1) / static_cast<T>(labels.size()));
    return weighted_nll(tape, logits, labels, std::move(w));
}

// Value-level class-balanced cross-entropy on probabilities: for each class
// c, the mean of -log p_true over that class's samples, summed over classes.
inline double cross_entropy_classbalanced(std::span<const double> prob_of_true_class, std::span<const int> labels,
                                          std::size_t classes = 2) {
    if (prob_of_true_class.size() != labels.size()) throw UsageError("probabilities/labels length mismatch");
    std::vector<double> sums(classes, 0.0);
    std::vector<std::size_t> counts(classes, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int l = labels[i];
        if (l < 0 || static_cast<std::size_t>(l) >= classes) throw UsageError("class label out of range");
        sums[static_cast<std::size_t>(l)] -= std::log(prob_of_true_class[i]);
        counts[static_cast<std::size_t>(l)]++;
    }
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
        if (counts[c] == 0) throw UsageError("class-balanced cross-entropy needs every class in the batch");
        total += sums[c] / static_cast<double>(counts[c]);
    }
    return total;
}

}  // namespace icegan::losses
