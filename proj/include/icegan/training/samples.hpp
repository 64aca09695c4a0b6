#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "icegan/diffnet/tensor.hpp"
#include "icegan/models/gan.hpp"

namespace icegan {

// Label value for samples whose class is unknown (target domain).
inline constexpr int kUnlabeled = -1;

// A batch of normalized feature vectors, N×1×1×28, with labels and the
// identities of the records they came from.
struct Samples {
    Tensor<float> x;
    std::vector<int> labels;
    std::vector<std::uint64_t> ids;

    std::size_t size() const { return labels.size(); }
    bool empty() const { return labels.empty(); }

    std::size_t count(int label) const { return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label)); }

    Samples select(std::span<const std::size_t> idx) const {
        Samples out;
        const std::size_t d = x.shape().sample_size();
        out.x = Tensor<float>(x.shape().with_batch(idx.size()));
        out.labels.reserve(idx.size());
        out.ids.reserve(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            if (idx[k] >= size()) throw UsageError("Samples::select index out of range");
            std::copy_n(x.sample(idx[k]).begin(), d, out.x.sample(k).begin());
            out.labels.push_back(labels[idx[k]]);
            out.ids.push_back(ids.empty() ? idx[k] : ids[idx[k]]);
        }
        return out;
    }

    Samples of_class(int label) const {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < size(); ++i)
            if (labels[i] == label) idx.push_back(i);
        return select(idx);
    }

    // Same samples with every label replaced by kUnlabeled.
    Samples unlabeled() const {
        Samples out = *this;
        std::fill(out.labels.begin(), out.labels.end(), kUnlabeled);
        return out;
    }

    void validate() const {
        detail::expect_sample_shape(x.shape(), kInputShape, "samples");
        if (x.shape().batch != labels.size()) throw UsageError("samples: label count does not match feature rows");
        if (!ids.empty() && ids.size() != labels.size()) throw UsageError("samples: id count does not match feature rows");
    }

    static Samples from_rows(const std::vector<std::array<float, kFeatureCount>>& rows, std::vector<int> labels,
                             std::vector<std::uint64_t> ids = {}) {
        Samples s;
        s.x = Tensor<float>(Shape{rows.size(), 1, 1, kFeatureCount});
        for (std::size_t n = 0; n < rows.size(); ++n) std::copy(rows[n].begin(), rows[n].end(), s.x.sample(n).begin());
        s.labels = std::move(labels);
        s.ids = std::move(ids);
        s.validate();
        return s;
    }
};

template <typename T>
Tensor<T> gather(const Tensor<T>& x, std::span<const std::size_t> idx) {
    const std::size_t d = x.shape().sample_size();
    Tensor<T> out(x.shape().with_batch(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) std::copy_n(x.sample(idx[k]).begin(), d, out.sample(k).begin());
    return out;
}

inline std::vector<int> gather_labels(std::span<const int> labels, std::span<const std::size_t> idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(labels[i]);
    return out;
}

// Shuffled mini-batches over n items. A trailing batch of one is merged into
// the previous batch so batchnorm always sees at least two samples.
inline std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n, std::size_t batch_size, std::mt19937_64& rng) {
    if (batch_size < 2) throw ConfigError("batch size must be at least 2");
    if (n < 2) throw UsageError("need at least two samples to form a batch");
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t s = 0; s < n; s += batch_size)
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(s),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, s + batch_size)));
    if (out.size() > 1 && out.back().size() == 1) {
        out[out.size() - 2].push_back(out.back().front());
        out.pop_back();
    }
    return out;
}

// Mini-batches in which every class present in `labels` appears in every
// batch, in proportion to its frequency.
inline std::vector<std::vector<std::size_t>> stratified_batches(std::span<const int> labels, std::size_t batch_size,
                                                                std::mt19937_64& rng) {
    if (batch_size < 2) throw ConfigError("batch size must be at least 2");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    if (labels.size() < 2) throw UsageError("need at least two samples to form a batch");
    std::size_t batches = (labels.size() + batch_size - 1) / batch_size;
    for (auto& [label, idx] : by_class) {
        std::shuffle(idx.begin(), idx.end(), rng);
        batches = std::min(batches, idx.size());
    }
    std::vector<std::vector<std::size_t>> out(batches);
    for (auto& [label, idx] : by_class)
        for (std::size_t k = 0; k < idx.size(); ++k) out[k % batches].push_back(idx[k]);
    for (auto& b : out) std::shuffle(b.begin(), b.end(), rng);
    return out;
}

// Which labels each training component was fed, for auditing class
// separation between the parallel branches.
class DataFlowLog {
public:
    void note(const std::string& component, std::span<const int> labels) {
        auto& c = counts_[component];
        for (int l : labels) {
            if (l == 0) c[0]++;
            else if (l == 1) c[1]++;
            else c[2]++;
        }
    }

    // Counts of (normal, icing, unlabeled) samples fed to a component.
    std::array<std::size_t, 3> counts(const std::string& component) const {
        auto it = counts_.find(component);
        return it == counts_.end() ? std::array<std::size_t, 3>{0, 0, 0} : it->second;
    }

    bool saw(const std::string& component, int label) const {
        const auto c = counts(component);
        return label == 0 ? c[0] > 0 : label == 1 ? c[1] > 0 : c[2] > 0;
    }

    std::vector<std::string> components() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : counts_) out.push_back(k);
        return out;
    }

    void merge(const DataFlowLog& other) {
        for (const auto& [k, v] : other.counts_)
            for (std::size_t i = 0; i < 3; ++i) counts_[k][i] += v[i];
    }

private:
    std::map<std::string, std::array<std::size_t, 3>> counts_;
};

}  // namespace icegan
