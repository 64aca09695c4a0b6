#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "icegan/errors.hpp"

namespace icegan::eval {

// Fraction of icing labels among the k Euclidean nearest training rows of
// each query. Equal distances are resolved by training-row order.
template <std::size_t D>
std::vector<double> knn_baseline(std::span<const std::array<double, D>> train, std::span<const int> train_labels,
                                 std::span<const std::array<double, D>> queries, std::size_t k = 5) {
    if (train.size() != train_labels.size()) throw UsageError("knn_baseline: rows and labels differ in length");
    if (k == 0) throw ConfigError("knn_baseline: k must be positive");
    if (k > train.size()) throw ConfigError("knn_baseline: k exceeds the training set size");
    for (int l : train_labels)
        if (l != 0 && l != 1) throw InputError("knn_baseline: training labels must be 0 or 1");
    std::vector<std::pair<double, std::size_t>> dist(train.size());
    std::vector<double> out;
    out.reserve(queries.size());
    for (const auto& q : queries) {
        for (std::size_t i = 0; i < train.size(); ++i) {
            double d = 0;
            for (std::size_t j = 0; j < D; ++j) {
                const double t = q[j] - train[i][j];
                d += t * t;
            }
            dist[i] = {d, i};
        }
        std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1), dist.end());
        std::size_t icing = 0;
        for (std::size_t m = 0; m < k; ++m) icing += train_labels[dist[m].second] == 1;
        out.push_back(static_cast<double>(icing) / static_cast<double>(k));
    }
    return out;
}

}  // namespace icegan::eval
