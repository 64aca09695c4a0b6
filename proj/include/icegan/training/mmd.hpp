#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "icegan/diffnet/tape.hpp"

namespace icegan {

// Row-major set of equal-length vectors.
struct VectorSet {
    std::vector<double> values;
    std::size_t dim = 0;

    std::size_t count() const { return dim == 0 ? 0 : values.size() / dim; }
    std::span<const double> row(std::size_t i) const { return std::span<const double>(values).subspan(i * dim, dim); }

    static VectorSet from_rows(const std::vector<std::vector<double>>& rows) {
        VectorSet s;
        if (rows.empty()) return s;
        s.dim = rows.front().size();
        for (const auto& r : rows) {
            if (r.size() != s.dim) throw ConfigError("VectorSet: ragged rows");
            s.values.insert(s.values.end(), r.begin(), r.end());
        }
        return s;
    }

    template <typename T>
    static VectorSet from_tensor(const Tensor<T>& t) {
        VectorSet s;
        s.dim = t.shape().sample_size();
        s.values.assign(t.data().begin(), t.data().end());
        return s;
    }
};

namespace mmd_detail {

template <typename A, typename B>
double squared_distance(const A& a, const B& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        d += diff * diff;
    }
    return d;
}

inline void validate(std::size_t na, std::size_t nb, std::size_t da, std::size_t db, double sigma) {
    if (na == 0 || nb == 0) throw UsageError("mmd2_rbf: both sets must be non-empty");
    if (da != db) throw ConfigError("mmd2_rbf: dimension mismatch " + std::to_string(da) + " vs " + std::to_string(db));
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("mmd2_rbf: bandwidth must be positive");
}

}  // namespace mmd_detail

// Biased (V-statistic) squared MMD with the Gaussian kernel
// k(x, y) = exp(-|x - y|^2 / (2 sigma^2)).
inline double mmd2_rbf(const VectorSet& a, const VectorSet& b, double sigma) {
    mmd_detail::validate(a.count(), b.count(), a.dim, b.dim, sigma);
    // Fixed argument order keeps the result bit-identical under swapping.
    if (b.count() < a.count() || (b.count() == a.count() && b.values < a.values)) return mmd2_rbf(b, a, sigma);
    const double inv = 1.0 / (2.0 * sigma * sigma);
    auto mean_kernel = [inv](const VectorSet& x, const VectorSet& y) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.count(); ++i)
            for (std::size_t j = 0; j < y.count(); ++j)
                s += std::exp(-mmd_detail::squared_distance(x.row(i), y.row(j)) * inv);
        return s / (static_cast<double>(x.count()) * static_cast<double>(y.count()));
    };
    return mean_kernel(a, a) + mean_kernel(b, b) - 2.0 * mean_kernel(a, b);
}

// Median of pairwise Euclidean distances over the union of the sets
// (distinct pairs). Falls back to 1 when every point coincides.
inline double median_heuristic_bandwidth(const VectorSet& a, const VectorSet& b) {
    VectorSet all = a;
    all.values.insert(all.values.end(), b.values.begin(), b.values.end());
    if (all.dim == 0) all.dim = b.dim;
    const std::size_t n = all.count();
    std::vector<double> d;
    d.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) d.push_back(std::sqrt(mmd_detail::squared_distance(all.row(i), all.row(j))));
    if (d.empty()) return 1.0;
    auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    double med = *mid;
    if (d.size() % 2 == 0) {
        const double lower = *std::max_element(d.begin(), mid);
        med = 0.5 * (med + lower);
    }
    return med > 0.0 ? med : 1.0;
}

// Differentiable squared MMD between the samples of two batches (each sample
// flattened). Kernel sums are accumulated in double precision.
template <typename T>
Var mmd2_rbf(Tape<T>& tape, Var a, Var b, double sigma) {
    const Tensor<T>& av = tape.value(a);
    const Tensor<T>& bv = tape.value(b);
    const std::size_t na = av.shape().batch, nb = bv.shape().batch;
    const std::size_t dim = av.shape().sample_size();
    mmd_detail::validate(na, nb, dim, bv.shape().sample_size(), sigma);
    const double inv = 1.0 / (2.0 * sigma * sigma);

    auto kernel_matrix = [&](const Tensor<T>& x, const Tensor<T>& y) {
        std::vector<double> k(x.shape().batch * y.shape().batch);
        for (std::size_t i = 0; i < x.shape().batch; ++i)
            for (std::size_t j = 0; j < y.shape().batch; ++j)
                k[i * y.shape().batch + j] = std::exp(-mmd_detail::squared_distance(x.sample(i), y.sample(j)) * inv);
        return k;
    };
    std::vector<double> kaa = kernel_matrix(av, av);
    std::vector<double> kbb = kernel_matrix(bv, bv);
    std::vector<double> kab = kernel_matrix(av, bv);
    auto total = [](const std::vector<double>& k) {
        double s = 0.0;
        for (double v : k) s += v;
        return s;
    };
    const double fa = 1.0 / (static_cast<double>(na) * na);
    const double fb = 1.0 / (static_cast<double>(nb) * nb);
    const double fab = 1.0 / (static_cast<double>(na) * nb);
    const double value = total(kaa) * fa + total(kbb) * fb - 2.0 * total(kab) * fab;

    const std::size_t ai = a.id, bi = b.id;
    return tape.record(
        Tensor<T>(Shape{1, 1, 1, 1}, static_cast<T>(value)), {a, b},
        [ai, bi, kaa = std::move(kaa), kbb = std::move(kbb), kab = std::move(kab), fa, fb, fab, sigma, na, nb,
         dim](Tape<T>& t, std::size_t self) {
            const double g = static_cast<double>(t.grad(self)[0]);
            const double s2 = sigma * sigma;
            const Tensor<T>& av = t.value(ai);
            const Tensor<T>& bv = t.value(bi);
            // ∂k(x, y)/∂x = -k(x, y)(x - y)/σ²
            if (Tensor<T>* ga = t.grad_target(ai)) {
                std::vector<double> acc(dim);
                for (std::size_t i = 0; i < na; ++i) {
                    std::fill(acc.begin(), acc.end(), 0.0);
                    auto xi = av.sample(i);
                    for (std::size_t j = 0; j < na; ++j) {
                        const double c = -2.0 * fa * kaa[i * na + j] / s2;
                        auto xj = av.sample(j);
                        for (std::size_t d = 0; d < dim; ++d) acc[d] += c * (double(xi[d]) - double(xj[d]));
                    }
                    for (std::size_t j = 0; j < nb; ++j) {
                        const double c = 2.0 * fab * kab[i * nb + j] / s2;
                        auto yj = bv.sample(j);
                        for (std::size_t d = 0; d < dim; ++d) acc[d] += c * (double(xi[d]) - double(yj[d]));
                    }
                    auto dst = ga->sample(i);
                    for (std::size_t d = 0; d < dim; ++d) dst[d] += static_cast<T>(g * acc[d]);
                }
            }
            if (Tensor<T>* gb = t.grad_target(bi)) {
                std::vector<double> acc(dim);
                for (std::size_t j = 0; j < nb; ++j) {
                    std::fill(acc.begin(), acc.end(), 0.0);
                    auto yj = bv.sample(j);
                    for (std::size_t k = 0; k < nb; ++k) {
                        const double c = -2.0 * fb * kbb[j * nb + k] / s2;
                        auto yk = bv.sample(k);
                        for (std::size_t d = 0; d < dim; ++d) acc[d] += c * (double(yj[d]) - double(yk[d]));
                    }
                    for (std::size_t i = 0; i < na; ++i) {
                        const double c = 2.0 * fab * kab[i * nb + j] / s2;
                        auto xi = av.sample(i);
                        for (std::size_t d = 0; d < dim; ++d) acc[d] += c * (double(yj[d]) - double(xi[d]));
                    }
                    auto dst = gb->sample(j);
                    for (std::size_t d = 0; d < dim; ++d) dst[d] += static_cast<T>(g * acc[d]);
                }
            }
        });
}

}  // namespace icegan
