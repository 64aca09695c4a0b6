#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "icegan/errors.hpp"

namespace icegan {

// Batch × channels × rows × cols. A single sample has batch == 1; vectors are
// stored along cols. Weight tensors reuse the same four slots
// (filters, in-channels, kernel rows, kernel cols).
struct Shape {
    std::size_t batch = 1;
    std::size_t channels = 1;
    std::size_t rows = 1;
    std::size_t cols = 1;

    constexpr std::size_t size() const { return batch * channels * rows * cols; }
    constexpr std::size_t sample_size() const { return channels * rows * cols; }
    constexpr Shape with_batch(std::size_t n) const { return {n, channels, rows, cols}; }

    friend constexpr bool operator==(const Shape&, const Shape&) = default;

    std::string str() const {
        return std::to_string(batch) + "x" + std::to_string(channels) + "x" + std::to_string(rows) +
               "x" + std::to_string(cols);
    }
    // Per-sample form used in the architecture tables, e.g. "8x1x22".
    std::string sample_str() const {
        return std::to_string(channels) + "x" + std::to_string(rows) + "x" + std::to_string(cols);
    }
};

template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T{}) : shape_(shape), data_(shape.size(), fill) {}
    Tensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
        if (data_.size() != shape_.size())
            throw ConfigError("tensor data length " + std::to_string(data_.size()) +
                              " does not match shape " + shape_.str());
    }

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::size_t index(std::size_t n, std::size_t c, std::size_t r, std::size_t w) const {
        return ((n * shape_.channels + c) * shape_.rows + r) * shape_.cols + w;
    }
    T& at(std::size_t n, std::size_t c, std::size_t r, std::size_t w) { return data_[index(n, c, r, w)]; }
    const T& at(std::size_t n, std::size_t c, std::size_t r, std::size_t w) const {
        return data_[index(n, c, r, w)];
    }

    std::span<T> data() { return data_; }
    std::span<const T> data() const { return data_; }
    std::vector<T>& storage() { return data_; }
    const std::vector<T>& storage() const { return data_; }

    std::span<const T> sample(std::size_t n) const {
        const std::size_t len = shape_.sample_size();
        return std::span<const T>(data_).subspan(n * len, len);
    }
    std::span<T> sample(std::size_t n) {
        const std::size_t len = shape_.sample_size();
        return std::span<T>(data_).subspan(n * len, len);
    }

    Tensor reshaped(Shape shape) const {
        if (shape.size() != size())
            throw ConfigError("cannot reshape " + shape_.str() + " to " + shape.str());
        return Tensor(shape, data_);
    }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(data_.size());
        std::transform(data_.begin(), data_.end(), out.begin(), [](T v) { return static_cast<U>(v); });
        return Tensor<U>(shape_, std::move(out));
    }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
    }

    Tensor& operator+=(const Tensor& other) {
        if (other.shape_ != shape_)
            throw ConfigError("tensor add: " + shape_.str() + " vs " + other.shape_.str());
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
        return *this;
    }

private:
    Shape shape_{0, 0, 0, 0};
    std::vector<T> data_;
};

template <typename T>
Tensor<T> zeros_like(const Tensor<T>& t) {
    return Tensor<T>(t.shape());
}

}  // namespace icegan
