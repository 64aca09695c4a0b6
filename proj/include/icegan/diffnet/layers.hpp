#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "icegan/diffnet/ops.hpp"

namespace icegan {

enum class LayerKind : std::uint8_t {
    conv1d = 1,
    conv_transpose1d = 2,
    conv2d = 3,
    fully_connected = 4,
    batchnorm = 5,
};

inline const char* to_string(LayerKind k) {
    switch (k) {
        case LayerKind::conv1d: return "conv1d";
        case LayerKind::conv_transpose1d: return "convtranspose1d";
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::fully_connected: return "fullyconnected";
        case LayerKind::batchnorm: return "batchnorm";
    }
    return "?";
}

// (filters / kernel size / stride) plus the input width the layer was built
// for. For fully-connected layers `in_channels` is the input length and
// `filters` the output length; for batchnorm `filters` is the channel count.
struct LayerHyper {
    std::uint32_t in_channels = 0;
    std::uint32_t filters = 0;
    std::uint32_t kernel_rows = 1;
    std::uint32_t kernel_cols = 1;
    std::uint32_t stride_rows = 1;
    std::uint32_t stride_cols = 1;

    friend bool operator==(const LayerHyper&, const LayerHyper&) = default;
};

template <typename T>
struct LayerParams {
    LayerKind kind = LayerKind::fully_connected;
    LayerHyper hyper;
    Parameter<T> weight;  // gamma for batchnorm
    Parameter<T> bias;    // beta for batchnorm
    Tensor<T> running_mean;
    Tensor<T> running_var;

    std::vector<Parameter<T>*> params() { return {&weight, &bias}; }

    template <typename U>
    LayerParams<U> cast() const {
        LayerParams<U> out;
        out.kind = kind;
        out.hyper = hyper;
        out.weight = Parameter<U>{weight.name, weight.value.template cast<U>(), {}, weight.group};
        out.bias = Parameter<U>{bias.name, bias.value.template cast<U>(), {}, bias.group};
        out.running_mean = running_mean.template cast<U>();
        out.running_var = running_var.template cast<U>();
        return out;
    }
};

namespace layers {

inline Shape weight_shape(LayerKind kind, const LayerHyper& h) {
    switch (kind) {
        case LayerKind::conv1d:
        case LayerKind::conv2d: return Shape{h.filters, h.in_channels, h.kernel_rows, h.kernel_cols};
        case LayerKind::conv_transpose1d: return Shape{h.in_channels, h.filters, 1, h.kernel_cols};
        case LayerKind::fully_connected: return Shape{1, 1, h.filters, h.in_channels};
        case LayerKind::batchnorm: return Shape{1, 1, 1, h.filters};
    }
    throw ConfigError("unknown layer kind");
}

inline std::size_t fan_in(LayerKind kind, const LayerHyper& h) {
    switch (kind) {
        case LayerKind::conv1d:
        case LayerKind::conv2d: return std::size_t{h.in_channels} * h.kernel_rows * h.kernel_cols;
        case LayerKind::conv_transpose1d: return std::size_t{h.in_channels} * h.kernel_cols;
        case LayerKind::fully_connected: return h.in_channels;
        case LayerKind::batchnorm: return 1;
    }
    return 1;
}

// Builds a layer with uniform fan-in scaled weights, U(-b, b) with
// b = sqrt(6 / ((1 + slope^2) fan_in)) (leaky-ReLU Kaiming gain), zero bias.
// Batchnorm starts at gamma = 1, beta = 0, running (0, 1).
template <typename T>
LayerParams<T> make_layer(LayerKind kind, LayerHyper hyper, const std::string& name, ParamGroup group,
                          std::mt19937_64& rng, double slope = 0.01) {
    LayerParams<T> layer;
    layer.kind = kind;
    layer.hyper = hyper;
    const Shape ws = weight_shape(kind, hyper);
    layer.weight = Parameter<T>{name + ".weight", Tensor<T>(ws), {}, group};
    layer.bias = Parameter<T>{name + ".bias", Tensor<T>(Shape{1, 1, 1, hyper.filters}), {}, group};
    if (kind == LayerKind::batchnorm) {
        layer.weight.value.fill(T(1));
        layer.running_mean = Tensor<T>(Shape{1, 1, 1, hyper.filters}, T(0));
        layer.running_var = Tensor<T>(Shape{1, 1, 1, hyper.filters}, T(1));
        layer.weight.name = name + ".gamma";
        layer.bias.name = name + ".beta";
        return layer;
    }
    const double bound = std::sqrt(6.0 / ((1.0 + slope * slope) * static_cast<double>(fan_in(kind, hyper))));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (T& w : layer.weight.value.data()) w = static_cast<T>(dist(rng));
    return layer;
}

inline LayerHyper conv1d_hyper(std::uint32_t in, std::uint32_t filters, std::uint32_t kernel, std::uint32_t stride) {
    return LayerHyper{in, filters, 1, kernel, 1, stride};
}

inline LayerHyper conv2d_hyper(std::uint32_t in, std::uint32_t filters, std::uint32_t kr, std::uint32_t kc,
                               std::uint32_t sr, std::uint32_t sc) {
    return LayerHyper{in, filters, kr, kc, sr, sc};
}

inline LayerHyper dense_hyper(std::uint32_t in, std::uint32_t out) { return LayerHyper{in, out, 1, 1, 1, 1}; }

inline LayerHyper batchnorm_hyper(std::uint32_t channels) { return LayerHyper{channels, channels, 1, 1, 1, 1}; }

}  // namespace layers

// How a forward pass treats one component: batchnorm mode, whether its
// parameters are differentiated, and whether running stats may move.
struct PassMode {
    ops::Mode mode = ops::Mode::eval;
    bool trainable = false;
    bool update_running_stats = true;

    static PassMode train() { return {ops::Mode::train, true, true}; }
    static PassMode inference() { return {ops::Mode::eval, false, false}; }
};

// Applies one layer on the tape.
template <typename T>
Var apply(Tape<T>& tape, LayerParams<T>& layer, Var x, const PassMode& pass) {
    Var w = tape.parameter(layer.weight, pass.trainable);
    Var b = tape.parameter(layer.bias, pass.trainable);
    const LayerHyper& h = layer.hyper;
    switch (layer.kind) {
        case LayerKind::conv1d: return ops::conv1d(tape, x, w, b, h.stride_cols);
        case LayerKind::conv2d: return ops::conv2d(tape, x, w, b, ops::Stride2{h.stride_rows, h.stride_cols});
        case LayerKind::conv_transpose1d: return ops::conv_transpose1d(tape, x, w, b, h.stride_cols);
        case LayerKind::fully_connected: return ops::fully_connected(tape, x, w, b);
        case LayerKind::batchnorm: {
            ops::BatchNormOptions opt;
            opt.update_running_stats = pass.update_running_stats;
            return ops::batchnorm(tape, x, w, b, layer.running_mean, layer.running_var, pass.mode, opt);
        }
    }
    throw ConfigError("unknown layer kind");
}

}  // namespace icegan
