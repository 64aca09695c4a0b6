#pragma once

#include <random>
#include <string>
#include <vector>

#include "icegan/feature_count.hpp"
#include "icegan/diffnet/layers.hpp"

namespace icegan {


// Per-sample shapes of the GAN stages.
inline constexpr Shape kInputShape{1, 1, 1, 28};
inline constexpr Shape kEncoderHiddenShape{1, 4, 1, 25};
inline constexpr Shape kEncodedShape{1, 8, 1, 22};
inline constexpr Shape kDecoderHiddenShape{1, 8, 1, 25};

namespace detail {

inline void expect_sample_shape(const Shape& actual, const Shape& expected, const char* where) {
    if (actual.with_batch(1) != expected)
        throw ConfigError(std::string(where) + ": expected " + expected.sample_str() + ", got " + actual.sample_str());
}

template <typename T>
void check_model_input(const Tensor<T>& x) {
    expect_sample_shape(x.shape(), kInputShape, "model input");
    if (!x.all_finite()) throw InputError("model input contains non-finite values");
}

}  // namespace detail

// Forward values of one GAN for a batch (all N×C×1×W).
template <typename T>
struct GanForwardTrace {
    Tensor<T> h_ge;    // generator encoder features, 8x1x22
    Tensor<T> x_gd;    // reconstruction, 1x1x28, in [-1, 1]
    Tensor<T> h_de;    // discriminator encoder features of x_gd, 8x1x22
    Tensor<T> y;       // h_de - h_ge
    Tensor<T> d_real;  // D(x), N×1×1×1
    Tensor<T> d_fake;  // D(G(x))
};

template <typename T>
struct GanVars {
    Var h_ge;
    Var x_gd;
    Var h_de;
    Var y;
};

// Generator encoder / decoder and discriminator encoder + scoring head:
//   GE: conv(1→4,k4) lrelu bn, conv(4→8,k4)            1x1x28 → 8x1x22
//   GD: convT(8→8,k4) lrelu bn, convT(8→1,k4) lrelu bn, tanh   → 1x1x28
//   DE: conv(1→4,k4) lrelu bn, conv(4→8,k4)            1x1x28 → 8x1x22
//   head: FC(176→1) sigmoid
// The second conv of each encoder carries no activation.
template <typename T>
struct GanModel {
    LayerParams<T> ge_conv1, ge_bn1, ge_conv2;
    LayerParams<T> gd_convt1, gd_bn1, gd_convt2, gd_bn2;
    LayerParams<T> de_conv1, de_bn1, de_conv2;
    LayerParams<T> d_head;
    T leaky_slope = T(0.01);

    static GanModel create(std::mt19937_64& rng, const std::string& prefix, ParamGroup group = ParamGroup::gan_feature,
                           double slope = 0.01) {
        using namespace layers;
        GanModel m;
        m.leaky_slope = static_cast<T>(slope);
        m.ge_conv1 = make_layer<T>(LayerKind::conv1d, conv1d_hyper(1, 4, 4, 1), prefix + ".ge.conv1", group, rng, slope);
        m.ge_bn1 = make_layer<T>(LayerKind::batchnorm, batchnorm_hyper(4), prefix + ".ge.bn1", group, rng);
        m.ge_conv2 = make_layer<T>(LayerKind::conv1d, conv1d_hyper(4, 8, 4, 1), prefix + ".ge.conv2", group, rng, slope);
        m.gd_convt1 = make_layer<T>(LayerKind::conv_transpose1d, conv1d_hyper(8, 8, 4, 1), prefix + ".gd.convt1", group, rng, slope);
        m.gd_bn1 = make_layer<T>(LayerKind::batchnorm, batchnorm_hyper(8), prefix + ".gd.bn1", group, rng);
        m.gd_convt2 = make_layer<T>(LayerKind::conv_transpose1d, conv1d_hyper(8, 1, 4, 1), prefix + ".gd.convt2", group, rng, slope);
        m.gd_bn2 = make_layer<T>(LayerKind::batchnorm, batchnorm_hyper(1), prefix + ".gd.bn2", group, rng);
        m.de_conv1 = make_layer<T>(LayerKind::conv1d, conv1d_hyper(1, 4, 4, 1), prefix + ".de.conv1", group, rng, slope);
        m.de_bn1 = make_layer<T>(LayerKind::batchnorm, batchnorm_hyper(4), prefix + ".de.bn1", group, rng);
        m.de_conv2 = make_layer<T>(LayerKind::conv1d, conv1d_hyper(4, 8, 4, 1), prefix + ".de.conv2", group, rng, slope);
        m.d_head = make_layer<T>(LayerKind::fully_connected, dense_hyper(176, 1), prefix + ".d.head", group, rng, 1.0);
        return m;
    }

    std::vector<LayerParams<T>*> layers() {
        return {&ge_conv1, &ge_bn1,  &ge_conv2, &gd_convt1, &gd_bn1, &gd_convt2,
                &gd_bn2,   &de_conv1, &de_bn1,  &de_conv2,  &d_head};
    }
    std::vector<LayerParams<T>*> encoder_layers() { return {&ge_conv1, &ge_bn1, &ge_conv2}; }
    std::vector<LayerParams<T>*> generator_layers() {
        return {&ge_conv1, &ge_bn1, &ge_conv2, &gd_convt1, &gd_bn1, &gd_convt2, &gd_bn2};
    }
    std::vector<LayerParams<T>*> discriminator_layers() { return {&de_conv1, &de_bn1, &de_conv2, &d_head}; }
    // Layers that shape the residual output y (everything but the scoring head).
    std::vector<LayerParams<T>*> feature_layers() {
        return {&ge_conv1, &ge_bn1, &ge_conv2, &gd_convt1, &gd_bn1, &gd_convt2, &gd_bn2, &de_conv1, &de_bn1, &de_conv2};
    }

    static std::vector<Parameter<T>*> params_of(const std::vector<LayerParams<T>*>& ls) {
        std::vector<Parameter<T>*> out;
        for (LayerParams<T>* l : ls) {
            out.push_back(&l->weight);
            out.push_back(&l->bias);
        }
        return out;
    }
    std::vector<Parameter<T>*> params() { return params_of(layers()); }
    std::vector<Parameter<T>*> generator_params() { return params_of(generator_layers()); }
    std::vector<Parameter<T>*> discriminator_params() { return params_of(discriminator_layers()); }

    void set_group(ParamGroup g) {
        for (Parameter<T>* p : params()) p->group = g;
    }

    Var encode(Tape<T>& tape, Var x, const PassMode& pass) {
        Var h = apply(tape, ge_conv1, x, pass);
        detail::expect_sample_shape(tape.value(h).shape(), kEncoderHiddenShape, "generator encoder conv1");
        h = ops::leaky_relu(tape, h, leaky_slope);
        h = apply(tape, ge_bn1, h, pass);
        h = apply(tape, ge_conv2, h, pass);
        detail::expect_sample_shape(tape.value(h).shape(), kEncodedShape, "generator encoder conv2");
        return h;
    }

    Var decode(Tape<T>& tape, Var h, const PassMode& pass) {
        Var x = apply(tape, gd_convt1, h, pass);
        detail::expect_sample_shape(tape.value(x).shape(), kDecoderHiddenShape, "generator decoder convT1");
        x = ops::leaky_relu(tape, x, leaky_slope);
        x = apply(tape, gd_bn1, x, pass);
        x = apply(tape, gd_convt2, x, pass);
        detail::expect_sample_shape(tape.value(x).shape(), kInputShape, "generator decoder convT2");
        x = ops::leaky_relu(tape, x, leaky_slope);
        x = apply(tape, gd_bn2, x, pass);
        return ops::tanh(tape, x);
    }

    Var disc_encode(Tape<T>& tape, Var x, const PassMode& pass) {
        Var h = apply(tape, de_conv1, x, pass);
        detail::expect_sample_shape(tape.value(h).shape(), kEncoderHiddenShape, "discriminator encoder conv1");
        h = ops::leaky_relu(tape, h, leaky_slope);
        h = apply(tape, de_bn1, h, pass);
        h = apply(tape, de_conv2, h, pass);
        detail::expect_sample_shape(tape.value(h).shape(), kEncodedShape, "discriminator encoder conv2");
        return h;
    }

    // Pre-sigmoid discriminator score, N×1×1×1.
    Var disc_logit(Tape<T>& tape, Var h_de, const PassMode& pass) {
        Var z = apply(tape, d_head, h_de, pass);
        return ops::reshape(tape, z, Shape{tape.value(z).shape().batch, 1, 1, 1});
    }

    // y = DE(GD(GE(x))) - GE(x)
    GanVars<T> forward(Tape<T>& tape, Var x, const PassMode& generator_pass, const PassMode& discriminator_pass) {
        GanVars<T> v;
        v.h_ge = encode(tape, x, generator_pass);
        v.x_gd = decode(tape, v.h_ge, generator_pass);
        v.h_de = disc_encode(tape, v.x_gd, discriminator_pass);
        v.y = ops::sub(tape, v.h_de, v.h_ge);
        return v;
    }

    template <typename U>
    GanModel<U> cast() const {
        GanModel<U> m;
        m.leaky_slope = static_cast<U>(leaky_slope);
        m.ge_conv1 = ge_conv1.template cast<U>();
        m.ge_bn1 = ge_bn1.template cast<U>();
        m.ge_conv2 = ge_conv2.template cast<U>();
        m.gd_convt1 = gd_convt1.template cast<U>();
        m.gd_bn1 = gd_bn1.template cast<U>();
        m.gd_convt2 = gd_convt2.template cast<U>();
        m.gd_bn2 = gd_bn2.template cast<U>();
        m.de_conv1 = de_conv1.template cast<U>();
        m.de_bn1 = de_bn1.template cast<U>();
        m.de_conv2 = de_conv2.template cast<U>();
        m.d_head = d_head.template cast<U>();
        return m;
    }
};

// Eval-mode forward of one GAN on a batch of N×1×1×28 inputs.
template <typename T>
GanForwardTrace<T> gan_forward(GanModel<T>& gan, const Tensor<T>& x) {
    detail::check_model_input(x);
    Tape<T> tape;
    const PassMode pass = PassMode::inference();
    Var xv = tape.constant(x);
    GanVars<T> v = gan.forward(tape, xv, pass, pass);
    Var real_logit = gan.disc_logit(tape, gan.disc_encode(tape, xv, pass), pass);
    Var fake_logit = gan.disc_logit(tape, v.h_de, pass);
    GanForwardTrace<T> tr;
    tr.h_ge = tape.value(v.h_ge);
    tr.x_gd = tape.value(v.x_gd);
    tr.h_de = tape.value(v.h_de);
    tr.y = tape.value(v.y);
    tr.d_real = tape.value(ops::sigmoid(tape, real_logit));
    tr.d_fake = tape.value(ops::sigmoid(tape, fake_logit));
    return tr;
}

}  // namespace icegan
