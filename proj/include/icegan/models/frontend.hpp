#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "icegan/models/gan.hpp"

namespace icegan {

inline constexpr Shape kConcatShape{1, 8, 2, 22};
inline constexpr Shape kConvFeatureShape{1, 4, 2, 19};
inline constexpr std::size_t kConvFeatureLength = 4 * 2 * 19;  // 152

// gan: each branch outputs the GAN residual y = h_de - h_ge.
// cnn: each branch is a plain conv stack of the same output shape (the
//      generator-encoder layers alone), used for the GAN ablations.
enum class FrontEndKind : std::uint8_t { gan = 1, cnn = 2 };

inline const char* to_string(FrontEndKind k) { return k == FrontEndKind::gan ? "gan" : "cnn"; }

// Stacks two 8x1x22 branch outputs into 8 channels of 2x22: row 0 from the
// normal branch, row 1 from the icing branch.
template <typename T>
Var concatenate(Tape<T>& tape, Var y_normal, Var y_icing) {
    detail::expect_sample_shape(tape.value(y_normal).shape(), kEncodedShape, "concatenate (normal branch)");
    detail::expect_sample_shape(tape.value(y_icing).shape(), kEncodedShape, "concatenate (icing branch)");
    if (tape.value(y_normal).shape().batch != tape.value(y_icing).shape().batch)
        throw ConfigError("concatenate: branch batch sizes differ");
    return ops::concat_rows(tape, y_normal, y_icing);
}

template <typename T>
Tensor<T> concatenate(const Tensor<T>& y_normal, const Tensor<T>& y_icing) {
    Tape<T> tape;
    return tape.value(concatenate(tape, tape.constant(y_normal), tape.constant(y_icing)));
}

// Copies `count` rows starting at `begin` out of a N×C×R×W tensor.
template <typename T>
Tensor<T> slice_rows(const Tensor<T>& t, std::size_t begin, std::size_t count) {
    const Shape s = t.shape();
    if (begin + count > s.rows) throw UsageError("slice_rows: range outside tensor");
    Tensor<T> out(Shape{s.batch, s.channels, count, s.cols});
    for (std::size_t n = 0; n < s.batch; ++n)
        for (std::size_t c = 0; c < s.channels; ++c)
            for (std::size_t r = 0; r < count; ++r)
                for (std::size_t w = 0; w < s.cols; ++w) out.at(n, c, r, w) = t.at(n, c, begin + r, w);
    return out;
}

template <typename T>
struct ParallelFrontEnd {
    FrontEndKind kind = FrontEndKind::gan;
    GanModel<T> normal;
    GanModel<T> icing;

    static ParallelFrontEnd create(FrontEndKind kind, std::mt19937_64& rng, double slope = 0.01) {
        ParallelFrontEnd f;
        f.kind = kind;
        f.normal = GanModel<T>::create(rng, "gan_normal", ParamGroup::gan_feature, slope);
        f.icing = GanModel<T>::create(rng, "gan_icing", ParamGroup::gan_feature, slope);
        return f;
    }

    Var branch(Tape<T>& tape, GanModel<T>& g, Var x, const PassMode& pass) {
        if (kind == FrontEndKind::cnn) return g.encode(tape, x, pass);
        return g.forward(tape, x, pass, pass).y;
    }

    // x: N×1×1×28 → F: N×8×2×22
    Var forward(Tape<T>& tape, Var x, const PassMode& pass) {
        detail::check_model_input(tape.value(x));
        Var yn = branch(tape, normal, x, pass);
        Var yi = branch(tape, icing, x, pass);
        Var f = concatenate(tape, yn, yi);
        detail::expect_sample_shape(tape.value(f).shape(), kConcatShape, "concatenation");
        return f;
    }

    // Layers that participate in forward().
    std::vector<LayerParams<T>*> active_layers() {
        std::vector<LayerParams<T>*> out;
        for (GanModel<T>* g : {&normal, &icing}) {
            auto ls = kind == FrontEndKind::gan ? g->feature_layers() : g->encoder_layers();
            out.insert(out.end(), ls.begin(), ls.end());
        }
        return out;
    }
    std::vector<LayerParams<T>*> layers() {
        std::vector<LayerParams<T>*> out = normal.layers();
        auto b = icing.layers();
        out.insert(out.end(), b.begin(), b.end());
        return out;
    }
    std::vector<Parameter<T>*> params() { return GanModel<T>::params_of(active_layers()); }
};

// conv2d(8→4, kernel (1,4), stride (1,1)) → leaky ReLU → batchnorm:
// 8x2x22 → 4x2x19. Shared by the PGANC classifier and the PGANT
// feature extractor.
template <typename T>
struct ConvStage {
    LayerParams<T> conv;
    LayerParams<T> bn;

    static ConvStage create(std::mt19937_64& rng, const std::string& prefix, ParamGroup group, double slope = 0.01) {
        using namespace layers;
        ConvStage s;
        s.conv = make_layer<T>(LayerKind::conv2d, conv2d_hyper(8, 4, 1, 4, 1, 1), prefix + ".conv", group, rng, slope);
        s.bn = make_layer<T>(LayerKind::batchnorm, batchnorm_hyper(4), prefix + ".bn", group, rng);
        return s;
    }

    Var forward(Tape<T>& tape, Var f, const PassMode& pass, T slope) {
        detail::expect_sample_shape(tape.value(f).shape(), kConcatShape, "conv stage input");
        Var h = apply(tape, conv, f, pass);
        detail::expect_sample_shape(tape.value(h).shape(), kConvFeatureShape, "conv stage output");
        h = ops::leaky_relu(tape, h, slope);
        return apply(tape, bn, h, pass);
    }

    std::vector<LayerParams<T>*> layers() { return {&conv, &bn}; }
};

}  // namespace icegan
