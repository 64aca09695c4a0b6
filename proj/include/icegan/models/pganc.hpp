#pragma once

#include <random>
#include <vector>

#include "icegan/models/frontend.hpp"

namespace icegan {

// Class index convention for every model output: 0 = normal, 1 = icing.
inline constexpr int kNormalClass = 0;
inline constexpr int kIcingClass = 1;

// Two parallel GANs → concatenation → CNN classifier
// (conv2d 8→4 (1,4) lrelu bn, FC 152→2, softmax).
template <typename T>
struct PgancModel {
    ParallelFrontEnd<T> front;
    ConvStage<T> conv;
    LayerParams<T> fc;
    T leaky_slope = T(0.01);

    struct Vars {
        Var f;
        Var logits;  // N×1×1×2
        Var probs;
    };

    static PgancModel create(std::mt19937_64& rng, FrontEndKind kind = FrontEndKind::gan, double slope = 0.01) {
        PgancModel m;
        m.leaky_slope = static_cast<T>(slope);
        m.front = ParallelFrontEnd<T>::create(kind, rng, slope);
        m.conv = ConvStage<T>::create(rng, "classifier", ParamGroup::classifier, slope);
        m.fc = layers::make_layer<T>(LayerKind::fully_connected, layers::dense_hyper(kConvFeatureLength, 2), "classifier.fc",
                                     ParamGroup::classifier, rng, 1.0);
        return m;
    }

    Var head(Tape<T>& tape, Var f, const PassMode& pass) {
        Var h = conv.forward(tape, f, pass, leaky_slope);
        Var z = apply(tape, fc, ops::flatten(tape, h), pass);
        if (tape.value(z).shape().sample_size() != 2) throw ConfigError("classifier must emit 2 logits");
        return z;
    }

    Vars forward(Tape<T>& tape, Var x, const PassMode& front_pass, const PassMode& head_pass) {
        Vars v;
        v.f = front.forward(tape, x, front_pass);
        v.logits = head(tape, v.f, head_pass);
        v.probs = ops::softmax(tape, v.logits);
        return v;
    }

    std::vector<LayerParams<T>*> head_layers() { return {&conv.conv, &conv.bn, &fc}; }
    std::vector<LayerParams<T>*> layers() {
        auto out = front.layers();
        auto h = head_layers();
        out.insert(out.end(), h.begin(), h.end());
        return out;
    }
    std::vector<Parameter<T>*> head_params() { return GanModel<T>::params_of(head_layers()); }
    std::vector<Parameter<T>*> params() {
        auto out = front.params();
        auto h = head_params();
        out.insert(out.end(), h.begin(), h.end());
        return out;
    }
};

// Eval-mode class probabilities, N×1×1×2.
template <typename T>
Tensor<T> pganc_forward(PgancModel<T>& model, const Tensor<T>& x) {
    Tape<T> tape;
    const PassMode pass = PassMode::inference();
    return tape.value(model.forward(tape, tape.constant(x), pass, pass).probs);
}

}  // namespace icegan
