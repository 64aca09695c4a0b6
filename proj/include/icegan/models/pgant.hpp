#pragma once

#include <random>
#include <vector>

#include "icegan/models/pganc.hpp"

namespace icegan {

// Two parallel GANs → concatenation → CNN feature extractor
// (conv2d lrelu bn, flattened to D, length 152) → FNN classifier
// (FC1 152→hidden, lrelu, FC2 hidden→2, softmax). The domain critic works on
// D and on the FC1 activation.
template <typename T>
struct PgantModel {
    ParallelFrontEnd<T> front;
    ConvStage<T> cnn_fe;
    LayerParams<T> fc1;
    LayerParams<T> fc2;
    T leaky_slope = T(0.01);

    struct Vars {
        Var f;
        Var d;    // N×1×1×152
        Var fc1;  // N×1×1×hidden, post-activation
        Var logits;
        Var probs;
    };

    static PgantModel create(std::mt19937_64& rng, FrontEndKind kind = FrontEndKind::gan, std::uint32_t hidden = 16,
                             double slope = 0.01) {
        PgantModel m;
        m.leaky_slope = static_cast<T>(slope);
        m.front = ParallelFrontEnd<T>::create(kind, rng, slope);
        m.cnn_fe = ConvStage<T>::create(rng, "cnn_fe", ParamGroup::cnn_feature, slope);
        m.fc1 = layers::make_layer<T>(LayerKind::fully_connected, layers::dense_hyper(kConvFeatureLength, hidden), "fnn.fc1",
                                      ParamGroup::classifier, rng, slope);
        m.fc2 = layers::make_layer<T>(LayerKind::fully_connected, layers::dense_hyper(hidden, 2), "fnn.fc2",
                                      ParamGroup::classifier, rng, 1.0);
        return m;
    }

    std::size_t hidden() const { return fc1.hyper.filters; }

    // Runs everything after the front end.
    Vars head(Tape<T>& tape, Var f, const PassMode& fe_pass, const PassMode& cls_pass) {
        Vars v;
        v.f = f;
        v.d = ops::flatten(tape, cnn_fe.forward(tape, f, fe_pass, leaky_slope));
        if (tape.value(v.d).shape().sample_size() != kConvFeatureLength) throw ConfigError("D must have length 152");
        v.fc1 = ops::leaky_relu(tape, apply(tape, fc1, v.d, cls_pass), leaky_slope);
        v.logits = apply(tape, fc2, v.fc1, cls_pass);
        v.probs = ops::softmax(tape, v.logits);
        return v;
    }

    Vars forward(Tape<T>& tape, Var x, const PassMode& front_pass, const PassMode& fe_pass, const PassMode& cls_pass) {
        return head(tape, front.forward(tape, x, front_pass), fe_pass, cls_pass);
    }

    std::vector<LayerParams<T>*> fe_layers() { return cnn_fe.layers(); }
    std::vector<LayerParams<T>*> classifier_layers() { return {&fc1, &fc2}; }
    std::vector<LayerParams<T>*> layers() {
        auto out = front.layers();
        for (auto* l : fe_layers()) out.push_back(l);
        for (auto* l : classifier_layers()) out.push_back(l);
        return out;
    }
    std::vector<Parameter<T>*> params() {
        auto out = front.params();
        for (auto* p : GanModel<T>::params_of(fe_layers())) out.push_back(p);
        for (auto* p : GanModel<T>::params_of(classifier_layers())) out.push_back(p);
        return out;
    }
};

template <typename T>
struct PgantOutputs {
    Tensor<T> probs;  // N×1×1×2
    Tensor<T> d;      // N×1×1×152
    Tensor<T> fc1;    // N×1×1×hidden
};

template <typename T>
PgantOutputs<T> pgant_forward(PgantModel<T>& model, const Tensor<T>& x) {
    Tape<T> tape;
    const PassMode pass = PassMode::inference();
    auto v = model.forward(tape, tape.constant(x), pass, pass, pass);
    return {tape.value(v.probs), tape.value(v.d), tape.value(v.fc1)};
}

}  // namespace icegan
