#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "icegan/models/pganc.hpp"
#include "icegan/training/gan_trainer.hpp"

namespace icegan {

struct ClassifierTrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    std::size_t patience = 10;
    double min_delta = 1e-4;

    void validate() const {
        if (batch_size < 2) throw ConfigError("classifier batch size must be at least 2");
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("classifier learning rate must be positive");
    }
};

struct PgancTrainConfig {
    GanTrainConfig gan;
    ClassifierTrainConfig classifier;
    std::size_t finetune_epochs = 100;
    double finetune_lr_factor = 0.1;
    FrontEndKind front_end = FrontEndKind::gan;
    double leaky_slope = 0.01;

    void validate() const {
        gan.validate();
        classifier.validate();
        if (!(finetune_lr_factor > 0.0) || !std::isfinite(finetune_lr_factor))
            throw ConfigError("fine-tune learning-rate factor must be positive");
    }

    ClassifierTrainConfig finetune() const {
        ClassifierTrainConfig c = classifier;
        c.epochs = finetune_epochs;
        c.learning_rate = classifier.learning_rate * finetune_lr_factor;
        return c;
    }
};

// Front-end output F for every sample, computed in eval mode in chunks.
template <typename T>
Tensor<T> frontend_features(ParallelFrontEnd<T>& front, const Tensor<T>& x, std::size_t chunk = 1024) {
    detail::check_model_input(x);
    const std::size_t n = x.shape().batch;
    Tensor<T> out(kConcatShape.with_batch(n));
    const std::size_t d = kConcatShape.sample_size();
    for (std::size_t s = 0; s < n; s += chunk) {
        std::vector<std::size_t> idx;
        for (std::size_t i = s; i < std::min(n, s + chunk); ++i) idx.push_back(i);
        Tape<T> tape;
        const Tensor<T>& f = tape.value(front.forward(tape, tape.constant(gather(x, idx)), PassMode::inference()));
        std::copy_n(f.data().begin(), idx.size() * d, out.sample(s).begin());
    }
    return out;
}

// Class-balanced cross-entropy on the classifier head alone, over precomputed front-end features.
// Returns the number of epochs run.
template <typename T>
std::size_t train_pganc_head(PgancModel<T>& model, const Tensor<T>& features, const std::vector<int>& labels,
                             const ClassifierTrainConfig& cfg, std::mt19937_64& rng, LossReport& report,
                             const std::string& stage) {
    cfg.validate();
    Adam<T> opt(model.head_params(), AdamConfig{cfg.learning_rate});
    EarlyStopping stopper(cfg.patience, cfg.min_delta);
    std::size_t epoch = 0;
    while (epoch < cfg.epochs) {
        ++epoch;
        double total = 0;
        const auto batches = stratified_batches(labels, cfg.batch_size, rng);
        for (const auto& idx : batches) {
            Tape<T> tape;
            const auto yb = gather_labels(labels, idx);
            Var loss = losses::class_balanced_cross_entropy(tape, model.head(tape, tape.constant(gather(features, idx)), PassMode::train()), yb);
            opt.zero_grad();
            tape.backward(loss);
            try {
                opt.step();
            } catch (const DivergenceError& e) {
                throw DivergenceError(stage + ": " + e.what(), report.last_finite());
            }
            total += tape.value(loss)[0];
        }
        const double mean = total / static_cast<double>(batches.size());
        report.record(stage, epoch, "L_CNN", mean);
        if (stopper.should_stop(mean)) break;
    }
    return epoch;
}

// Class-balanced cross-entropy through the whole network (front end and head). `front_pass`
// controls the front-end batchnorm behaviour; parameters are always trained.
template <typename T>
std::size_t train_pganc_whole(PgancModel<T>& model, const Samples& data, const ClassifierTrainConfig& cfg,
                              const PassMode& front_pass, std::mt19937_64& rng, LossReport& report,
                              const std::string& stage) {
    cfg.validate();
    Adam<T> opt(model.params(), AdamConfig{cfg.learning_rate});
    EarlyStopping stopper(cfg.patience, cfg.min_delta);
    const Tensor<T> x = data.x.template cast<T>();
    std::size_t epoch = 0;
    while (epoch < cfg.epochs) {
        ++epoch;
        double total = 0;
        const auto batches = stratified_batches(data.labels, cfg.batch_size, rng);
        for (const auto& idx : batches) {
            Tape<T> tape;
            const auto yb = gather_labels(data.labels, idx);
            auto v = model.forward(tape, tape.constant(gather(x, idx)), front_pass, PassMode::train());
            Var loss = losses::class_balanced_cross_entropy(tape, v.logits, yb);
            opt.zero_grad();
            tape.backward(loss);
            try {
                opt.step();
            } catch (const DivergenceError& e) {
                throw DivergenceError(stage + ": " + e.what(), report.last_finite());
            }
            total += tape.value(loss)[0];
        }
        const double mean = total / static_cast<double>(batches.size());
        report.record(stage, epoch, "L_CNN", mean);
        if (stopper.should_stop(mean)) break;
    }
    return epoch;
}

struct PgancTrainResult {
    PgancModel<float> stage1;
    PgancModel<float> stage2;
    LossReport report;
    DataFlowLog flow;
};

inline void require_both_classes(const Samples& data, const char* what) {
    if (data.count(kNormalClass) == 0 || data.count(kIcingClass) == 0)
        throw UsageError(std::string(what) + ": training data must contain both normal and icing samples");
}

// Stage 1: GAN_normal on normal samples only, GAN_icing on icing samples
// only, then the classifier with both GANs frozen. Stage 2: the whole
// network from the stage-1 parameters at a reduced learning rate; the GAN
// batchnorm statistics stay at their single-class stage-1 values.
inline PgancTrainResult train_two_stage_pganc(const Samples& train, const PgancTrainConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    train.validate();
    require_both_classes(train, "train_two_stage_pganc");
    if (cfg.front_end != FrontEndKind::gan) throw ConfigError("two-stage training needs the GAN front end");
    std::mt19937_64 rng(seed);
    PgancTrainResult r;
    PgancModel<float> model = PgancModel<float>::create(rng, FrontEndKind::gan, cfg.leaky_slope);

    const Samples normal = train.of_class(kNormalClass);
    const Samples icing = train.of_class(kIcingClass);
    r.flow.note("gan_normal", normal.labels);
    train_gan(model.front.normal, normal.x, cfg.gan, rng, r.report, "gan_normal");
    r.flow.note("gan_icing", icing.labels);
    train_gan(model.front.icing, icing.x, cfg.gan, rng, r.report, "gan_icing");

    const Tensor<float> features = frontend_features(model.front, train.x);
    r.flow.note("classifier", train.labels);
    train_pganc_head(model, features, train.labels, cfg.classifier, rng, r.report, "pganc.stage1");
    r.stage1 = model;

    r.flow.note("whole_network", train.labels);
    const PassMode front_pass{ops::Mode::eval, true, false};
    train_pganc_whole(model, train, cfg.finetune(), front_pass, rng, r.report, "pganc.stage2");
    r.stage2 = std::move(model);
    return r;
}

// Whole-network cross-entropy training from random initialization with all
// batchnorms in training mode. With FrontEndKind::cnn this is the plain-CNN
// ablation; with the GAN front end it is the cold-start reference.
inline PgancModel<float> train_pganc_cold_start(const Samples& train, const PgancTrainConfig& cfg, std::uint64_t seed,
                                                LossReport& report, const std::string& stage = "pganc.cold") {
    cfg.validate();
    train.validate();
    require_both_classes(train, "train_pganc_cold_start");
    std::mt19937_64 rng(seed);
    PgancModel<float> model = PgancModel<float>::create(rng, cfg.front_end, cfg.leaky_slope);
    train_pganc_whole(model, train, cfg.classifier, PassMode::train(), rng, report, stage);
    return model;
}

}  // namespace icegan
