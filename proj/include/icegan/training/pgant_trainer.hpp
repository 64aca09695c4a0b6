#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "icegan/models/pgant.hpp"
#include "icegan/training/mmd.hpp"
#include "icegan/training/pganc_trainer.hpp"

namespace icegan {

enum class BandwidthPolicy { median, fixed };

struct TransferConfig {
    double alpha = 0.1;
    double beta = 1.0;
    BandwidthPolicy bandwidth = BandwidthPolicy::median;
    double sigma = 1.0;  // used when bandwidth == fixed
    double learning_rate = 1e-3;
    std::size_t epochs = 100;
    std::size_t finetune_epochs = 50;
    double finetune_lr_factor = 0.1;
    std::size_t source_batch = 64;
    std::size_t target_batch = 64;
    std::size_t patience = 10;
    double min_delta = 1e-4;
    std::uint32_t hidden = 16;

    void validate() const {
        for (double v : {alpha, beta})
            if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("alpha and beta must be finite and non-negative");
        if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be finite and non-negative");
        if (!(finetune_lr_factor > 0.0) || !std::isfinite(finetune_lr_factor))
            throw ConfigError("fine-tune learning-rate factor must be positive");
        if (bandwidth == BandwidthPolicy::fixed && (!(sigma > 0.0) || !std::isfinite(sigma)))
            throw ConfigError("fixed RBF bandwidth must be positive");
        if (source_batch < 2 || target_batch < 2) throw ConfigError("transfer batch sizes must be at least 2");
        if (hidden == 0) throw ConfigError("FC1 width must be positive");
    }

    // The target domain only influences training through L_md.
    bool uses_target() const { return beta > 0.0; }
};

struct TransferLossValues {
    double lc = 0, lmd = 0, lms = 0, total = 0;
    bool domain_critic_active = false;
};

struct TransferVars {
    Var lc;
    Var lms;
    std::optional<Var> lmd;
    TransferLossValues values;
};

// L_c − α·L_ms + β·L_md, combined in double precision.
inline double transfer_total(double lc, double lms, double lmd, double alpha, double beta) {
    return lc - alpha * lms + beta * lmd;
}

namespace transfer_detail {

inline std::vector<std::size_t> iota(std::size_t begin, std::size_t end) {
    std::vector<std::size_t> v;
    for (std::size_t i = begin; i < end; ++i) v.push_back(i);
    return v;
}

template <typename T>
double bandwidth(const TransferConfig& cfg, const Tensor<T>& a, const std::optional<Tensor<T>>& b) {
    if (cfg.bandwidth == BandwidthPolicy::fixed) return cfg.sigma;
    const VectorSet sa = VectorSet::from_tensor(a);
    return b ? median_heuristic_bandwidth(sa, VectorSet::from_tensor(*b)) : median_heuristic_bandwidth(sa, VectorSet{{}, sa.dim});
}

}  // namespace transfer_detail

// Builds the transfer-objective terms on the tape from front-end features of a source
// batch (labelled, both classes) and, optionally, a target batch. Source and
// target pass through the feature extractor together.
template <typename T>
TransferVars transfer_objective(Tape<T>& tape, PgantModel<T>& model, Var f_source, std::span<const int> labels,
                                std::optional<Var> f_target, const TransferConfig& cfg, const PassMode& fe_pass,
                                const PassMode& cls_pass) {
    const std::size_t ns = tape.value(f_source).shape().batch;
    if (labels.size() != ns) throw UsageError("transfer_objective: label count does not match source batch");
    std::vector<std::size_t> normal_idx, icing_idx;
    for (std::size_t i = 0; i < ns; ++i) {
        if (labels[i] == kNormalClass) normal_idx.push_back(i);
        else if (labels[i] == kIcingClass) icing_idx.push_back(i);
        else throw UsageError("transfer_objective: source samples must be labelled");
    }
    if (normal_idx.empty() || icing_idx.empty()) throw UsageError("transfer_objective: source batch must contain both classes");

    const std::size_t nt = f_target ? tape.value(*f_target).shape().batch : 0;
    Var f = f_target ? ops::concat_batch(tape, f_source, *f_target) : f_source;
    auto v = model.head(tape, f, fe_pass, cls_pass);
    const auto src = transfer_detail::iota(0, ns);
    Var d_s = f_target ? ops::select_batch(tape, v.d, src) : v.d;
    Var h_s = f_target ? ops::select_batch(tape, v.fc1, src) : v.fc1;
    Var logits_s = f_target ? ops::select_batch(tape, v.logits, src) : v.logits;

    std::optional<Tensor<T>> d_t_val, h_t_val;
    Var d_t, h_t;
    if (f_target) {
        const auto tgt = transfer_detail::iota(ns, ns + nt);
        d_t = ops::select_batch(tape, v.d, tgt);
        h_t = ops::select_batch(tape, v.fc1, tgt);
        d_t_val = tape.value(d_t);
        h_t_val = tape.value(h_t);
    }
    const double sigma_d = transfer_detail::bandwidth(cfg, tape.value(d_s), d_t_val);
    const double sigma_h = transfer_detail::bandwidth(cfg, tape.value(h_s), h_t_val);

    TransferVars out;
    out.lc = losses::mean_cross_entropy(tape, logits_s, labels);
    Var ms_d = mmd2_rbf(tape, ops::select_batch(tape, d_s, normal_idx), ops::select_batch(tape, d_s, icing_idx), sigma_d);
    Var ms_h = mmd2_rbf(tape, ops::select_batch(tape, h_s, normal_idx), ops::select_batch(tape, h_s, icing_idx), sigma_h);
    out.lms = ops::weighted_sum(tape, {ms_d, ms_h}, {T(1), T(1)});
    out.values.lc = tape.value(out.lc)[0];
    out.values.lms = tape.value(out.lms)[0];
    if (f_target) {
        Var md_d = mmd2_rbf(tape, d_s, d_t, sigma_d);
        Var md_h = mmd2_rbf(tape, h_s, h_t, sigma_h);
        out.lmd = ops::weighted_sum(tape, {md_d, md_h}, {T(1), T(1)});
        out.values.lmd = tape.value(*out.lmd)[0];
        out.values.domain_critic_active = true;
    }
    out.values.total = transfer_total(out.values.lc, out.values.lms, out.values.lmd, cfg.alpha, cfg.beta);
    return out;
}

// Gradient routing: the domain-critic terms never reach the FNN classifier.
template <typename T>
bool critic_sink(const Parameter<T>& p) {
    return p.group != ParamGroup::classifier;
}

// Accumulates the routed gradients: ∂L_c into every trainable parameter,
// ∂(−α·L_ms + β·L_md) into the feature parameters only.
template <typename T>
void transfer_backward(Tape<T>& tape, const TransferVars& v, const TransferConfig& cfg) {
    tape.backward(v.lc);
    std::vector<Var> terms;
    std::vector<T> coeffs;
    if (cfg.alpha > 0.0) {
        terms.push_back(v.lms);
        coeffs.push_back(static_cast<T>(-cfg.alpha));
    }
    if (cfg.beta > 0.0 && v.lmd) {
        terms.push_back(*v.lmd);
        coeffs.push_back(static_cast<T>(cfg.beta));
    }
    if (terms.empty()) return;
    tape.backward(ops::weighted_sum(tape, terms, coeffs), critic_sink<T>);
}

// Cycles through a shuffled target set, reshuffling on exhaustion.
class TargetSampler {
public:
    TargetSampler(std::size_t n, std::uint64_t seed) : rng_(seed), order_(n) {
        for (std::size_t i = 0; i < n; ++i) order_[i] = i;
        std::shuffle(order_.begin(), order_.end(), rng_);
    }

    std::vector<std::size_t> next(std::size_t k) {
        std::vector<std::size_t> out;
        while (out.size() < k) {
            if (pos_ == order_.size()) {
                std::shuffle(order_.begin(), order_.end(), rng_);
                pos_ = 0;
            }
            out.push_back(order_[pos_++]);
        }
        return out;
    }

private:
    std::mt19937_64 rng_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
};

// Input of one transfer phase: either raw features (the front end runs on
// the tape) or precomputed front-end outputs F.
struct TransferPhase {
    std::string stage;
    bool precomputed = false;
    PassMode front_pass = PassMode::inference();
    double learning_rate = 1e-3;
    std::size_t epochs = 0;
    bool train_front = false;
    std::function<void(const TransferLossValues&)> on_batch = {};
};

struct TransferEpochLog {
    std::vector<TransferLossValues> epochs;
};

template <typename T>
TransferEpochLog run_transfer_phase(PgantModel<T>& model, const Samples& source, const Tensor<T>& source_input,
                                    const Tensor<T>* target_input, const TransferConfig& cfg, const TransferPhase& phase,
                                    std::mt19937_64& rng, std::uint64_t target_seed, LossReport& report,
                                    DataFlowLog& flow) {
    std::vector<Parameter<T>*> params;
    if (phase.train_front) params = model.params();
    else {
        for (auto* p : GanModel<T>::params_of(model.fe_layers())) params.push_back(p);
        for (auto* p : GanModel<T>::params_of(model.classifier_layers())) params.push_back(p);
    }
    Adam<T> opt(params, AdamConfig{phase.learning_rate});
    const bool with_target = cfg.uses_target() && target_input != nullptr;
    std::optional<TargetSampler> sampler;
    if (with_target) sampler.emplace(target_input->shape().batch, target_seed);

    TransferEpochLog log;
    EarlyStopping stopper(cfg.patience, cfg.min_delta);
    for (std::size_t epoch = 1; epoch <= phase.epochs; ++epoch) {
        TransferLossValues sum;
        const auto batches = stratified_batches(source.labels, cfg.source_batch, rng);
        for (const auto& idx : batches) {
            Tape<T> tape;
            const auto yb = gather_labels(source.labels, idx);
            auto input = [&](const Tensor<T>& t) {
                Var v = tape.constant(t);
                return phase.precomputed ? v : model.front.forward(tape, v, phase.front_pass);
            };
            Var fs = input(gather(source_input, idx));
            std::optional<Var> ft;
            if (with_target) {
                const auto tidx = sampler->next(cfg.target_batch);
                ft = input(gather(*target_input, tidx));
                flow.note(phase.stage + ".target", std::vector<int>(tidx.size(), kUnlabeled));
            }
            flow.note(phase.stage + ".source", yb);
            TransferVars v = transfer_objective(tape, model, fs, yb, ft, cfg, PassMode::train(), PassMode::train());
            opt.zero_grad();
            transfer_backward(tape, v, cfg);
            try {
                opt.step();
            } catch (const DivergenceError& e) {
                throw DivergenceError(phase.stage + ": " + e.what(), report.last_finite());
            }
            if (phase.on_batch) phase.on_batch(v.values);
            sum.lc += v.values.lc;
            sum.lms += v.values.lms;
            sum.lmd += v.values.lmd;
            sum.domain_critic_active = v.values.domain_critic_active;
        }
        const double nb = static_cast<double>(batches.size());
        TransferLossValues mean{sum.lc / nb, sum.lmd / nb, sum.lms / nb, 0.0, sum.domain_critic_active};
        mean.total = transfer_total(mean.lc, mean.lms, mean.lmd, cfg.alpha, cfg.beta);
        report.record(phase.stage, epoch, "L_c", mean.lc);
        report.record(phase.stage, epoch, "L_md", mean.lmd);
        report.record(phase.stage, epoch, "L_ms", mean.lms);
        report.record(phase.stage, epoch, "L_total", mean.total);
        log.epochs.push_back(mean);
        if (stopper.should_stop(mean.total)) break;
    }
    return log;
}

struct PgantTrainConfig {
    GanTrainConfig gan;
    TransferConfig transfer;
    FrontEndKind front_end = FrontEndKind::gan;
    double leaky_slope = 0.01;

    void validate() const {
        gan.validate();
        transfer.validate();
    }
};

struct PgantTrainResult {
    PgantModel<float> pretrained;  // GANs after source pre-training
    PgantModel<float> model;
    LossReport report;
    DataFlowLog flow;
    std::vector<TransferLossValues> head_epochs;
    std::vector<TransferLossValues> finetune_epochs;
};

// GAN front end: pre-train GAN_normal / GAN_icing on the labelled source
// classes, train feature extractor + classifier on the transfer objective with the GANs
// frozen, then fine-tune everything at a reduced learning rate.
// CNN front end: a single transfer-objective phase over the whole network from random
// initialization.
inline PgantTrainResult train_pgant(const Samples& source, const Samples& target, const PgantTrainConfig& cfg,
                                    std::uint64_t seed) {
    cfg.validate();
    source.validate();
    require_both_classes(source, "train_pgant");
    if (cfg.transfer.uses_target()) {
        target.validate();
        if (target.size() < 2) throw UsageError("train_pgant: target set needs at least two samples");
    }
    std::mt19937_64 rng(seed);
    const std::uint64_t target_seed = seed ^ 0x9e3779b97f4a7c15ULL;
    PgantTrainResult r;
    PgantModel<float> model = PgantModel<float>::create(rng, cfg.front_end, cfg.transfer.hidden, cfg.leaky_slope);
    const Tensor<float>* target_x = cfg.transfer.uses_target() ? &target.x : nullptr;

    if (cfg.front_end == FrontEndKind::gan) {
        const Samples normal = source.of_class(kNormalClass);
        const Samples icing = source.of_class(kIcingClass);
        r.flow.note("gan_normal", normal.labels);
        train_gan(model.front.normal, normal.x, cfg.gan, rng, r.report, "gan_normal");
        r.flow.note("gan_icing", icing.labels);
        train_gan(model.front.icing, icing.x, cfg.gan, rng, r.report, "gan_icing");
        r.pretrained = model;

        const Tensor<float> fs = frontend_features(model.front, source.x);
        Tensor<float> ft;
        if (target_x) ft = frontend_features(model.front, *target_x);
        TransferPhase head{"pgant.head", true, PassMode::inference(), cfg.transfer.learning_rate, cfg.transfer.epochs, false};
        r.head_epochs = run_transfer_phase(model, source, fs, target_x ? &ft : nullptr, cfg.transfer, head, rng, target_seed,
                                           r.report, r.flow)
                            .epochs;
        TransferPhase fine{"pgant.finetune", false, PassMode{ops::Mode::eval, true, false},
                           cfg.transfer.learning_rate * cfg.transfer.finetune_lr_factor, cfg.transfer.finetune_epochs, true};
        r.finetune_epochs = run_transfer_phase(model, source, source.x, target_x, cfg.transfer, fine, rng, target_seed + 1,
                                               r.report, r.flow)
                                .epochs;
    } else {
        r.pretrained = model;
        TransferPhase all{"pgant.cnn", false, PassMode::train(), cfg.transfer.learning_rate, cfg.transfer.epochs, true};
        r.head_epochs =
            run_transfer_phase(model, source, source.x, target_x, cfg.transfer, all, rng, target_seed, r.report, r.flow).epochs;
    }
    r.model = std::move(model);
    return r;
}

// Supervised source-only training of feature extractor + classifier on L_c
// over precomputed front-end features, mirroring the batching of the head
// phase of train_pgant. Used as the reference for the α = β = 0 reduction.
inline std::vector<double> train_source_only_head(PgantModel<float>& model, const Samples& source, const TransferConfig& cfg,
                                                  std::mt19937_64& rng, LossReport& report,
                                                  const std::string& stage = "supervised",
                                                  std::vector<double>* batch_losses = nullptr) {
    const Tensor<float> fs = frontend_features(model.front, source.x);
    std::vector<Parameter<float>*> params;
    for (auto* p : GanModel<float>::params_of(model.fe_layers())) params.push_back(p);
    for (auto* p : GanModel<float>::params_of(model.classifier_layers())) params.push_back(p);
    Adam<float> opt(params, AdamConfig{cfg.learning_rate});
    EarlyStopping stopper(cfg.patience, cfg.min_delta);
    std::vector<double> curve;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        double total = 0;
        const auto batches = stratified_batches(source.labels, cfg.source_batch, rng);
        for (const auto& idx : batches) {
            Tape<float> tape;
            const auto yb = gather_labels(source.labels, idx);
            auto v = model.head(tape, tape.constant(gather(fs, idx)), PassMode::train(), PassMode::train());
            Var loss = losses::mean_cross_entropy(tape, v.logits, yb);
            opt.zero_grad();
            tape.backward(loss);
            opt.step();
            total += tape.value(loss)[0];
            if (batch_losses) batch_losses->push_back(tape.value(loss)[0]);
        }
        curve.push_back(total / static_cast<double>(batches.size()));
        report.record(stage, epoch, "L_c", curve.back());
        if (stopper.should_stop(curve.back())) break;
    }
    return curve;
}

struct GradientAuditEntry {
    std::string term;  // "L_c", "L_md" or "L_ms"
    ParamGroup group;
    double norm;       // ‖accumulated gradient‖₂ over the group
};

// Backpropagates each transfer-objective term separately through the same routing the
// trainer uses and reports the gradient norm reaching each parameter group.
template <typename T>
std::vector<GradientAuditEntry> audit_gradient_paths(PgantModel<T>& model, const Samples& source_batch,
                                                     const Tensor<T>& target_batch, const TransferConfig& cfg) {
    const PassMode pass{ops::Mode::train, true, false};
    auto params = model.params();
    std::vector<GradientAuditEntry> out;
    for (const char* term : {"L_c", "L_md", "L_ms"}) {
        for (auto* p : params) p->zero_grad();
        Tape<T> tape;
        Var fs = model.front.forward(tape, tape.constant(source_batch.x.template cast<T>()), pass);
        Var ft = model.front.forward(tape, tape.constant(target_batch), pass);
        TransferVars v = transfer_objective(tape, model, fs, source_batch.labels, ft, cfg, pass, pass);
        const std::string t = term;
        if (t == "L_c") tape.backward(v.lc);
        else if (t == "L_md") tape.backward(*v.lmd, critic_sink<T>, static_cast<T>(cfg.beta));
        else tape.backward(v.lms, critic_sink<T>, static_cast<T>(-cfg.alpha));
        for (ParamGroup g : {ParamGroup::gan_feature, ParamGroup::cnn_feature, ParamGroup::classifier}) {
            double s = 0;
            for (auto* p : params)
                if (p->group == g)
                    for (T x : p->grad.data()) s += double(x) * double(x);
            out.push_back({t, g, std::sqrt(s)});
        }
    }
    for (auto* p : params) p->zero_grad();
    return out;
}

}  // namespace icegan
