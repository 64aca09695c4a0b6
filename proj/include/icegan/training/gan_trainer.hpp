#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "icegan/diffnet/adam.hpp"
#include "icegan/models/gan.hpp"
#include "icegan/training/losses.hpp"
#include "icegan/training/report.hpp"
#include "icegan/training/samples.hpp"

namespace icegan {

struct GanLossWeights {
    double con = 50.0;
    double adv = 1.0;
    double feature = 1.0;

    void validate() const {
        for (double w : {con, adv, feature})
            if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("GAN loss weights must be finite and non-negative");
        if (con == 0.0 && adv == 0.0 && feature == 0.0) throw ConfigError("at least one GAN loss weight must be positive");
    }
};

struct GanTrainConfig {
    GanLossWeights weights;
    std::size_t epochs = 100;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    std::size_t patience = 10;
    double min_delta = 1e-4;

    void validate() const {
        weights.validate();
        if (batch_size < 2) throw ConfigError("GAN batch size must be at least 2");
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("GAN learning rate must be positive");
    }
};

struct GeneratorLoss {
    Var con;      // mean ‖x − G(x)‖₂
    Var adv;      // mean log(1 − D(G(x)))
    Var feature;  // mean ‖GE(x) − DE(G(x))‖₂
    Var total;
};

template <typename T>
GeneratorLoss generator_loss(Tape<T>& tape, GanModel<T>& gan, Var x, const GanLossWeights& w, const PassMode& gen_pass,
                             const PassMode& disc_pass) {
    GanVars<T> v = gan.forward(tape, x, gen_pass, disc_pass);
    GeneratorLoss l;
    l.con = losses::mean_l2_distance(tape, x, v.x_gd);
    l.feature = losses::mean_l2_distance(tape, v.h_ge, v.h_de);
    l.adv = losses::mean_log_sigmoid(tape, gan.disc_logit(tape, v.h_de, disc_pass), true);
    l.total = ops::weighted_sum(tape, {l.con, l.adv, l.feature},
                                {static_cast<T>(w.con), static_cast<T>(w.adv), static_cast<T>(w.feature)});
    return l;
}

// Discriminator binary cross-entropy, real → 1 and fake → 0:
//   L_D = −mean log D(x) − mean log(1 − D(G(x))).
// Real and reconstructed samples go through the discriminator as one batch.
template <typename T>
Var discriminator_loss(Tape<T>& tape, GanModel<T>& gan, Var x, const PassMode& gen_pass, const PassMode& disc_pass) {
    const std::size_t n = tape.value(x).shape().batch;
    Var fake = gan.decode(tape, gan.encode(tape, x, gen_pass), gen_pass);
    Var joint = ops::concat_batch(tape, x, fake);
    Var logits = gan.disc_logit(tape, gan.disc_encode(tape, joint, disc_pass), disc_pass);
    std::vector<std::size_t> real_idx(n), fake_idx(n);
    for (std::size_t i = 0; i < n; ++i) {
        real_idx[i] = i;
        fake_idx[i] = n + i;
    }
    Var real_term = losses::mean_log_sigmoid(tape, ops::select_batch(tape, logits, real_idx), false);
    Var fake_term = losses::mean_log_sigmoid(tape, ops::select_batch(tape, logits, fake_idx), true);
    return ops::weighted_sum(tape, {real_term, fake_term}, {T(-1), T(-1)});
}

struct GanLossValues {
    double con = 0, adv = 0, feature = 0, generator = 0, discriminator = 0;
};

// Eval-mode loss values for a batch of one class.
template <typename T>
GanLossValues gan_losses(GanModel<T>& gan, const Tensor<T>& x, const GanLossWeights& w = {}) {
    if (x.shape().batch == 0) throw UsageError("gan_losses: empty batch");
    detail::check_model_input(x);
    const PassMode pass = PassMode::inference();
    Tape<T> tape;
    Var xv = tape.constant(x);
    GeneratorLoss g = generator_loss(tape, gan, xv, w, pass, pass);
    Var d = discriminator_loss(tape, gan, xv, pass, pass);
    return {tape.value(g.con)[0], tape.value(g.adv)[0], tape.value(g.feature)[0], tape.value(g.total)[0], tape.value(d)[0]};
}

// Per-sample reconstruction error ‖x − G(x)‖₂ in eval mode.
template <typename T>
std::vector<double> reconstruction_errors(GanModel<T>& gan, const Tensor<T>& x) {
    auto tr = gan_forward(gan, x);
    std::vector<double> out(x.shape().batch);
    for (std::size_t n = 0; n < out.size(); ++n) {
        double s = 0;
        auto a = x.sample(n);
        auto b = tr.x_gd.sample(n);
        for (std::size_t i = 0; i < a.size(); ++i) s += (double(a[i]) - b[i]) * (double(a[i]) - b[i]);
        out[n] = std::sqrt(s);
    }
    return out;
}

struct GanTrainResult {
    std::size_t epochs_run = 0;
};

// Adversarial training of one GAN on samples of a single class. Each
// iteration first updates the discriminator with the generator frozen, then
// the generator with the discriminator frozen. Early stopping watches L_con.
template <typename T>
GanTrainResult train_gan(GanModel<T>& gan, const Tensor<T>& x, const GanTrainConfig& cfg, std::mt19937_64& rng,
                         LossReport& report, const std::string& stage) {
    cfg.validate();
    detail::check_model_input(x);
    GanTrainResult result;
    if (cfg.epochs == 0) return result;

    auto gen_params = gan.generator_params();
    auto disc_params = gan.discriminator_params();
    AdamConfig adam{cfg.learning_rate};
    Adam<T> opt_g(gen_params, adam);
    Adam<T> opt_d(disc_params, adam);

    const PassMode frozen{ops::Mode::train, false, false};
    EarlyStopping stopper(cfg.patience, cfg.min_delta);
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        double con = 0, adv = 0, feat = 0, lg = 0, ld = 0;
        const auto batches = shuffled_batches(x.shape().batch, cfg.batch_size, rng);
        try {
            for (const auto& idx : batches) {
                const Tensor<T> xb = gather(x, idx);
                {
                    Tape<T> tape;
                    Var d = discriminator_loss(tape, gan, tape.constant(xb), frozen, PassMode::train());
                    opt_d.zero_grad();
                    tape.backward(d);
                    opt_d.step();
                    ld += tape.value(d)[0];
                }
                {
                    Tape<T> tape;
                    GeneratorLoss g = generator_loss(tape, gan, tape.constant(xb), cfg.weights, PassMode::train(), frozen);
                    opt_g.zero_grad();
                    tape.backward(g.total);
                    opt_g.step();
                    con += tape.value(g.con)[0];
                    adv += tape.value(g.adv)[0];
                    feat += tape.value(g.feature)[0];
                    lg += tape.value(g.total)[0];
                }
            }
        } catch (const DivergenceError& e) {
            throw DivergenceError(stage + ": " + e.what(), report.last_finite());
        }
        const double nb = static_cast<double>(batches.size());
        report.record(stage, epoch, "L_con", con / nb);
        report.record(stage, epoch, "L_adv", adv / nb);
        report.record(stage, epoch, "L_f", feat / nb);
        report.record(stage, epoch, "L_G", lg / nb);
        report.record(stage, epoch, "L_D", ld / nb);
        result.epochs_run = epoch;
        if (stopper.should_stop(con / nb)) break;
    }
    return result;
}

}  // namespace icegan
