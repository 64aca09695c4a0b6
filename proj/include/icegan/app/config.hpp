#pragma once

#include <cstdint>
#include <cstdlib>
#include <functional>
#include <map>
#include <string>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "icegan/data/preprocess.hpp"
#include "icegan/eval/metrics.hpp"
#include "icegan/synth/generator.hpp"
#include "icegan/training/pganc_trainer.hpp"
#include "icegan/training/pgant_trainer.hpp"

namespace icegan::app {

// Every tunable of every command. Filled from defaults, then an INI file,
// then command-line overrides; validated before any work starts.
struct RunConfig {
    std::uint64_t seed = 1;
    synth::SynthConfig synth;
    std::string synth_shift = "none";  // none | turbine
    data::SplitConfig split;
    PgancTrainConfig pganc;
    PgantTrainConfig pgant;
    double threshold = 0.5;
    eval::ScoreConvention convention = eval::ScoreConvention::verbatim;
    std::size_t knn_k = 5;

    void validate() const {
        synth.validate();
        split.validate();
        pganc.validate();
        pgant.validate();
        if (synth_shift != "none" && synth_shift != "turbine") throw ConfigError("synth.shift must be 'none' or 'turbine'");
        if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("eval.threshold must lie in [0, 1]");
        if (knn_k == 0) throw ConfigError("eval.knn_k must be positive");
    }

    synth::SynthConfig synth_config() const {
        synth::SynthConfig c = synth;
        c.seed = seed;
        c.domain_shift = synth_shift == "turbine" ? synth::turbine_shift() : synth::DomainShift{};
        return c;
    }
};

namespace parse {

inline std::string trimmed(const std::string& s) { return std::string(data::csv::trim(s)); }

inline double real(const std::string& key, const std::string& v) {
    const double d = data::csv::parse_double(v);
    if (!std::isfinite(d)) throw ConfigError(key + ": expected a number, got '" + v + "'");
    return d;
}

template <typename Int>
Int integer(const std::string& key, const std::string& v) {
    Int out{};
    if (!data::csv::parse_int(v, out)) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    return out;
}

inline FrontEndKind front_end(const std::string& key, const std::string& v) {
    const std::string t = trimmed(v);
    if (t == "gan") return FrontEndKind::gan;
    if (t == "cnn") return FrontEndKind::cnn;
    throw ConfigError(key + ": expected 'gan' or 'cnn', got '" + v + "'");
}

inline BandwidthPolicy bandwidth(const std::string& key, const std::string& v) {
    const std::string t = trimmed(v);
    if (t == "median") return BandwidthPolicy::median;
    if (t == "fixed") return BandwidthPolicy::fixed;
    throw ConfigError(key + ": expected 'median' or 'fixed', got '" + v + "'");
}

}  // namespace parse

using Setter = std::function<void(RunConfig&, const std::string&)>;

// "section.key" -> setter. The single source of truth for config keys.
inline const std::map<std::string, Setter>& config_keys() {
    static const std::map<std::string, Setter> keys = [] {
        std::map<std::string, Setter> k;
        auto real = [&](const std::string& key, auto field) {
            k[key] = [key, field](RunConfig& c, const std::string& v) { field(c) = parse::real(key, v); };
        };
        auto size = [&](const std::string& key, auto field) {
            k[key] = [key, field](RunConfig& c, const std::string& v) { field(c) = parse::integer<std::size_t>(key, v); };
        };
        k["run.seed"] = [](RunConfig& c, const std::string& v) { c.seed = parse::integer<std::uint64_t>("run.seed", v); };

        size("synth.n_records", [](RunConfig& c) -> auto& { return c.synth.n_records; });
        real("synth.icing_fraction", [](RunConfig& c) -> auto& { return c.synth.icing_fraction; });
        real("synth.invalid_fraction", [](RunConfig& c) -> auto& { return c.synth.invalid_fraction; });
        real("synth.noise_scale", [](RunConfig& c) -> auto& { return c.synth.noise_scale; });
        real("synth.icing_power_factor", [](RunConfig& c) -> auto& { return c.synth.icing_power_factor; });
        k["synth.shift"] = [](RunConfig& c, const std::string& v) { c.synth_shift = parse::trimmed(v); };
        k["synth.start_timestamp"] = [](RunConfig& c, const std::string& v) {
            c.synth.start_timestamp = parse::integer<std::int64_t>("synth.start_timestamp", v);
        };
        k["synth.interval_seconds"] = [](RunConfig& c, const std::string& v) {
            c.synth.interval_seconds = parse::integer<std::int64_t>("synth.interval_seconds", v);
        };

        real("split.train_icing_fraction", [](RunConfig& c) -> auto& { return c.split.train_icing_fraction; });
        real("split.source_icing_fraction", [](RunConfig& c) -> auto& { return c.split.source_icing_fraction; });
        real("split.target_icing_fraction", [](RunConfig& c) -> auto& { return c.split.target_icing_fraction; });
        real("split.test_icing_fraction", [](RunConfig& c) -> auto& { return c.split.test_icing_fraction; });
        real("split.test_normal_per_icing", [](RunConfig& c) -> auto& { return c.split.test_normal_per_icing; });
        real("split.power_threshold", [](RunConfig& c) -> auto& { return c.split.power_threshold; });

        // [gan] applies to the GANs of both frameworks.
        auto gan = [&](const std::string& name, auto setter) {
            k["gan." + name] = [name, setter](RunConfig& c, const std::string& v) {
                setter(c.pganc.gan, "gan." + name, v);
                setter(c.pgant.gan, "gan." + name, v);
            };
        };
        gan("weight_con", [](GanTrainConfig& g, const std::string& key, const std::string& v) { g.weights.con = parse::real(key, v); });
        gan("weight_adv", [](GanTrainConfig& g, const std::string& key, const std::string& v) { g.weights.adv = parse::real(key, v); });
        gan("weight_feature",
            [](GanTrainConfig& g, const std::string& key, const std::string& v) { g.weights.feature = parse::real(key, v); });
        gan("epochs", [](GanTrainConfig& g, const std::string& key, const std::string& v) { g.epochs = parse::integer<std::size_t>(key, v); });
        gan("batch_size",
            [](GanTrainConfig& g, const std::string& key, const std::string& v) { g.batch_size = parse::integer<std::size_t>(key, v); });
        gan("learning_rate", [](GanTrainConfig& g, const std::string& key, const std::string& v) { g.learning_rate = parse::real(key, v); });
        gan("patience",
            [](GanTrainConfig& g, const std::string& key, const std::string& v) { g.patience = parse::integer<std::size_t>(key, v); });
        gan("min_delta", [](GanTrainConfig& g, const std::string& key, const std::string& v) { g.min_delta = parse::real(key, v); });

        size("classifier.epochs", [](RunConfig& c) -> auto& { return c.pganc.classifier.epochs; });
        size("classifier.batch_size", [](RunConfig& c) -> auto& { return c.pganc.classifier.batch_size; });
        real("classifier.learning_rate", [](RunConfig& c) -> auto& { return c.pganc.classifier.learning_rate; });
        size("classifier.patience", [](RunConfig& c) -> auto& { return c.pganc.classifier.patience; });
        real("classifier.min_delta", [](RunConfig& c) -> auto& { return c.pganc.classifier.min_delta; });

        size("pganc.finetune_epochs", [](RunConfig& c) -> auto& { return c.pganc.finetune_epochs; });
        real("pganc.finetune_lr_factor", [](RunConfig& c) -> auto& { return c.pganc.finetune_lr_factor; });
        k["pganc.front_end"] = [](RunConfig& c, const std::string& v) { c.pganc.front_end = parse::front_end("pganc.front_end", v); };
        real("pganc.leaky_slope", [](RunConfig& c) -> auto& { return c.pganc.leaky_slope; });

        real("transfer.alpha", [](RunConfig& c) -> auto& { return c.pgant.transfer.alpha; });
        real("transfer.beta", [](RunConfig& c) -> auto& { return c.pgant.transfer.beta; });
        k["transfer.bandwidth"] = [](RunConfig& c, const std::string& v) {
            c.pgant.transfer.bandwidth = parse::bandwidth("transfer.bandwidth", v);
        };
        real("transfer.sigma", [](RunConfig& c) -> auto& { return c.pgant.transfer.sigma; });
        real("transfer.learning_rate", [](RunConfig& c) -> auto& { return c.pgant.transfer.learning_rate; });
        size("transfer.epochs", [](RunConfig& c) -> auto& { return c.pgant.transfer.epochs; });
        size("transfer.finetune_epochs", [](RunConfig& c) -> auto& { return c.pgant.transfer.finetune_epochs; });
        real("transfer.finetune_lr_factor", [](RunConfig& c) -> auto& { return c.pgant.transfer.finetune_lr_factor; });
        size("transfer.source_batch", [](RunConfig& c) -> auto& { return c.pgant.transfer.source_batch; });
        size("transfer.target_batch", [](RunConfig& c) -> auto& { return c.pgant.transfer.target_batch; });
        size("transfer.patience", [](RunConfig& c) -> auto& { return c.pgant.transfer.patience; });
        real("transfer.min_delta", [](RunConfig& c) -> auto& { return c.pgant.transfer.min_delta; });
        k["transfer.hidden"] = [](RunConfig& c, const std::string& v) {
            c.pgant.transfer.hidden = parse::integer<std::uint32_t>("transfer.hidden", v);
        };

        k["pgant.front_end"] = [](RunConfig& c, const std::string& v) { c.pgant.front_end = parse::front_end("pgant.front_end", v); };
        real("pgant.leaky_slope", [](RunConfig& c) -> auto& { return c.pgant.leaky_slope; });

        real("eval.threshold", [](RunConfig& c) -> auto& { return c.threshold; });
        k["eval.score_convention"] = [](RunConfig& c, const std::string& v) {
            c.convention = eval::parse_score_convention(parse::trimmed(v));
        };
        size("eval.knn_k", [](RunConfig& c) -> auto& { return c.knn_k; });
        return k;
    }();
    return keys;
}

inline void set_key(RunConfig& c, const std::string& key, const std::string& value) {
    const auto& keys = config_keys();
    auto it = keys.find(key);
    if (it == keys.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(c, value);
}

// Applies an INI file (sections = key prefixes). Unknown sections or keys are errors.
inline void apply_ini(RunConfig& c, const std::string& path) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(path, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw ConfigError("config " + path + ": key '" + section + "' must live in a section");
        for (const auto& [key, value] : body) set_key(c, section + "." + key, value.data());
    }
}

// Default seed: ICEGAN_SEED when set, else 1.
inline std::uint64_t default_seed() {
    const char* env = std::getenv("ICEGAN_SEED");
    if (!env || !*env) return 1;
    return parse::integer<std::uint64_t>("ICEGAN_SEED", env);
}

}  // namespace icegan::app
