#pragma once

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "icegan/app/commands.hpp"

namespace icegan::app {

// Flags that are shorthands for config keys. Applied after the config file
// and --set, so they win.
struct KeyFlag {
    const char* flag;
    const char* key;
    const char* help;
};

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    for (std::string_view f : data::csv::split(s)) {
        std::string t(data::csv::trim(f));
        if (!t.empty()) out.push_back(std::move(t));
    }
    return out;
}

// Runs one command. argv[0] is the program name. Returns the process exit code.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Wind-turbine blade icing diagnosis with parallel GANs (PGANC / PGANT)", "icegan"};
    app.require_subcommand(1);
    std::string config_path;
    std::vector<std::string> sets;
    app.add_option("--config", config_path, "INI config file")->check(CLI::ExistingFile);
    app.add_option("--set", sets, "override a config key: section.key=value (repeatable)");

    struct BoundFlag {
        CLI::Option* option;
        std::string key;
        std::string* value;
    };
    std::map<std::string, std::string> flag_values;
    std::vector<BoundFlag> key_flags;
    auto key_flag = [&](CLI::App* sub, const KeyFlag& f) {
        std::string& v = flag_values[sub->get_name() + f.flag];
        key_flags.push_back({sub->add_option(f.flag, v, f.help), f.key, &v});
    };
    const KeyFlag seed{"--seed", "run.seed", "random seed (default: $ICEGAN_SEED or 1)"};

    SynthArgs synth_args;
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic SCADA CSV");
    synth->add_option("--out", synth_args.out, "output CSV")->required();
    for (const KeyFlag& f : {seed, KeyFlag{"--n", "synth.n_records", "number of records"},
                             KeyFlag{"--icing-frac", "synth.icing_fraction", "fraction of icing records"},
                             KeyFlag{"--invalid-frac", "synth.invalid_fraction", "fraction of invalid records"},
                             KeyFlag{"--noise", "synth.noise_scale", "sensor noise multiplier"},
                             KeyFlag{"--icing-power-factor", "synth.icing_power_factor", "power retained under icing"},
                             KeyFlag{"--shift", "synth.shift", "sensor calibration: none | turbine"}})
        key_flag(synth, f);

    PreprocessArgs pre_args;
    CLI::App* pre = app.add_subcommand("preprocess", "split, featurize and normalize raw SCADA CSVs");
    pre->add_option("--input", pre_args.input, "raw CSV (source turbine for transfer)")->required()->check(CLI::ExistingFile);
    pre->add_option("--target", pre_args.target, "raw CSV of the target turbine (transfer)")->check(CLI::ExistingFile);
    pre->add_option("--out-dir", pre_args.out_dir, "output directory")->required();
    pre->add_option("--scenario", pre_args.scenario, "single | transfer (default: inferred from --target)");
    key_flag(pre, seed);

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "train PGANC (two-stage) or PGANT (transfer)");
    train->add_option("framework", train_args.framework, "pganc | pgant")->required()->check(CLI::IsMember({"pganc", "pgant"}));
    train->add_option("--data", train_args.data_dir, "processed data directory")->required()->check(CLI::ExistingDirectory);
    train->add_option("--out-dir", train_args.out_dir, "output directory")->required();
    train->add_option("--scenario", train_args.scenario, "scenario name recorded in the outputs");
    for (const KeyFlag& f : {seed, KeyFlag{"--alpha", "transfer.alpha", "weight of the domain-confusion term"},
                             KeyFlag{"--beta", "transfer.beta", "weight of the domain-critic term"},
                             KeyFlag{"--front-end", "pganc.front_end", "gan | cnn"}})
        key_flag(train, f);

    EvalArgs eval_args;
    CLI::App* ev = app.add_subcommand("eval", "score a checkpoint on a processed labelled set");
    ev->add_option("--checkpoint", eval_args.checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
    ev->add_option("--test", eval_args.test, "processed CSV")->required()->check(CLI::ExistingFile);
    ev->add_option("--out", eval_args.out, "results CSV (default: stdout)");
    ev->add_option("--roc", eval_args.roc, "ROC points CSV");
    for (const KeyFlag& f : {KeyFlag{"--threshold", "eval.threshold", "decision threshold on the icing probability"},
                             KeyFlag{"--score-convention", "eval.score_convention", "verbatim | swapped"}})
        key_flag(ev, f);

    CompareArgs cmp_args;
    std::string methods, seeds;
    CLI::App* cmp = app.add_subcommand("compare", "train and score several methods over several seeds");
    cmp->add_option("--data", cmp_args.data_dir, "processed data directory")->required()->check(CLI::ExistingDirectory);
    cmp->add_option("--methods", methods, "comma-separated method names (default: all applicable)");
    cmp->add_option("--seeds", seeds, "comma-separated model seeds (default: the run seed)");
    cmp->add_option("--out", cmp_args.out, "results CSV (default: stdout)");
    cmp->add_option("--scenario", cmp_args.scenario, "scenario name recorded in the outputs");
    for (const KeyFlag& f : {KeyFlag{"--threshold", "eval.threshold", "decision threshold on the icing probability"},
                             KeyFlag{"--score-convention", "eval.score_convention", "verbatim | swapped"},
                             KeyFlag{"--knn-k", "eval.knn_k", "neighbours for the KNN baseline"}})
        key_flag(cmp, f);

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return exit_ok;
        }
        err << "error: " << e.what() << "\n";
        return exit_config;
    }

    try {
        RunConfig cfg;
        cfg.seed = default_seed();
        if (!config_path.empty()) apply_ini(cfg, config_path);
        for (const std::string& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + s + "'");
            set_key(cfg, parse::trimmed(s.substr(0, eq)), s.substr(eq + 1));
        }
        for (const BoundFlag& f : key_flags) {
            if (f.option->count() == 0) continue;
            set_key(cfg, f.key, *f.value);
            if (f.key == "pganc.front_end") set_key(cfg, "pgant.front_end", *f.value);
        }
        if (!seeds.empty())
            for (const std::string& s : split_list(seeds)) cmp_args.seeds.push_back(parse::integer<std::uint64_t>("--seeds", s));
        cmp_args.methods = split_list(methods);
        cfg.validate();

        if (synth->parsed()) cmd_synth(cfg, synth_args, out);
        else if (pre->parsed()) cmd_preprocess(cfg, pre_args, out, err);
        else if (train->parsed()) cmd_train(cfg, train_args, out);
        else if (ev->parsed()) cmd_eval(cfg, eval_args, out);
        else cmd_compare(cfg, cmp_args, out, err);
        return exit_ok;
    } catch (const DivergenceError& e) {
        err << "error: training diverged: " << e.what() << "\n";
        err << "last finite losses: " << (e.last_finite_losses.empty() ? "(none)" : e.last_finite_losses) << "\n";
        return exit_divergence;
    } catch (const ChecksumError& e) {
        err << "error: " << e.what() << "\n";
        return exit_checksum;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_config;
    }
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return run_cli(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace icegan::app
