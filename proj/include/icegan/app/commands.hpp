#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "icegan/app/config.hpp"
#include "icegan/data/preprocess.hpp"
#include "icegan/data/scada.hpp"
#include "icegan/eval/comparison.hpp"
#include "icegan/io/checkpoint.hpp"
#include "icegan/synth/generator.hpp"

namespace icegan::app {

namespace fs = std::filesystem;

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_divergence = 3, exit_checksum = 4 };

struct SynthArgs {
    std::string out;
};

struct PreprocessArgs {
    std::string input;
    std::string target;  // empty: single-turbine
    std::string out_dir;
    std::string scenario;  // single | transfer; empty: inferred from target
};

struct TrainArgs {
    std::string framework;  // pganc | pgant
    std::string data_dir;
    std::string out_dir;
    std::string scenario;  // label recorded in outputs; empty: data-set kind
};

struct EvalArgs {
    std::string checkpoint;
    std::string test;
    std::string out;  // empty: stdout
    std::string roc;
};

struct CompareArgs {
    std::string data_dir;
    std::string out;  // empty: stdout
    std::string scenario;
    std::vector<std::string> methods;  // empty: every method the data supports
    std::vector<std::uint64_t> seeds;  // empty: the run seed
};

// File names inside a processed data directory and a training output directory.
namespace files {
inline constexpr const char* train = "train.csv";
inline constexpr const char* test = "test.csv";
inline constexpr const char* target = "target.csv";
inline constexpr const char* scaler = "scaler.json";
inline constexpr const char* losses = "losses.csv";
inline constexpr const char* pganc_stage1 = "pganc_stage1.igdx";
inline constexpr const char* pganc_stage2 = "pganc_stage2.igdx";
inline constexpr const char* pgant_pretrain = "pgant_pretrain.igdx";
inline constexpr const char* pgant_transfer = "pgant_transfer.igdx";
}  // namespace files

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IngestError("cannot create directory " + dir + ": " + ec.message());
}

inline std::string join(const std::string& dir, const char* name) { return (fs::path(dir) / name).string(); }

template <typename F>
void write_text(const std::string& path, F&& body) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IngestError("cannot write " + path);
    body(os);
    if (!os) throw IngestError("failed writing " + path);
}

inline void print_warnings(const data::Warnings& w, std::ostream& err) {
    for (const std::string& s : w) err << "warning: " << s << "\n";
}

// synth: raw SCADA CSV from the generator.
inline void cmd_synth(const RunConfig& cfg, const SynthArgs& a, std::ostream& out) {
    const synth::SynthConfig sc = cfg.synth_config();
    const auto records = synth::generate(sc);
    data::write_scada(a.out, records);
    out << "wrote " << records.size() << " records (" << sc.icing_count() << " icing, " << sc.invalid_count() << " invalid) to "
        << a.out << "\n";
}

// preprocess: invalid elimination, balancing, feature engineering, normalization.
inline data::PreparedExperiment cmd_preprocess(const RunConfig& cfg, const PreprocessArgs& a, std::ostream& out,
                                               std::ostream& err) {
    std::string scenario = a.scenario.empty() ? (a.target.empty() ? "single" : "transfer") : a.scenario;
    if (scenario != "single" && scenario != "transfer") throw ConfigError("--scenario must be 'single' or 'transfer'");
    if ((scenario == "transfer") != !a.target.empty())
        throw ConfigError("the transfer scenario needs --target; the single scenario must not have one");

    data::Warnings warnings;
    auto load = [&](const std::string& path) {
        auto records = data::ingest_scada(path);
        if (records.empty()) throw InputError(path + ": no records");
        return data::eliminate_invalid(records, &warnings);
    };
    const auto source = load(a.input);
    data::DatasetSplit split = scenario == "single" ? data::split_single(source, cfg.seed, cfg.split)
                                                    : data::split_transfer(source, load(a.target), cfg.seed, cfg.split);
    data::PreparedExperiment e = data::prepare(split, &warnings);
    if (e.test_outside_range > 0)
        warnings.push_back(std::to_string(e.test_outside_range) + " test feature values fall outside the scaler range");

    ensure_dir(a.out_dir);
    data::write_features(join(a.out_dir, files::train), e.train);
    data::write_features(join(a.out_dir, files::test), e.test);
    if (e.scenario == data::Scenario::transfer) data::write_features(join(a.out_dir, files::target), e.target);
    e.scaler.save(join(a.out_dir, files::scaler));
    print_warnings(warnings, err);
    out << scenario << ": train " << e.train.size() << ", test " << e.test.size();
    if (e.scenario == data::Scenario::transfer) out << ", target " << e.target.size();
    out << " -> " << a.out_dir << "\n";
    return e;
}

// Reads a processed directory back. A target.csv makes it a transfer experiment.
inline data::PreparedExperiment load_processed(const std::string& dir) {
    data::PreparedExperiment e;
    e.scaler = data::Scaler::load(join(dir, files::scaler));
    e.train = data::read_features(join(dir, files::train));
    e.test = data::read_features(join(dir, files::test));
    const std::string target = join(dir, files::target);
    if (fs::exists(target)) {
        e.scenario = data::Scenario::transfer;
        e.target = data::read_features(target);
    }
    for (int l : e.train.labels)
        if (l < 0) throw InputError(dir + ": training set contains unlabeled rows");
    return e;
}

inline std::string scenario_label(const std::string& requested, const data::PreparedExperiment& e) {
    if (!requested.empty()) return requested;
    return data::to_string(e.scenario);
}

inline std::map<std::string, std::string> checkpoint_metadata(const std::string& method, const std::string& scenario,
                                                              std::uint64_t seed, const data::Scaler& scaler) {
    char fp[16];
    std::snprintf(fp, sizeof fp, "%08x", scaler.fingerprint());
    return {{"method", method}, {"scenario", scenario}, {"seed", std::to_string(seed)}, {"scaler_crc32", fp}};
}

// train: checkpoints for both stages plus the per-epoch loss CSV.
inline void cmd_train(const RunConfig& cfg, const TrainArgs& a, std::ostream& out) {
    if (a.framework != "pganc" && a.framework != "pgant") throw ConfigError("framework must be 'pganc' or 'pgant'");
    const data::PreparedExperiment e = load_processed(a.data_dir);
    const std::string scenario = scenario_label(a.scenario, e);
    const Samples train = e.train.to_samples();
    ensure_dir(a.out_dir);

    auto save = [&](const char* name, io::AnyModel model, const std::string& method) {
        io::save_checkpoint(join(a.out_dir, name), io::Checkpoint{std::move(model), checkpoint_metadata(method, scenario, cfg.seed, e.scaler), e.scaler});
        out << "wrote " << join(a.out_dir, name) << "\n";
    };
    if (a.framework == "pganc") {
        PgancTrainResult r = train_two_stage_pganc(train, cfg.pganc, cfg.seed);
        write_text(join(a.out_dir, files::losses), [&](std::ostream& os) { r.report.write_csv(os); });
        save(files::pganc_stage1, std::move(r.stage1), "PGANC-stage1");
        save(files::pganc_stage2, std::move(r.stage2), "PGANC-stage2");
    } else {
        if (cfg.pgant.transfer.uses_target() && e.scenario != data::Scenario::transfer)
            throw ConfigError(a.data_dir + " has no target.csv; PGANT needs an unlabeled target set unless alpha = beta = 0");
        const Samples target = e.scenario == data::Scenario::transfer ? e.target.to_samples() : Samples{};
        PgantTrainResult r = train_pgant(train, target, cfg.pgant, cfg.seed);
        write_text(join(a.out_dir, files::losses), [&](std::ostream& os) { r.report.write_csv(os); });
        save(files::pgant_pretrain, std::move(r.pretrained), "PGANT-pretrain");
        save(files::pgant_transfer, std::move(r.model), "PGANT");
    }
    out << "wrote " << join(a.out_dir, files::losses) << "\n";
}

// eval: one results row (and optionally the ROC points) for a checkpoint on a labelled set.
inline eval::Metrics cmd_eval(const RunConfig& cfg, const EvalArgs& a, std::ostream& out) {
    io::Checkpoint ck = io::load_checkpoint(a.checkpoint);
    const data::FeatureTable test = data::read_features(a.test);
    for (int l : test.labels)
        if (l < 0) throw InputError(a.test + ": evaluation needs labelled rows");
    const Samples s = test.to_samples();
    const auto scores = io::icing_scores(ck.model, s.x);
    const eval::Metrics m = eval::evaluate(scores, s.labels, cfg.threshold, cfg.convention);

    auto meta = [&](const char* k, const char* fallback) {
        auto it = ck.metadata.find(k);
        return it == ck.metadata.end() ? std::string(fallback) : it->second;
    };
    std::ostringstream rows;
    eval::write_result_header(rows);
    eval::write_result_row(rows, meta("method", io::to_string(ck.kind())), meta("scenario", ""), meta("seed", ""), m);
    if (a.out.empty()) out << rows.str();
    else write_text(a.out, [&](std::ostream& os) { os << rows.str(); });
    if (!a.roc.empty()) write_text(a.roc, [&](std::ostream& os) { eval::write_roc_csv(os, m.roc); });
    return m;
}

// compare: every requested method and seed on one processed experiment.
inline eval::ComparisonTable cmd_compare(const RunConfig& cfg, const CompareArgs& a, std::ostream& out, std::ostream& err) {
    const data::PreparedExperiment e = load_processed(a.data_dir);
    std::vector<eval::Method> methods;
    for (const std::string& m : a.methods) methods.push_back(eval::parse_method(m));
    if (methods.empty())
        for (eval::Method m : eval::kAllMethods)
            if (!eval::needs_target(m) || e.scenario == data::Scenario::transfer) methods.push_back(m);
    std::vector<std::uint64_t> seeds = a.seeds.empty() ? std::vector<std::uint64_t>{cfg.seed} : a.seeds;

    eval::ComparisonConfig cc{cfg.pganc, cfg.pgant, cfg.knn_k, cfg.threshold, cfg.convention};
    const eval::ComparisonTable table = eval::run_comparison(
        e, scenario_label(a.scenario, e), methods, seeds, cc, [&](const eval::ResultRow& r) {
            err << eval::to_string(r.method) << " seed " << r.seed << ": score " << r.metrics.score << ", auc " << r.metrics.auc << "\n";
        });
    if (a.out.empty()) table.write_csv(out);
    else write_text(a.out, [&](std::ostream& os) { table.write_csv(os); });
    return table;
}

}  // namespace icegan::app
