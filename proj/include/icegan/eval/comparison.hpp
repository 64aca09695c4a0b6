#pragma once

#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "icegan/data/preprocess.hpp"
#include "icegan/eval/knn.hpp"
#include "icegan/eval/metrics.hpp"
#include "icegan/io/checkpoint.hpp"
#include "icegan/training/pganc_trainer.hpp"
#include "icegan/training/pgant_trainer.hpp"

namespace icegan::eval {

enum class Method { knn, plain_cnn, pganc_stage1, pganc_stage2, pgant, pgant_1loss, cnn_2loss, cnn_1loss };

inline constexpr Method kAllMethods[] = {Method::knn,   Method::plain_cnn,   Method::pganc_stage1, Method::pganc_stage2,
                                         Method::pgant, Method::pgant_1loss, Method::cnn_2loss,    Method::cnn_1loss};

inline const char* to_string(Method m) {
    switch (m) {
        case Method::knn: return "KNN";
        case Method::plain_cnn: return "plain-CNN";
        case Method::pganc_stage1: return "PGANC-stage1";
        case Method::pganc_stage2: return "PGANC-stage2";
        case Method::pgant: return "PGANT";
        case Method::pgant_1loss: return "PGANT-1loss";
        case Method::cnn_2loss: return "CNN-2loss";
        case Method::cnn_1loss: return "CNN-1loss";
    }
    return "?";
}

inline Method parse_method(const std::string& s) {
    for (Method m : kAllMethods)
        if (s == to_string(m)) return m;
    throw ConfigError("unknown method '" + s + "'");
}

// Methods trained with the transfer objective need an unlabeled target set.
inline bool needs_target(Method m) {
    return m == Method::pgant || m == Method::pgant_1loss || m == Method::cnn_2loss || m == Method::cnn_1loss;
}

struct Metrics {
    ConfusionCounts confusion;
    double score = 0.0;
    double auc = 0.0;
    double mcc = 0.0;
    bool mcc_degenerate = false;
    RocCurve roc;
};

inline Metrics evaluate(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5,
                        ScoreConvention convention = ScoreConvention::verbatim) {
    Metrics m;
    m.confusion = confusion(scores, labels, threshold);
    m.roc = roc_auc(scores, labels);
    m.auc = m.roc.auc;
    m.score = competition_score(m.confusion, convention);
    const MccResult r = mcc(m.confusion);
    m.mcc = r.value;
    m.mcc_degenerate = r.degenerate;
    return m;
}

inline void write_result_header(std::ostream& os) { os << "method,scenario,seed,score,auc,mcc,tp,fn,fp,tn\n"; }

inline void write_result_row(std::ostream& os, const std::string& method, const std::string& scenario, const std::string& seed,
                             const Metrics& m) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%llu,%llu,%llu,%llu\n", m.score, m.auc, m.mcc,
                  static_cast<unsigned long long>(m.confusion.tp), static_cast<unsigned long long>(m.confusion.fn),
                  static_cast<unsigned long long>(m.confusion.fp), static_cast<unsigned long long>(m.confusion.tn));
    os << method << "," << scenario << "," << seed << "," << buf;
}

struct ComparisonConfig {
    PgancTrainConfig pganc;
    PgantTrainConfig pgant;
    std::size_t knn_k = 5;
    double threshold = 0.5;
    ScoreConvention convention = ScoreConvention::verbatim;
};

struct ResultRow {
    Method method;
    std::string scenario;
    std::uint64_t seed;
    Metrics metrics;
};

struct MeanRow {
    Method method;
    std::string scenario;
    std::size_t runs;
    double score, auc, mcc;
};

struct ComparisonTable {
    std::vector<ResultRow> rows;

    std::vector<MeanRow> means() const {
        std::vector<MeanRow> out;
        for (Method m : kAllMethods) {
            MeanRow r{m, "", 0, 0.0, 0.0, 0.0};
            for (const ResultRow& row : rows)
                if (row.method == m) {
                    r.scenario = row.scenario;
                    ++r.runs;
                    r.score += row.metrics.score;
                    r.auc += row.metrics.auc;
                    r.mcc += row.metrics.mcc;
                }
            if (r.runs == 0) continue;
            const double n = static_cast<double>(r.runs);
            r.score /= n;
            r.auc /= n;
            r.mcc /= n;
            out.push_back(r);
        }
        return out;
    }

    MeanRow mean_of(Method m) const {
        for (const MeanRow& r : means())
            if (r.method == m) return r;
        throw UsageError(std::string("no results for method ") + to_string(m));
    }

    // One row per (method, seed), then one `mean` row per method.
    void write_csv(std::ostream& os) const {
        write_result_header(os);
        for (const ResultRow& r : rows) write_result_row(os, to_string(r.method), r.scenario, std::to_string(r.seed), r.metrics);
        char buf[160];
        for (const MeanRow& r : means()) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,,,,\n", r.score, r.auc, r.mcc);
            os << to_string(r.method) << "," << r.scenario << ",mean," << buf;
        }
    }
};

inline std::vector<double> model_scores(io::AnyModel model, const Samples& test) { return io::icing_scores(model, test.x); }

// Trains and scores every requested method once per seed on one prepared
// experiment. Models are trained on `train` (the source set for transfer)
// and evaluated on `test`; transfer methods also see the unlabeled `target`.
inline ComparisonTable run_comparison(const data::PreparedExperiment& e, const std::string& scenario,
                                      const std::vector<Method>& methods, const std::vector<std::uint64_t>& seeds,
                                      const ComparisonConfig& cfg,
                                      const std::function<void(const ResultRow&)>& on_row = {}) {
    if (methods.empty()) throw ConfigError("run_comparison: no methods requested");
    if (seeds.empty()) throw ConfigError("run_comparison: no seeds requested");
    for (Method m : methods)
        if (needs_target(m) && e.scenario != data::Scenario::transfer)
            throw ConfigError(std::string(to_string(m)) + " needs a transfer scenario (unlabeled target set)");
    const Samples train = e.train.to_samples();
    const Samples test = e.test.to_samples();
    const Samples target = e.scenario == data::Scenario::transfer ? e.target.to_samples() : Samples{};
    ComparisonTable table;
    std::optional<std::vector<double>> knn;
    for (std::uint64_t seed : seeds) {
        std::optional<PgancTrainResult> two_stage;
        for (Method m : methods) {
            std::vector<double> scores;
            switch (m) {
                case Method::knn:
                    if (!knn) knn = knn_baseline<kFeatureCount>(e.train.rows, e.train.labels, e.test.rows, cfg.knn_k);
                    scores = *knn;
                    break;
                case Method::plain_cnn: {
                    PgancTrainConfig c = cfg.pganc;
                    c.front_end = FrontEndKind::cnn;
                    LossReport report;
                    scores = model_scores(train_pganc_cold_start(train, c, seed, report, "plain_cnn"), test);
                    break;
                }
                case Method::pganc_stage1:
                case Method::pganc_stage2:
                    if (!two_stage) two_stage = train_two_stage_pganc(train, cfg.pganc, seed);
                    scores = model_scores(m == Method::pganc_stage1 ? two_stage->stage1 : two_stage->stage2, test);
                    break;
                default: {
                    PgantTrainConfig c = cfg.pgant;
                    c.front_end = (m == Method::cnn_2loss || m == Method::cnn_1loss) ? FrontEndKind::cnn : FrontEndKind::gan;
                    if (m == Method::pgant_1loss || m == Method::cnn_1loss) c.transfer.alpha = 0.0;
                    scores = model_scores(train_pgant(train, target, c, seed).model, test);
                    break;
                }
            }
            table.rows.push_back({m, scenario, seed, evaluate(scores, test.labels, cfg.threshold, cfg.convention)});
            if (on_row) on_row(table.rows.back());
        }
    }
    return table;
}

}  // namespace icegan::eval
