#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "icegan/errors.hpp"

namespace icegan::eval {

// Positive class = icing (label 1).
struct ConfusionCounts {
    std::uint64_t tp = 0, fn = 0, fp = 0, tn = 0;

    std::uint64_t n_fault() const { return tp + fn; }
    std::uint64_t n_normal() const { return fp + tn; }
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

namespace detail {

inline void check_inputs(std::span<const double> scores, std::span<const int> labels, const char* what) {
    if (scores.empty()) throw UsageError(std::string(what) + ": empty input");
    if (scores.size() != labels.size()) throw UsageError(std::string(what) + ": scores and labels differ in length");
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) throw InputError(std::string(what) + ": labels must be 0 or 1");
        if (!std::isfinite(scores[i])) throw InputError(std::string(what) + ": non-finite score");
    }
}

}  // namespace detail

// Predict icing iff score >= threshold.
inline ConfusionCounts confusion(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5) {
    detail::check_inputs(scores, labels, "confusion");
    ConfusionCounts c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] >= threshold;
        if (labels[i] == 1) (predicted ? c.tp : c.fn)++;
        else (predicted ? c.fp : c.tn)++;
    }
    return c;
}

struct RocPoint {
    double threshold;  // predict positive iff score >= threshold; +inf for the origin
    double fpr;
    double tpr;
};

struct RocCurve {
    std::vector<RocPoint> points;  // from (0,0) to (1,1)
    double auc = 0.0;              // Mann-Whitney
    double trapezoid_auc = 0.0;    // area under `points`
};

// AUC as the probability that a random positive outscores a random negative
// (ties count half), plus the ROC swept over every distinct score.
inline RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels) {
    detail::check_inputs(scores, labels, "roc_auc");
    const std::size_t n = scores.size();
    const auto n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw InputError("roc_auc: both classes are required (AUC undefined)");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve roc;
    roc.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    // Both areas in integer units of 1/2 pair: doubled Mann-Whitney U, and the
    // doubled trapezoid sum; they agree exactly.
    std::uint64_t tp = 0, fp = 0, twice_u = 0, twice_area = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        std::uint64_t dp = 0, dn = 0;
        for (; j < n && scores[order[j]] == scores[order[i]]; ++j) (labels[order[j]] == 1 ? dp : dn)++;
        twice_u += dp * (2 * (n_neg - fp - dn) + dn);
        twice_area += dn * (2 * tp + dp);
        tp += dp;
        fp += dn;
        roc.points.push_back({scores[order[i]], static_cast<double>(fp) / static_cast<double>(n_neg),
                              static_cast<double>(tp) / static_cast<double>(n_pos)});
        i = j;
    }
    const double pairs = 2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg);
    roc.auc = static_cast<double>(twice_u) / pairs;
    roc.trapezoid_auc = static_cast<double>(twice_area) / pairs;
    return roc;
}

enum class ScoreConvention { verbatim, swapped };

inline ScoreConvention parse_score_convention(const std::string& s) {
    if (s == "verbatim") return ScoreConvention::verbatim;
    if (s == "swapped") return ScoreConvention::swapped;
    throw ConfigError("score convention must be 'verbatim' or 'swapped', got '" + s + "'");
}

inline const char* to_string(ScoreConvention c) { return c == ScoreConvention::verbatim ? "verbatim" : "swapped"; }

// Competition score S = 1 - a*FN/N_normal - (1-a)*FP/N_fault, a = N_fault/N_normal.
// `swapped` divides FN by N_fault and FP by N_normal instead.
inline double competition_score(const ConfusionCounts& c, ScoreConvention convention = ScoreConvention::verbatim) {
    const double n_normal = static_cast<double>(c.n_normal()), n_fault = static_cast<double>(c.n_fault());
    if (c.n_normal() == 0 || c.n_fault() == 0) throw InputError("competition_score: both class totals must be positive");
    const double a = n_fault / n_normal;
    const double fn = static_cast<double>(c.fn), fp = static_cast<double>(c.fp);
    if (convention == ScoreConvention::verbatim) return 1.0 - a * fn / n_normal - (1.0 - a) * fp / n_fault;
    return 1.0 - a * fn / n_fault - (1.0 - a) * fp / n_normal;
}

struct MccResult {
    double value = 0.0;
    bool degenerate = false;  // a marginal was zero; value defined as 0
};

inline MccResult mcc(const ConfusionCounts& c) {
    const double tp = static_cast<double>(c.tp), tn = static_cast<double>(c.tn);
    const double fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);
    const double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    if (den == 0.0) return {0.0, true};
    return {std::clamp((tp * tn - fp * fn) / std::sqrt(den), -1.0, 1.0), false};
}

inline void write_roc_csv(std::ostream& os, const RocCurve& roc) {
    os << "threshold,fpr,tpr\n";
    char buf[96];
    for (const RocPoint& p : roc.points) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.threshold, p.fpr, p.tpr);
        os << buf;
    }
}

}  // namespace icegan::eval
