#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <zlib.h>

#include <json.hpp>

#include "icegan/data/scada.hpp"
#include "icegan/training/samples.hpp"

namespace icegan::data {

using FeatureVector = std::array<double, kFeatureCount>;

// Warnings raised by preprocessing steps; never fatal.
using Warnings = std::vector<std::string>;

inline void warn(Warnings* sink, std::string msg) {
    if (sink) sink->push_back(std::move(msg));
}

// Drops records flagged invalid.
inline std::vector<ScadaRecord> eliminate_invalid(const std::vector<ScadaRecord>& records, Warnings* warnings = nullptr) {
    std::vector<ScadaRecord> out;
    out.reserve(records.size());
    for (const ScadaRecord& r : records)
        if (r.label != Label::invalid && fields_valid(r)) out.push_back(r);
    if (!records.empty() && out.empty()) warn(warnings, "every record is invalid; nothing left after elimination");
    return out;
}

// Keeps every icing record and round(ratio * icing) normal records drawn at
// random among those with power below the threshold. Input order is kept.
inline std::vector<ScadaRecord> balance(const std::vector<ScadaRecord>& records, double power_threshold,
                                        std::uint64_t seed, double normal_per_icing = 1.0) {
    if (!(normal_per_icing >= 0.0) || !std::isfinite(normal_per_icing)) throw ConfigError("balance ratio must be non-negative");
    std::vector<std::size_t> icing, candidates;
    std::size_t normals = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        switch (records[i].label) {
            case Label::icing: icing.push_back(i); break;
            case Label::normal:
                ++normals;
                if (records[i][power] < power_threshold) candidates.push_back(i);
                break;
            default: throw UsageError("balance: every record must be labelled normal or icing");
        }
    }
    const auto wanted = static_cast<std::size_t>(std::llround(normal_per_icing * static_cast<double>(icing.size())));
    if (candidates.size() < wanted)
        throw InputError("balance: need " + std::to_string(wanted) + " normal records with power < " +
                         csv::format_double(power_threshold) + ", have " + std::to_string(candidates.size()) + " (of " +
                         std::to_string(normals) + " normal)");
    std::mt19937_64 rng(seed);
    std::shuffle(candidates.begin(), candidates.end(), rng);
    candidates.resize(wanted);
    std::vector<std::size_t> keep = icing;
    keep.insert(keep.end(), candidates.begin(), candidates.end());
    std::sort(keep.begin(), keep.end());
    std::vector<ScadaRecord> out;
    out.reserve(keep.size());
    for (std::size_t i : keep) out.push_back(records[i]);
    return out;
}

inline constexpr double kDenominatorGuard = 1e-6;

struct EngineeredFeatures {
    FeatureVector values{};
    bool degenerate = false;  // a denominator was within kDenominatorGuard of zero
};

// The 28 model inputs of one record: 17 raw variables, three blade means and
// eight power/temperature ratios. Range checks are the caller's business
// (eliminate_invalid); only non-finite inputs are rejected here.
inline EngineeredFeatures engineer_features(const ScadaRecord& r) {
    for (double v : r.values)
        if (!std::isfinite(v)) throw InputError("engineer_features: record " + std::to_string(r.id) + " has a missing value");
    EngineeredFeatures out;
    auto den = [&](double d) {
        if (std::abs(d) < kDenominatorGuard) {
            out.degenerate = true;
            return d < 0 ? -kDenominatorGuard : kDenominatorGuard;
        }
        return d;
    };
    const double ws = r[wind_speed], gs = r[generator_speed], p = r[power];
    const double k_w2p = std::pow((ws + 5.0) / den(p + 5.0), 2) - 1.0;
    const double k_w2g = std::pow((ws + 5.0) / den(gs + 5.0), 2) - 1.0;
    const double k2 = p / den(gs);
    FeatureVector& f = out.values;
    f = {ws,
         gs,
         p,
         r[wind_direction],
         r[wind_direction_mean],
         r[yaw_position],
         r[yaw_speed],
         r[acc_x],
         r[acc_y],
         r[environment_tmp],
         r[int_tmp],
         r[pitch1_ng5_tmp],
         r[pitch2_ng5_tmp],
         r[pitch3_ng5_tmp],
         r[pitch1_ng5_DC],
         r[pitch2_ng5_DC],
         r[pitch3_ng5_DC],
         (r[pitch1_angle] + r[pitch2_angle] + r[pitch3_angle]) / 3.0,
         (r[pitch1_speed] + r[pitch2_speed] + r[pitch3_speed]) / 3.0,
         (r[pitch1_moto_tmp] + r[pitch2_moto_tmp] + r[pitch3_moto_tmp]) / 3.0,
         k_w2p,
         k_w2g,
         (k_w2p + 1.0) * (k_w2g + 1.0) - 1.0,
         r[int_tmp] - r[environment_tmp],
         k2,
         p / den(ws * ws * ws),
         k2 / den(ws * ws),
         gs / den(ws)};
    for (double v : f)
        if (!std::isfinite(v)) throw InputError("engineer_features: non-finite feature for record " + std::to_string(r.id));
    return out;
}

// Min-max normalization of each feature onto [y_min, y_max].
struct Scaler {
    FeatureVector x_min{};
    FeatureVector x_max{};
    double y_min = -1.0;
    double y_max = 1.0;

    static Scaler fit(const std::vector<FeatureVector>& rows, Warnings* warnings = nullptr) {
        if (rows.empty()) throw UsageError("Scaler::fit: no rows");
        Scaler s;
        s.x_min = s.x_max = rows.front();
        for (const FeatureVector& r : rows)
            for (std::size_t j = 0; j < kFeatureCount; ++j) {
                s.x_min[j] = std::min(s.x_min[j], r[j]);
                s.x_max[j] = std::max(s.x_max[j], r[j]);
            }
        for (std::size_t j = 0; j < kFeatureCount; ++j)
            if (s.x_min[j] == s.x_max[j])
                warn(warnings, "feature '" + std::string(kFeatureNames[j]) + "' is constant in the fitting data; mapped to 0");
        return s;
    }

    bool constant(std::size_t j) const { return x_max[j] == x_min[j]; }

    double apply(std::size_t j, double x) const {
        if (constant(j)) return 0.5 * (y_min + y_max);
        return y_min + (y_max - y_min) * (x - x_min[j]) / (x_max[j] - x_min[j]);
    }

    double invert(std::size_t j, double y) const {
        if (constant(j)) return x_min[j];
        return x_min[j] + (y - y_min) * (x_max[j] - x_min[j]) / (y_max - y_min);
    }

    FeatureVector apply(const FeatureVector& x) const {
        FeatureVector y;
        for (std::size_t j = 0; j < kFeatureCount; ++j) y[j] = apply(j, x[j]);
        return y;
    }

    FeatureVector invert(const FeatureVector& y) const {
        FeatureVector x;
        for (std::size_t j = 0; j < kFeatureCount; ++j) x[j] = invert(j, y[j]);
        return x;
    }

    void validate() const {
        if (!(y_max > y_min)) throw InputError("scaler: y_max must exceed y_min");
        for (std::size_t j = 0; j < kFeatureCount; ++j)
            if (!std::isfinite(x_min[j]) || !std::isfinite(x_max[j]) || x_max[j] < x_min[j])
                throw InputError("scaler: bad range for feature '" + std::string(kFeatureNames[j]) + "'");
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["y_min"] = y_min;
        j["y_max"] = y_max;
        auto& features = j["features"] = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < kFeatureCount; ++i)
            features.push_back({{"name", kFeatureNames[i]}, {"min", x_min[i]}, {"max", x_max[i]}});
        return j;
    }

    static Scaler from_json(const nlohmann::ordered_json& j) {
        try {
            Scaler s;
            s.y_min = j.at("y_min").get<double>();
            s.y_max = j.at("y_max").get<double>();
            const auto& features = j.at("features");
            if (features.size() != kFeatureCount) throw InputError("scaler: expected 28 features");
            for (std::size_t i = 0; i < kFeatureCount; ++i) {
                if (features[i].at("name").get<std::string>() != kFeatureNames[i])
                    throw InputError("scaler: feature " + std::to_string(i + 1) + " should be '" + std::string(kFeatureNames[i]) + "'");
                s.x_min[i] = features[i].at("min").get<double>();
                s.x_max[i] = features[i].at("max").get<double>();
            }
            s.validate();
            return s;
        } catch (const nlohmann::json::exception& e) {
            throw InputError(std::string("scaler: ") + e.what());
        }
    }

    std::string dump() const { return to_json().dump(2) + "\n"; }

    // CRC-32 of the canonical text form; changes iff any statistic changes.
    std::uint32_t fingerprint() const {
        const std::string s = to_json().dump();
        return static_cast<std::uint32_t>(crc32(0L, reinterpret_cast<const Bytef*>(s.data()), static_cast<uInt>(s.size())));
    }

    void save(const std::string& path) const {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw IngestError("cannot write " + path);
        os << dump();
    }

    static Scaler load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IngestError("cannot open " + path);
        try {
            return from_json(nlohmann::ordered_json::parse(in));
        } catch (const nlohmann::json::exception& e) {
            throw InputError("scaler " + path + ": " + e.what());
        }
    }

    friend bool operator==(const Scaler&, const Scaler&) = default;
};

// Feature rows with labels and source record ids.
struct FeatureTable {
    std::vector<std::uint64_t> ids;
    std::vector<FeatureVector> rows;
    std::vector<int> labels;  // 0 normal, 1 icing, -1 unlabeled
    std::size_t degenerate = 0;

    std::size_t size() const { return rows.size(); }

    std::size_t count(int label) const { return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label)); }

    Samples to_samples() const {
        std::vector<std::array<float, kFeatureCount>> x(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < kFeatureCount; ++j) x[i][j] = static_cast<float>(rows[i][j]);
        return Samples::from_rows(x, labels, ids);
    }
};

inline FeatureTable featurize(const std::vector<ScadaRecord>& records, bool strip_labels = false) {
    FeatureTable t;
    t.rows.reserve(records.size());
    for (const ScadaRecord& r : records) {
        const EngineeredFeatures f = engineer_features(r);
        t.ids.push_back(r.id);
        t.rows.push_back(f.values);
        t.labels.push_back(strip_labels ? kUnlabeled : label_code(r.label));
        t.degenerate += f.degenerate;
    }
    return t;
}

// Normalizes in place. Returns how many values fell outside [y_min, y_max]
// (test data outside the fitting range is kept unclipped).
inline std::size_t apply_normalize(const Scaler& s, FeatureTable& t) {
    std::size_t outside = 0;
    for (FeatureVector& r : t.rows) {
        r = s.apply(r);
        for (double v : r) outside += v < s.y_min || v > s.y_max;
    }
    return outside;
}

enum class Scenario { single_turbine, transfer };

inline const char* to_string(Scenario s) { return s == Scenario::single_turbine ? "single" : "transfer"; }

struct SplitConfig {
    double train_icing_fraction = 0.1;   // single turbine
    double source_icing_fraction = 0.6;  // transfer, source turbine
    double target_icing_fraction = 0.6;  // transfer, unlabeled target sample
    double test_icing_fraction = 0.4;
    double test_normal_per_icing = 10.0;
    double power_threshold = 2.0;

    void validate() const {
        for (double f : {train_icing_fraction, source_icing_fraction, target_icing_fraction, test_icing_fraction})
            if (!(f > 0.0 && f <= 1.0)) throw ConfigError("split fractions must lie in (0, 1]");
        if (train_icing_fraction + test_icing_fraction > 1.0 || target_icing_fraction + test_icing_fraction > 1.0)
            throw ConfigError("train and test icing fractions overlap (sum exceeds 1)");
        if (!(test_normal_per_icing > 0.0)) throw ConfigError("test normal:icing ratio must be positive");
        if (!std::isfinite(power_threshold)) throw ConfigError("power threshold must be finite");
    }
};

struct DatasetSplit {
    Scenario scenario = Scenario::single_turbine;
    std::uint64_t seed = 0;
    std::vector<ScadaRecord> train;   // source set for transfer
    std::vector<ScadaRecord> target;  // transfer only; labels kept here, stripped on featurization
    std::vector<ScadaRecord> test;
};

namespace detail {

inline std::size_t fraction_of(double f, std::size_t n) { return static_cast<std::size_t>(std::llround(f * static_cast<double>(n))); }

struct TurbinePools {
    std::vector<std::size_t> icing, normal;
};

inline TurbinePools shuffled_pools(const std::vector<ScadaRecord>& records, std::mt19937_64& rng) {
    TurbinePools p;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].label == Label::icing) p.icing.push_back(i);
        else if (records[i].label == Label::normal) p.normal.push_back(i);
    }
    std::shuffle(p.icing.begin(), p.icing.end(), rng);
    std::shuffle(p.normal.begin(), p.normal.end(), rng);
    return p;
}

inline std::vector<ScadaRecord> pick(const std::vector<ScadaRecord>& records, std::vector<std::size_t> idx) {
    std::sort(idx.begin(), idx.end());
    std::vector<ScadaRecord> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(records[i]);
    return out;
}

// Draws the test set (natural distribution, ratio normal:icing fixed) and
// returns what is left of both pools.
inline std::vector<ScadaRecord> draw_test(const std::vector<ScadaRecord>& records, TurbinePools& pools,
                                          const SplitConfig& cfg, const char* which) {
    const std::size_t n_icing = fraction_of(cfg.test_icing_fraction, pools.icing.size());
    const std::size_t n_normal = fraction_of(cfg.test_normal_per_icing, n_icing);
    if (n_icing == 0) throw InputError(std::string(which) + ": no icing records available for the test set");
    if (pools.normal.size() < n_normal)
        throw InputError(std::string(which) + ": test set needs " + std::to_string(n_normal) + " normal records, have " +
                         std::to_string(pools.normal.size()));
    std::vector<std::size_t> idx(pools.icing.begin(), pools.icing.begin() + static_cast<std::ptrdiff_t>(n_icing));
    idx.insert(idx.end(), pools.normal.begin(), pools.normal.begin() + static_cast<std::ptrdiff_t>(n_normal));
    pools.icing.erase(pools.icing.begin(), pools.icing.begin() + static_cast<std::ptrdiff_t>(n_icing));
    pools.normal.erase(pools.normal.begin(), pools.normal.begin() + static_cast<std::ptrdiff_t>(n_normal));
    return pick(records, std::move(idx));
}

// `fraction` of the turbine's icing records (out of `total_icing`) plus an
// equal number of low-power normal records, drawn from the remaining pools.
inline std::vector<ScadaRecord> draw_balanced(const std::vector<ScadaRecord>& records, TurbinePools& pools,
                                              double fraction, std::size_t total_icing, const SplitConfig& cfg,
                                              std::uint64_t seed, const char* which) {
    const std::size_t n_icing = fraction_of(fraction, total_icing);
    if (n_icing == 0) throw InputError(std::string(which) + ": no icing records available");
    if (pools.icing.size() < n_icing)
        throw InputError(std::string(which) + ": needs " + std::to_string(n_icing) + " icing records, have " +
                         std::to_string(pools.icing.size()));
    std::vector<std::size_t> idx(pools.icing.begin(), pools.icing.begin() + static_cast<std::ptrdiff_t>(n_icing));
    pools.icing.erase(pools.icing.begin(), pools.icing.begin() + static_cast<std::ptrdiff_t>(n_icing));
    idx.insert(idx.end(), pools.normal.begin(), pools.normal.end());
    try {
        return balance(pick(records, std::move(idx)), cfg.power_threshold, seed);
    } catch (const InputError& e) {
        throw InputError(std::string(which) + ": " + e.what());
    }
}

}  // namespace detail

// Single-turbine split: train = train_icing_fraction of the icing records plus
// as many low-power normals; test = a disjoint test_icing_fraction of icing
// plus ten times as many normals, drawn first from the natural distribution.
inline DatasetSplit split_single(const std::vector<ScadaRecord>& records, std::uint64_t seed, const SplitConfig& cfg = {}) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    detail::TurbinePools pools = detail::shuffled_pools(records, rng);
    const std::size_t total_icing = pools.icing.size();
    DatasetSplit s;
    s.scenario = Scenario::single_turbine;
    s.seed = seed;
    s.test = detail::draw_test(records, pools, cfg, "single-turbine split");
    s.train = detail::draw_balanced(records, pools, cfg.train_icing_fraction, total_icing, cfg, rng(), "single-turbine train set");
    return s;
}

// Transfer split: labelled source set from the source turbine; from the target
// turbine a test set and, disjoint from it, an unlabeled training sample.
inline DatasetSplit split_transfer(const std::vector<ScadaRecord>& source, const std::vector<ScadaRecord>& target,
                                   std::uint64_t seed, const SplitConfig& cfg = {}) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    detail::TurbinePools src = detail::shuffled_pools(source, rng);
    detail::TurbinePools tgt = detail::shuffled_pools(target, rng);
    DatasetSplit s;
    s.scenario = Scenario::transfer;
    s.seed = seed;
    s.train = detail::draw_balanced(source, src, cfg.source_icing_fraction, src.icing.size(), cfg, rng(), "source set");
    const std::size_t target_icing = tgt.icing.size();
    s.test = detail::draw_test(target, tgt, cfg, "target test split");
    s.target = detail::draw_balanced(target, tgt, cfg.target_icing_fraction, target_icing, cfg, rng(), "target sample");
    return s;
}

// Processed sets of one experiment, normalized with a scaler fitted on the
// training (source) portion only.
struct PreparedExperiment {
    Scenario scenario = Scenario::single_turbine;
    Scaler scaler;
    FeatureTable train;
    FeatureTable target;
    FeatureTable test;
    std::size_t test_outside_range = 0;
};

inline PreparedExperiment prepare(const DatasetSplit& split, Warnings* warnings = nullptr) {
    PreparedExperiment e;
    e.scenario = split.scenario;
    e.train = featurize(split.train);
    e.test = featurize(split.test);
    if (split.scenario == Scenario::transfer) e.target = featurize(split.target, true);
    e.scaler = Scaler::fit(e.train.rows, warnings);
    apply_normalize(e.scaler, e.train);
    apply_normalize(e.scaler, e.target);
    e.test_outside_range = apply_normalize(e.scaler, e.test);
    for (const FeatureTable* t : {&e.train, &e.target, &e.test})
        if (t->degenerate > 0)
            warn(warnings, std::to_string(t->degenerate) + " records hit a guarded denominator in feature engineering");
    return e;
}

// Processed CSV: id, the 28 features, label.
inline void write_features(std::ostream& os, const FeatureTable& t) {
    os << "id";
    for (auto n : kFeatureNames) os << "," << n;
    os << ",label\n";
    for (std::size_t i = 0; i < t.size(); ++i) {
        os << t.ids[i];
        for (double v : t.rows[i]) os << "," << csv::format_double(v);
        os << "," << t.labels[i] << "\n";
    }
}

inline void write_features(const std::string& path, const FeatureTable& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IngestError("cannot write " + path);
    write_features(os, t);
}

inline FeatureTable read_features(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw IngestError("processed file is empty");
    {
        std::string expected = "id";
        for (auto n : kFeatureNames) expected += "," + std::string(n);
        expected += ",label";
        if (csv::trim(line) != expected) throw IngestError("processed file header must be: " + expected);
    }
    FeatureTable t;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (csv::trim(line).empty()) continue;
        const auto f = csv::split(line);
        const std::string where = "processed file row " + std::to_string(row);
        if (f.size() != kFeatureCount + 2) throw IngestError(where + ": expected 30 fields");
        std::uint64_t id = 0;
        int label = 0;
        if (!csv::parse_int(f[0], id)) throw IngestError(where + ": bad id");
        FeatureVector v;
        for (std::size_t j = 0; j < kFeatureCount; ++j) {
            v[j] = csv::parse_double(f[j + 1]);
            if (!std::isfinite(v[j])) throw IngestError(where + ": bad value for " + std::string(kFeatureNames[j]));
        }
        if (!csv::parse_int(f.back(), label) || label < -1 || label > 1) throw IngestError(where + ": label must be 0, 1 or -1");
        t.ids.push_back(id);
        t.rows.push_back(v);
        t.labels.push_back(label);
    }
    return t;
}

inline FeatureTable read_features(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open " + path);
    return read_features(in);
}

}  // namespace icegan::data
