#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "icegan/data/preprocess.hpp"
#include "icegan/eval/knn.hpp"
#include "icegan/eval/metrics.hpp"
#include "icegan/synth/generator.hpp"
#include "icegan/training/mmd.hpp"

using namespace icegan;
using namespace icegan::data;

namespace {

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Evenly strided rows, so slow drifts (wind direction) are covered.
VectorSet rows_of(const FeatureTable& t, std::size_t count) {
    VectorSet s;
    s.dim = kFeatureCount;
    const std::size_t stride = std::max<std::size_t>(1, t.size() / count);
    for (std::size_t i = 0; i < t.size() && s.count() < count; i += stride)
        s.values.insert(s.values.end(), t.rows[i].begin(), t.rows[i].end());
    return s;
}

}  // namespace

TEST(Synth, ExactClassCounts) {
    synth::SynthConfig cfg;
    cfg.n_records = 10000;
    cfg.icing_fraction = 0.1;
    cfg.invalid_fraction = 0.05;
    const auto rs = synth::generate(cfg);
    ASSERT_EQ(rs.size(), 10000u);
    std::size_t icing = 0, invalid = 0;
    for (const auto& r : rs) {
        icing += r.label == Label::icing;
        invalid += r.label == Label::invalid;
        EXPECT_EQ(r.label == Label::invalid, !fields_valid(r));
    }
    EXPECT_EQ(icing, 1000u);
    EXPECT_EQ(invalid, 500u);
}

TEST(Synth, TimestampsMonotone) {
    synth::SynthConfig cfg;
    cfg.n_records = 100;
    const auto rs = synth::generate(cfg);
    for (std::size_t i = 1; i < rs.size(); ++i) EXPECT_GT(rs[i].timestamp, rs[i - 1].timestamp);
}

TEST(Synth, IcingRaisesPowerRatio) {
    synth::SynthConfig cfg;
    cfg.n_records = 20000;
    const auto rs = eliminate_invalid(synth::generate(cfg));
    std::vector<double> normal, icing;
    for (const auto& r : rs) (r.label == Label::icing ? icing : normal).push_back(engineer_features(r).values[20]);
    EXPECT_GT(median(icing), median(normal));
}

TEST(Synth, SameSeedByteIdenticalCsv) {
    synth::SynthConfig cfg;
    cfg.n_records = 2000;
    cfg.seed = 42;
    std::stringstream a, b, c;
    write_scada(a, synth::generate(cfg));
    write_scada(b, synth::generate(cfg));
    cfg.seed = 43;
    write_scada(c, synth::generate(cfg));
    EXPECT_EQ(a.str(), b.str());
    EXPECT_NE(a.str(), c.str());
}

TEST(Synth, ConfigValidation) {
    synth::SynthConfig cfg;
    cfg.invalid_fraction = 1.5;
    EXPECT_THROW(synth::generate(cfg), ConfigError);
    cfg = {};
    cfg.icing_fraction = 0.7;
    cfg.invalid_fraction = 0.4;
    EXPECT_THROW(synth::generate(cfg), ConfigError);
    cfg = {};
    cfg.icing_power_factor = 1.0;
    EXPECT_THROW(synth::generate(cfg), ConfigError);
    cfg = {};
    cfg.domain_shift[0].gain = 0.0;
    EXPECT_THROW(synth::generate(cfg), ConfigError);
}

TEST(Synth, ValuesStayInsideManifestBounds) {
    synth::SynthConfig cfg;
    cfg.n_records = 5000;
    cfg.noise_scale = 3.0;
    cfg.domain_shift = synth::turbine_shift();
    for (const auto& r : synth::generate(cfg)) {
        if (r.label != Label::invalid) {
            EXPECT_TRUE(fields_valid(r));
        }
    }
}

// Benchmark difficulty: KNN (k = 5) on the default configuration.
TEST(Synth, DefaultConfigIsKnnSeparable) {
    const auto rs = eliminate_invalid(synth::generate(synth::SynthConfig{}));
    const auto e = prepare(split_single(rs, 1));
    const auto scores = eval::knn_baseline<kFeatureCount>(e.train.rows, e.train.labels, e.test.rows, 5);
    EXPECT_GE(eval::roc_auc(scores, e.test.labels).auc, 0.9);
}

TEST(Synth, DomainShiftIncreasesMmd) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        synth::SynthConfig a;
        a.n_records = 4000;
        a.seed = seed;
        synth::SynthConfig same = a;
        same.seed = seed + 100;
        synth::SynthConfig shifted = same;
        shifted.domain_shift = synth::turbine_shift();
        const auto src = featurize(eliminate_invalid(synth::generate(a)));
        FeatureTable t_same = featurize(eliminate_invalid(synth::generate(same)));
        FeatureTable t_shift = featurize(eliminate_invalid(synth::generate(shifted)));
        const Scaler s = Scaler::fit(src.rows);
        FeatureTable src_n = src;
        apply_normalize(s, src_n);
        apply_normalize(s, t_same);
        apply_normalize(s, t_shift);
        const double base = mmd2_rbf(rows_of(src_n, 400), rows_of(t_same, 400), 1.0);
        const double moved = mmd2_rbf(rows_of(src_n, 400), rows_of(t_shift, 400), 1.0);
        EXPECT_GT(moved, base) << "seed " << seed;
    }
}
