#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <numeric>
#include <random>
#include <sstream>

#include "icegan/eval/knn.hpp"
#include "icegan/eval/metrics.hpp"

using namespace icegan;
using namespace icegan::eval;

namespace {

double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
    double wins = 0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j)
            if (y[i] == 1 && y[j] == 0) {
                ++pairs;
                wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
            }
    return wins / static_cast<double>(pairs);
}

struct Instance {
    std::vector<double> scores;
    std::vector<int> labels;
};

// Random scores on a coarse grid so ties are frequent.
Instance random_instance(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> size(2, 120), grid(0, 20), coin(0, 1);
    Instance in;
    const int n = size(rng);
    for (int i = 0; i < n; ++i) {
        in.labels.push_back(coin(rng));
        in.scores.push_back(grid(rng) / 20.0);
    }
    in.labels[0] = 0;
    in.labels[1] = 1;
    return in;
}

}  // namespace

TEST(Confusion, PerfectClassifier) {
    const auto c = confusion(std::vector<double>{0.9, 0.1, 0.8, 0.2}, std::vector<int>{1, 0, 1, 0});
    EXPECT_EQ(c, (ConfusionCounts{2, 0, 0, 2}));
}

TEST(Confusion, DirectRule) {
    const auto c = confusion(std::vector<double>{0.9, 0.4}, std::vector<int>{1, 1});
    EXPECT_EQ(c.tp, 1u);
    EXPECT_EQ(c.fn, 1u);
}

TEST(Confusion, ThresholdZeroPredictsAllIcing) {
    const auto c = confusion(std::vector<double>{0.0, 0.3, 0.7}, std::vector<int>{0, 0, 1}, 0.0);
    EXPECT_EQ(c.tn, 0u);
    EXPECT_EQ(c.fp, 2u);
    EXPECT_EQ(c.tp, 1u);
}

TEST(Confusion, Errors) {
    EXPECT_THROW(confusion(std::vector<double>{}, std::vector<int>{}), UsageError);
    EXPECT_THROW(confusion(std::vector<double>{0.5}, std::vector<int>{2}), InputError);
}

TEST(RocAuc, PerfectSeparation) {
    EXPECT_EQ(roc_auc(std::vector<double>{0.9, 0.8, 0.1, 0.2}, std::vector<int>{1, 1, 0, 0}).auc, 1.0);
}

TEST(RocAuc, AllEqualScores) {
    EXPECT_EQ(roc_auc(std::vector<double>(6, 0.3), std::vector<int>{1, 0, 1, 0, 0, 1}).auc, 0.5);
}

TEST(RocAuc, WorkedExample) {
    EXPECT_EQ(roc_auc(std::vector<double>{0.9, 0.7, 0.8, 0.3}, std::vector<int>{1, 1, 0, 0}).auc, 0.75);
}

TEST(RocAuc, SingleClassIsAnError) {
    EXPECT_THROW(roc_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), InputError);
}

TEST(RocAuc, MatchesPairwiseOracleAndTrapezoid) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const Instance in = random_instance(rng);
        const RocCurve roc = roc_auc(in.scores, in.labels);
        EXPECT_NEAR(roc.auc, pairwise_auc(in.scores, in.labels), 1e-12);
        EXPECT_NEAR(roc.auc, roc.trapezoid_auc, 1e-12);
    }
}

TEST(RocAuc, CurveEndpointsAndMonotone) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const Instance in = random_instance(rng);
        const auto& p = roc_auc(in.scores, in.labels).points;
        EXPECT_EQ(p.front().fpr, 0.0);
        EXPECT_EQ(p.front().tpr, 0.0);
        EXPECT_EQ(p.back().fpr, 1.0);
        EXPECT_EQ(p.back().tpr, 1.0);
        for (std::size_t i = 1; i < p.size(); ++i) {
            EXPECT_GE(p[i].fpr, p[i - 1].fpr);
            EXPECT_GE(p[i].tpr, p[i - 1].tpr);
            EXPECT_LT(p[i].threshold, p[i - 1].threshold);
        }
    }
}

TEST(RocAuc, CsvExport) {
    std::stringstream ss;
    write_roc_csv(ss, roc_auc(std::vector<double>{0.9, 0.1}, std::vector<int>{1, 0}));
    EXPECT_EQ(ss.str(), "threshold,fpr,tpr\ninf,0,0\n0.90000000000000002,0,1\n0.10000000000000001,1,1\n");
}

TEST(Score, PerfectIsOne) {
    EXPECT_EQ(competition_score(ConfusionCounts{10, 0, 0, 100}), 1.0);
}

TEST(Score, WorkedExamples) {
    // N_normal = 100, N_fault = 10.
    const double a = 0.1;
    EXPECT_EQ(competition_score(ConfusionCounts{8, 2, 1, 99}), 1.0 - a * 2.0 / 100.0 - (1.0 - a) * 1.0 / 10.0);
    EXPECT_NEAR(competition_score(ConfusionCounts{8, 2, 1, 99}), 0.908, 1e-15);
    EXPECT_EQ(competition_score(ConfusionCounts{10, 0, 10, 90}), 1.0 - (1.0 - a) * 10.0 / 10.0);
    EXPECT_NEAR(competition_score(ConfusionCounts{10, 0, 10, 90}), 0.1, 1e-15);
}

TEST(Score, SwappedConvention) {
    const ConfusionCounts c{8, 2, 1, 99};
    EXPECT_EQ(competition_score(c, ScoreConvention::swapped), 1.0 - 0.1 * 2.0 / 10.0 - 0.9 * 1.0 / 100.0);
    EXPECT_EQ(parse_score_convention("swapped"), ScoreConvention::swapped);
    EXPECT_THROW(parse_score_convention("other"), ConfigError);
}

TEST(Score, ZeroTotalsAreAnError) {
    EXPECT_THROW(competition_score(ConfusionCounts{0, 0, 3, 5}), InputError);
    EXPECT_THROW(competition_score(ConfusionCounts{3, 1, 0, 0}), InputError);
}

TEST(Score, MonotoneInErrors) {
    // Move samples from correct to wrong with class totals fixed.
    for (std::uint64_t fn = 0; fn < 10; ++fn) {
        EXPECT_GT(competition_score(ConfusionCounts{10 - fn, fn, 3, 97}), competition_score(ConfusionCounts{9 - fn, fn + 1, 3, 97}));
    }
    for (std::uint64_t fp = 0; fp < 99; ++fp) {
        EXPECT_GT(competition_score(ConfusionCounts{7, 3, fp, 100 - fp}), competition_score(ConfusionCounts{7, 3, fp + 1, 99 - fp}));
    }
}

TEST(Mcc, PerfectAndSymmetric) {
    EXPECT_EQ(mcc(ConfusionCounts{5, 0, 0, 7}).value, 1.0);
    EXPECT_EQ(mcc(ConfusionCounts{4, 4, 4, 4}).value, 0.0);
    EXPECT_FALSE(mcc(ConfusionCounts{4, 4, 4, 4}).degenerate);
}

TEST(Mcc, WorkedExample) {
    EXPECT_EQ(mcc(ConfusionCounts{90, 10, 20, 80}).value, 7000.0 / std::sqrt(110.0 * 100.0 * 100.0 * 90.0));
    EXPECT_NEAR(mcc(ConfusionCounts{90, 10, 20, 80}).value, 0.7035, 5e-5);
}

TEST(Mcc, DegenerateIsZeroWithFlag) {
    const auto m = mcc(ConfusionCounts{0, 0, 3, 5});
    EXPECT_EQ(m.value, 0.0);
    EXPECT_TRUE(m.degenerate);
}

TEST(Mcc, AlwaysInRange) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::uint64_t> d(0, 1000);
    for (int i = 0; i < 1000; ++i) {
        const double v = mcc(ConfusionCounts{d(rng), d(rng), d(rng), d(rng)}).value;
        EXPECT_GE(v, -1.0);
        EXPECT_LE(v, 1.0);
    }
}

using Point = std::array<double, 3>;

TEST(Knn, ExactMatchWithKOne) {
    const std::vector<Point> train{{0, 0, 0}, {1, 1, 1}, {5, 5, 5}};
    const std::vector<int> labels{0, 1, 0};
    const auto s = knn_baseline<3>(train, labels, std::vector<Point>{{1, 1, 1}, {5, 5, 5}}, 1);
    EXPECT_EQ(s, (std::vector<double>{1.0, 0.0}));
}

TEST(Knn, MatchesExhaustiveSearch) {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> grid(-3, 3);  // coarse grid forces distance ties
    std::uniform_int_distribution<int> coin(0, 1);
    std::vector<Point> train(200), queries(50);
    std::vector<int> labels(200);
    for (auto& p : train)
        for (double& v : p) v = grid(rng);
    for (int& l : labels) l = coin(rng);
    for (auto& p : queries)
        for (double& v : p) v = grid(rng);
    for (std::size_t k : {1u, 3u, 5u, 17u}) {
        const auto s = knn_baseline<3>(train, labels, queries, k);
        for (std::size_t q = 0; q < queries.size(); ++q) {
            std::vector<std::size_t> order(train.size());
            std::iota(order.begin(), order.end(), 0);
            auto dist = [&](std::size_t i) {
                double d = 0;
                for (int j = 0; j < 3; ++j) d += (queries[q][j] - train[i][j]) * (queries[q][j] - train[i][j]);
                return d;
            };
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist(a) < dist(b); });
            double icing = 0;
            for (std::size_t m = 0; m < k; ++m) icing += labels[order[m]];
            EXPECT_EQ(s[q], icing / double(k)) << "k=" << k << " q=" << q;
        }
    }
}

TEST(Knn, FullKGivesTrainingFraction) {
    const std::vector<Point> train{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
    const std::vector<int> labels{1, 0, 0, 0};
    for (double s : knn_baseline<3>(train, labels, std::vector<Point>{{9, 9, 9}, {-1, 0, 0}}, 4)) EXPECT_EQ(s, 0.25);
}

TEST(Knn, KLargerThanTrainIsAnError) {
    const std::vector<Point> train{{0, 0, 0}};
    EXPECT_THROW(knn_baseline<3>(train, std::vector<int>{0}, std::vector<Point>{{0, 0, 0}}, 2), ConfigError);
}
