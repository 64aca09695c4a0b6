#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "grad_check.hpp"
#include "icegan/diffnet/adam.hpp"
#include "icegan/diffnet/layers.hpp"
#include "icegan/diffnet/ops.hpp"

using namespace icegan;
using icegan::testing::grad_check;
using icegan::testing::random_tensor;

namespace {

Tensor<double> vec(std::vector<double> v) {
    const std::size_t n = v.size();
    return Tensor<double>(Shape{1, 1, 1, n}, std::move(v));
}

// Naive cross-correlation oracle for single-row inputs.
std::vector<double> naive_conv1d(const std::vector<double>& x, const std::vector<double>& k, std::size_t stride) {
    std::vector<double> out;
    for (std::size_t s = 0; s + k.size() <= x.size(); s += stride) {
        double acc = 0.0;
        for (std::size_t j = 0; j < k.size(); ++j) acc += x[s + j] * k[j];
        out.push_back(acc);
    }
    return out;
}

// Scatter-add oracle for transposed convolution.
std::vector<double> scatter_conv_transpose(const std::vector<double>& x, const std::vector<double>& k, std::size_t stride) {
    std::vector<double> out((x.size() - 1) * stride + k.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < k.size(); ++j) out[i * stride + j] += x[i] * k[j];
    return out;
}

LayerParams<double> layer(LayerKind kind, LayerHyper h, std::uint64_t seed = 1) {
    std::mt19937_64 rng(seed);
    return layers::make_layer<double>(kind, h, "l", ParamGroup::classifier, rng);
}

}  // namespace

// ---------------------------------------------------------------------------
// conv1d

TEST(Conv1d, EncoderShapeFourFiltersKernelFour) {
    auto l = layer(LayerKind::conv1d, layers::conv1d_hyper(1, 4, 4, 1));
    Tape<double> tape;
    Var y = apply(tape, l, tape.constant(Tensor<double>(Shape{1, 1, 1, 28}, 0.5)), PassMode::inference());
    EXPECT_EQ(tape.value(y).shape().sample_str(), "4x1x25");
}

TEST(Conv1d, UnitKernelIsIdentity) {
    Tape<double> tape;
    auto x = vec({0.3, -1.0, 2.5, 4.0});
    Var y = ops::conv1d(tape, tape.constant(x), tape.constant(Tensor<double>(Shape{1, 1, 1, 1}, 1.0)),
                        tape.constant(Tensor<double>(Shape{1, 1, 1, 1}, 0.0)), 1);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(tape.value(y)[i], x[i]);
}

TEST(Conv1d, MatchesNestedLoopOracle) {
    Tape<double> tape;
    Var y = ops::conv1d(tape, tape.constant(vec({1, 2, 3, 4})), tape.constant(Tensor<double>(Shape{1, 1, 1, 3}, {1, 0, -1})),
                        tape.constant(Tensor<double>(Shape{1, 1, 1, 1}, 0.0)), 1);
    const auto expected = naive_conv1d({1, 2, 3, 4}, {1, 0, -1}, 1);
    ASSERT_EQ(expected, (std::vector<double>{-2, -2}));
    ASSERT_EQ(tape.value(y).size(), 2u);
    EXPECT_EQ(tape.value(y)[0], -2.0);
    EXPECT_EQ(tape.value(y)[1], -2.0);

    std::mt19937_64 rng(3);
    for (std::size_t stride : {1u, 2u, 3u}) {
        auto x = random_tensor(Shape{1, 1, 1, 17}, rng);
        auto k = random_tensor(Shape{1, 1, 1, 4}, rng);
        Tape<double> t2;
        Var out = ops::conv1d(t2, t2.constant(x), t2.constant(k), t2.constant(Tensor<double>(Shape{1, 1, 1, 1})), stride);
        auto oracle = naive_conv1d(x.storage(), k.storage(), stride);
        ASSERT_EQ(t2.value(out).size(), oracle.size());
        for (std::size_t i = 0; i < oracle.size(); ++i) EXPECT_NEAR(t2.value(out)[i], oracle[i], 1e-12);
    }
}

TEST(Conv1d, ChannelMismatchNamesBothShapes) {
    auto l = layer(LayerKind::conv1d, layers::conv1d_hyper(4, 8, 4, 1));
    Tape<double> tape;
    try {
        apply(tape, l, tape.constant(Tensor<double>(Shape{1, 1, 1, 28})), PassMode::inference());
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("1x1x28"), std::string::npos) << msg;
        EXPECT_NE(msg.find("8x4x1x4"), std::string::npos) << msg;
    }
}

TEST(Conv1d, InputShorterThanKernelRejected) {
    auto l = layer(LayerKind::conv1d, layers::conv1d_hyper(1, 1, 4, 1));
    Tape<double> tape;
    EXPECT_THROW(apply(tape, l, tape.constant(Tensor<double>(Shape{1, 1, 1, 3})), PassMode::inference()), ConfigError);
}

// ---------------------------------------------------------------------------
// conv_transpose1d

TEST(ConvTranspose1d, DecoderShape) {
    auto l = layer(LayerKind::conv_transpose1d, layers::conv1d_hyper(8, 8, 4, 1));
    Tape<double> tape;
    Var y = apply(tape, l, tape.constant(Tensor<double>(Shape{1, 8, 1, 22}, 0.1)), PassMode::inference());
    EXPECT_EQ(tape.value(y).shape().sample_str(), "8x1x25");
}

TEST(ConvTranspose1d, UnitKernelIsIdentity) {
    Tape<double> tape;
    auto x = vec({1.5, -2.0, 0.25});
    Var y = ops::conv_transpose1d(tape, tape.constant(x), tape.constant(Tensor<double>(Shape{1, 1, 1, 1}, 1.0)),
                                  tape.constant(Tensor<double>(Shape{1, 1, 1, 1})), 1);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(tape.value(y)[i], x[i]);
}

TEST(ConvTranspose1d, MatchesScatterAddOracle) {
    ASSERT_EQ(scatter_conv_transpose({1, 1}, {1, 2, 3}, 1), (std::vector<double>{1, 3, 5, 3}));
    Tape<double> tape;
    Var y = ops::conv_transpose1d(tape, tape.constant(vec({1, 1})), tape.constant(Tensor<double>(Shape{1, 1, 1, 3}, {1, 2, 3})),
                                  tape.constant(Tensor<double>(Shape{1, 1, 1, 1})), 1);
    const std::vector<double> expected{1, 3, 5, 3};
    ASSERT_EQ(tape.value(y).size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(tape.value(y)[i], expected[i]);

    std::mt19937_64 rng(5);
    for (std::size_t stride : {1u, 2u}) {
        auto x = random_tensor(Shape{1, 1, 1, 9}, rng);
        auto k = random_tensor(Shape{1, 1, 1, 4}, rng);
        Tape<double> t2;
        Var out = ops::conv_transpose1d(t2, t2.constant(x), t2.constant(k), t2.constant(Tensor<double>(Shape{1, 1, 1, 1})), stride);
        auto oracle = scatter_conv_transpose(x.storage(), k.storage(), stride);
        ASSERT_EQ(t2.value(out).size(), oracle.size());
        for (std::size_t i = 0; i < oracle.size(); ++i) EXPECT_NEAR(t2.value(out)[i], oracle[i], 1e-12);
    }
}

TEST(ConvTranspose1d, ChannelMismatchRejected) {
    auto l = layer(LayerKind::conv_transpose1d, layers::conv1d_hyper(8, 1, 4, 1));
    Tape<double> tape;
    EXPECT_THROW(apply(tape, l, tape.constant(Tensor<double>(Shape{1, 4, 1, 22})), PassMode::inference()), ConfigError);
}

// <conv(x), y> == <x, convT(y)> with shared weights and zero bias.
TEST(ConvTranspose1d, IsExactAdjointOfConv1d) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::size_t> ch(1, 8), kk(1, 5), st(1, 3), extra(0, 12);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t c = ch(rng), f = ch(rng), k = kk(rng), s = st(rng);
        const std::size_t out_w = 1 + extra(rng);
        const std::size_t in_w = (out_w - 1) * s + k;
        auto w = random_tensor(Shape{f, c, 1, k}, rng);
        auto x = random_tensor(Shape{2, c, 1, in_w}, rng);
        auto y = random_tensor(Shape{2, f, 1, out_w}, rng);
        Tape<double> tape;
        Var zero_f = tape.constant(Tensor<double>(Shape{1, 1, 1, f}));
        Var zero_c = tape.constant(Tensor<double>(Shape{1, 1, 1, c}));
        Var wv = tape.constant(w);
        const auto& cx = tape.value(ops::conv1d(tape, tape.constant(x), wv, zero_f, s));
        const auto& ty = tape.value(ops::conv_transpose1d(tape, tape.constant(y), wv, zero_c, s));
        ASSERT_EQ(cx.shape(), y.shape());
        ASSERT_EQ(ty.shape(), x.shape());
        double lhs = 0.0, rhs = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) lhs += cx[i] * y[i];
        for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * ty[i];
        EXPECT_NEAR(lhs, rhs, 1e-10);
    }
}

// ---------------------------------------------------------------------------
// conv2d

TEST(Conv2d, ClassifierShape) {
    auto l = layer(LayerKind::conv2d, layers::conv2d_hyper(8, 4, 1, 4, 1, 1));
    Tape<double> tape;
    Var y = apply(tape, l, tape.constant(Tensor<double>(Shape{3, 8, 2, 22}, 0.2)), PassMode::inference());
    EXPECT_EQ(tape.value(y).shape().sample_str(), "4x2x19");
    EXPECT_EQ(tape.value(y).shape().batch, 3u);
}

TEST(Conv2d, UnitKernelIsIdentity) {
    Tape<double> tape;
    Tensor<double> x(Shape{1, 1, 3, 2}, {1, 2, 3, 4, 5, 6});
    Var y = ops::conv2d(tape, tape.constant(x), tape.constant(Tensor<double>(Shape{1, 1, 1, 1}, 1.0)),
                        tape.constant(Tensor<double>(Shape{1, 1, 1, 1})), {1, 1});
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(tape.value(y)[i], x[i]);
}

TEST(Conv2d, RowwiseKernelOracle) {
    Tape<double> tape;
    Tensor<double> x(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
    Var y = ops::conv2d(tape, tape.constant(x), tape.constant(Tensor<double>(Shape{1, 1, 1, 2}, {1, 1})),
                        tape.constant(Tensor<double>(Shape{1, 1, 1, 1})), {1, 1});
    const auto& out = tape.value(y);
    EXPECT_EQ(out.shape().sample_str(), "1x2x1");
    EXPECT_EQ(out[0], 3.0);
    EXPECT_EQ(out[1], 7.0);
}

TEST(Conv2d, KernelLargerThanInputRejected) {
    auto l = layer(LayerKind::conv2d, layers::conv2d_hyper(8, 4, 3, 4, 1, 1));
    Tape<double> tape;
    EXPECT_THROW(apply(tape, l, tape.constant(Tensor<double>(Shape{1, 8, 2, 22})), PassMode::inference()), ConfigError);
}

// ---------------------------------------------------------------------------
// Activations

TEST(Activation, LeakyReluIdentityOnNonNegative) {
    Tape<double> tape;
    auto x = vec({0.0, 0.5, 3.0, -1.0});
    const auto& y = tape.value(ops::leaky_relu(tape, tape.constant(x), 0.01));
    EXPECT_EQ(y[0], 0.0);
    EXPECT_EQ(y[1], 0.5);
    EXPECT_EQ(y[2], 3.0);
    EXPECT_DOUBLE_EQ(y[3], -0.01);
}

TEST(Activation, SigmoidAndSoftmaxValues) {
    Tape<double> tape;
    EXPECT_EQ(tape.value(ops::sigmoid(tape, tape.constant(vec({0.0}))))[0], 0.5);
    for (double c : {-700.0, -3.0, 0.0, 42.0, 700.0}) {
        const auto& p = tape.value(ops::softmax(tape, tape.constant(vec({c, c}))));
        EXPECT_EQ(p[0], 0.5);
        EXPECT_EQ(p[1], 0.5);
    }
}

TEST(Activation, SoftmaxSumsToOneAndIsPositive) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 200; ++trial) {
        auto x = random_tensor(Shape{4, 1, 1, 2 + static_cast<std::size_t>(trial % 7)}, rng, -30.0, 30.0);
        Tape<double> tape;
        const auto& p = tape.value(ops::softmax(tape, tape.constant(x)));
        for (std::size_t n = 0; n < 4; ++n) {
            double s = 0.0;
            for (double v : p.sample(n)) {
                EXPECT_GT(v, 0.0);
                s += v;
            }
            EXPECT_NEAR(s, 1.0, 1e-12);
        }
    }
}

TEST(Activation, TanhBounded) {
    Tape<double> tape;
    const auto& y = tape.value(ops::tanh(tape, tape.constant(vec({-50, -1, 0, 1, 50}))));
    for (double v : y.data()) {
        EXPECT_LE(v, 1.0);
        EXPECT_GE(v, -1.0);
    }
    EXPECT_EQ(y[2], 0.0);
}

// ---------------------------------------------------------------------------
// Batchnorm

TEST(BatchNorm, TrainModeNormalizesPerChannel) {
    std::mt19937_64 rng(21);
    auto l = layer(LayerKind::batchnorm, layers::batchnorm_hyper(4));
    Tape<double> tape;
    auto x = random_tensor(Shape{16, 4, 1, 25}, rng, -3.0, 7.0);
    const auto& y = tape.value(apply(tape, l, tape.constant(x), PassMode::train()));
    for (std::size_t c = 0; c < 4; ++c) {
        double m = 0.0, in_m = 0.0;
        for (std::size_t n = 0; n < 16; ++n)
            for (std::size_t w = 0; w < 25; ++w) {
                m += y.at(n, c, 0, w);
                in_m += x.at(n, c, 0, w);
            }
        m /= 400.0;
        in_m /= 400.0;
        double v = 0.0, in_v = 0.0;
        for (std::size_t n = 0; n < 16; ++n)
            for (std::size_t w = 0; w < 25; ++w) {
                v += (y.at(n, c, 0, w) - m) * (y.at(n, c, 0, w) - m);
                in_v += (x.at(n, c, 0, w) - in_m) * (x.at(n, c, 0, w) - in_m);
            }
        v /= 400.0;
        in_v /= 400.0;
        EXPECT_LE(std::abs(m), 1e-9);
        EXPECT_NEAR(v, in_v / (in_v + 1e-5), 1e-6);
        EXPECT_NEAR(v, 1.0, 1e-4);
    }
}

TEST(BatchNorm, TwoValueChannel) {
    Tape<double> tape;
    Tensor<double> rm(Shape{1, 1, 1, 1}, 0.0), rv(Shape{1, 1, 1, 1}, 1.0);
    Tensor<double> x(Shape{2, 1, 1, 1}, {1.0, 3.0});
    ops::BatchNormOptions opt;
    opt.epsilon = 1e-15;
    const auto& y = tape.value(ops::batchnorm(tape, tape.constant(x), tape.constant(Tensor<double>(Shape{1, 1, 1, 1}, 1.0)),
                                              tape.constant(Tensor<double>(Shape{1, 1, 1, 1}, 0.0)), rm, rv, ops::Mode::train, opt));
    EXPECT_NEAR(y[0], -1.0, 1e-12);
    EXPECT_NEAR(y[1], 1.0, 1e-12);
}

TEST(BatchNorm, ZeroVarianceChannelGivesZeros) {
    auto l = layer(LayerKind::batchnorm, layers::batchnorm_hyper(1));
    Tape<double> tape;
    const auto& y = tape.value(apply(tape, l, tape.constant(Tensor<double>(Shape{5, 1, 1, 3}, 4.2)), PassMode::train()));
    for (double v : y.data()) {
        EXPECT_TRUE(std::isfinite(v));
        EXPECT_EQ(v, 0.0);
    }
}

TEST(BatchNorm, BatchOfOneInTrainModeRejected) {
    auto l = layer(LayerKind::batchnorm, layers::batchnorm_hyper(4));
    Tape<double> tape;
    EXPECT_THROW(apply(tape, l, tape.constant(Tensor<double>(Shape{1, 4, 1, 25})), PassMode::train()), UsageError);
    EXPECT_NO_THROW(apply(tape, l, tape.constant(Tensor<double>(Shape{1, 4, 1, 25})), PassMode::inference()));
}

TEST(BatchNorm, EvalModeUsesRunningStatsAndTrainModeUpdatesThem) {
    auto l = layer(LayerKind::batchnorm, layers::batchnorm_hyper(1));
    l.running_mean[0] = 2.0;
    l.running_var[0] = 4.0;
    Tape<double> tape;
    const auto& y = tape.value(apply(tape, l, tape.constant(Tensor<double>(Shape{1, 1, 1, 1}, 6.0)), PassMode::inference()));
    EXPECT_NEAR(y[0], 4.0 / std::sqrt(4.0 + 1e-5), 1e-12);
    EXPECT_EQ(l.running_mean[0], 2.0);

    Tensor<double> x(Shape{2, 1, 1, 1}, {0.0, 2.0});
    apply(tape, l, tape.constant(x), PassMode::train());
    EXPECT_NEAR(l.running_mean[0], 0.9 * 2.0 + 0.1 * 1.0, 1e-12);
    EXPECT_NEAR(l.running_var[0], 0.9 * 4.0 + 0.1 * 2.0, 1e-12);  // unbiased batch variance = 2
    EXPECT_GE(l.running_var[0], 0.0);
}

// ---------------------------------------------------------------------------
// Fully connected

TEST(FullyConnected, DiscriminatorHeadShape) {
    auto l = layer(LayerKind::fully_connected, layers::dense_hyper(176, 1));
    Tape<double> tape;
    Var y = apply(tape, l, tape.constant(Tensor<double>(Shape{2, 8, 1, 22}, 0.1)), PassMode::inference());
    EXPECT_EQ(tape.value(y).shape(), (Shape{2, 1, 1, 1}));
}

TEST(FullyConnected, IdentityAndSmallExample) {
    Tape<double> tape;
    auto x = vec({1, 1});
    const auto& id = tape.value(ops::fully_connected(tape, tape.constant(vec({0.5, -2})),
                                                     tape.constant(Tensor<double>(Shape{1, 1, 2, 2}, {1, 0, 0, 1})),
                                                     tape.constant(Tensor<double>(Shape{1, 1, 1, 2}))));
    EXPECT_EQ(id[0], 0.5);
    EXPECT_EQ(id[1], -2.0);
    const auto& y = tape.value(ops::fully_connected(tape, tape.constant(x), tape.constant(Tensor<double>(Shape{1, 1, 2, 2}, {1, 2, 3, 4})),
                                                    tape.constant(Tensor<double>(Shape{1, 1, 1, 2}))));
    EXPECT_EQ(y[0], 3.0);
    EXPECT_EQ(y[1], 7.0);
}

TEST(FullyConnected, LengthMismatchRejected) {
    auto l = layer(LayerKind::fully_connected, layers::dense_hyper(152, 2));
    Tape<double> tape;
    EXPECT_THROW(apply(tape, l, tape.constant(Tensor<double>(Shape{1, 8, 2, 22})), PassMode::inference()), ConfigError);
}

// ---------------------------------------------------------------------------
// Backward

TEST(Backward, SumGivesOnes) {
    Parameter<double> p{"x", Tensor<double>(Shape{2, 3, 1, 4}, 0.7), {}, ParamGroup::classifier};
    Tape<double> tape;
    Var loss = ops::sum(tape, tape.parameter(p));
    auto touched = tape.backward(loss);
    ASSERT_EQ(touched.size(), 1u);
    for (double g : p.grad.data()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, SigmoidSlopeAtZero) {
    Parameter<double> p{"x", vec({0.0}), {}, ParamGroup::classifier};
    Tape<double> tape;
    tape.backward(ops::sum(tape, ops::sigmoid(tape, tape.parameter(p))));
    EXPECT_DOUBLE_EQ(p.grad[0], 0.25);
}

TEST(Backward, LossFromAnotherTapeRejected) {
    Tape<double> a, b;
    Var loss = ops::sum(a, a.constant(vec({1.0})));
    EXPECT_THROW(b.backward(loss), UsageError);
    Var nonscalar = b.constant(vec({1.0, 2.0}));
    EXPECT_THROW(b.backward(nonscalar), UsageError);
}

TEST(Backward, FrozenParametersReceiveNothingAndSinkFilters) {
    Parameter<double> a{"a", vec({1.0, 2.0}), {}, ParamGroup::cnn_feature};
    Parameter<double> b{"b", vec({3.0, 4.0}), {}, ParamGroup::classifier};
    Parameter<double> c{"c", vec({5.0, 6.0}), {}, ParamGroup::classifier};
    Tape<double> tape;
    Var s = ops::add(tape, ops::add(tape, tape.parameter(a), tape.parameter(b)), tape.parameter(c, false));
    auto touched = tape.backward(ops::sum(tape, s), [](const Parameter<double>& p) { return p.group != ParamGroup::classifier; });
    ASSERT_EQ(touched.size(), 1u);
    EXPECT_EQ(touched[0], &a);
    EXPECT_TRUE(b.grad.empty());
    EXPECT_TRUE(c.grad.empty());
}

// Every op against central differences, h = 1e-5, over random shapes/seeds.
class OpGradients : public ::testing::TestWithParam<int> {};

TEST_P(OpGradients, MatchFiniteDifferences) {
    const int seed = GetParam();
    std::mt19937_64 rng(1000 + seed);
    std::uniform_int_distribution<std::size_t> chan(1, 8), kern(1, 4), width(0, 10), batch(2, 4), stride(1, 2);
    constexpr double tol = 1e-4;

    {  // conv1d
        const std::size_t c = chan(rng), f = chan(rng), k = kern(rng), s = stride(rng);
        const std::size_t w = k + width(rng);
        auto r = grad_check(
            [s](Tape<double>& t, const std::vector<Var>& v) { return ops::conv1d(t, v[0], v[1], v[2], s); },
            {random_tensor(Shape{batch(rng), c, 1, w}, rng), random_tensor(Shape{f, c, 1, k}, rng),
             random_tensor(Shape{1, 1, 1, f}, rng)},
            rng);
        EXPECT_LE(r.worst_relative_error, tol) << "conv1d input " << r.worst_input;
    }
    {  // conv_transpose1d
        const std::size_t c = chan(rng), f = chan(rng), k = kern(rng), s = stride(rng);
        auto r = grad_check(
            [s](Tape<double>& t, const std::vector<Var>& v) { return ops::conv_transpose1d(t, v[0], v[1], v[2], s); },
            {random_tensor(Shape{batch(rng), c, 1, 1 + width(rng)}, rng), random_tensor(Shape{c, f, 1, k}, rng),
             random_tensor(Shape{1, 1, 1, f}, rng)},
            rng);
        EXPECT_LE(r.worst_relative_error, tol) << "conv_transpose1d input " << r.worst_input;
    }
    {  // conv2d
        const std::size_t c = chan(rng), f = chan(rng), kr = 1 + seed % 2, kc = kern(rng);
        const ops::Stride2 s{1 + static_cast<std::size_t>(seed % 2), stride(rng)};
        auto r = grad_check(
            [s](Tape<double>& t, const std::vector<Var>& v) { return ops::conv2d(t, v[0], v[1], v[2], s); },
            {random_tensor(Shape{batch(rng), c, kr + 1, kc + width(rng)}, rng), random_tensor(Shape{f, c, kr, kc}, rng),
             random_tensor(Shape{1, 1, 1, f}, rng)},
            rng);
        EXPECT_LE(r.worst_relative_error, tol) << "conv2d input " << r.worst_input;
    }
    {  // fully_connected
        const std::size_t in = 1 + width(rng) * 3, out = chan(rng);
        auto r = grad_check(
            [](Tape<double>& t, const std::vector<Var>& v) { return ops::fully_connected(t, v[0], v[1], v[2]); },
            {random_tensor(Shape{batch(rng), 1, 1, in}, rng), random_tensor(Shape{1, 1, out, in}, rng),
             random_tensor(Shape{1, 1, 1, out}, rng)},
            rng);
        EXPECT_LE(r.worst_relative_error, tol) << "fully_connected input " << r.worst_input;
    }
    {  // activations (inputs kept away from the leaky-ReLU kink)
        const Shape s{batch(rng), chan(rng), 1, 1 + width(rng)};
        auto x = random_tensor(s, rng, -3.0, 3.0, 1e-3);
        auto lr = grad_check([](Tape<double>& t, const std::vector<Var>& v) { return ops::leaky_relu(t, v[0], 0.01); }, {x}, rng);
        auto th = grad_check([](Tape<double>& t, const std::vector<Var>& v) { return ops::tanh(t, v[0]); }, {x}, rng);
        auto sg = grad_check([](Tape<double>& t, const std::vector<Var>& v) { return ops::sigmoid(t, v[0]); }, {x}, rng);
        auto sm = grad_check([](Tape<double>& t, const std::vector<Var>& v) { return ops::softmax(t, v[0]); }, {x}, rng);
        EXPECT_LE(lr.worst_relative_error, tol) << "leaky_relu";
        EXPECT_LE(th.worst_relative_error, tol) << "tanh";
        EXPECT_LE(sg.worst_relative_error, tol) << "sigmoid";
        EXPECT_LE(sm.worst_relative_error, tol) << "softmax";
    }
    for (ops::Mode mode : {ops::Mode::train, ops::Mode::eval}) {  // batchnorm
        const std::size_t c = chan(rng);
        Tensor<double> rm = random_tensor(Shape{1, 1, 1, c}, rng);
        Tensor<double> rv = random_tensor(Shape{1, 1, 1, c}, rng, 0.5, 2.0);
        auto r = grad_check(
            [&rm, &rv, mode](Tape<double>& t, const std::vector<Var>& v) {
                Tensor<double> m = rm, var = rv;
                return ops::batchnorm(t, v[0], v[1], v[2], m, var, mode);
            },
            {random_tensor(Shape{batch(rng), c, 1 + static_cast<std::size_t>(seed % 2), 1 + width(rng)}, rng, -2.0, 2.0),
             random_tensor(Shape{1, 1, 1, c}, rng, 0.5, 1.5), random_tensor(Shape{1, 1, 1, c}, rng)},
            rng);
        EXPECT_LE(r.worst_relative_error, tol) << "batchnorm input " << r.worst_input;
    }
    {  // structural ops
        const std::size_t n = batch(rng), c = chan(rng), w = 1 + width(rng);
        auto a = random_tensor(Shape{n, c, 1, w}, rng), b = random_tensor(Shape{n, c, 1, w}, rng);
        auto cr = grad_check([](Tape<double>& t, const std::vector<Var>& v) { return ops::concat_rows(t, v[0], v[1]); }, {a, b}, rng);
        auto cb = grad_check([](Tape<double>& t, const std::vector<Var>& v) { return ops::concat_batch(t, v[0], v[1]); }, {a, b}, rng);
        auto sb = grad_check(
            [n](Tape<double>& t, const std::vector<Var>& v) { return ops::select_batch(t, v[0], {n - 1, 0, n - 1}); }, {a}, rng);
        auto sub = grad_check([](Tape<double>& t, const std::vector<Var>& v) { return ops::sub(t, v[0], v[1]); }, {a, b}, rng);
        EXPECT_LE(cr.worst_relative_error, tol) << "concat_rows";
        EXPECT_LE(cb.worst_relative_error, tol) << "concat_batch";
        EXPECT_LE(sb.worst_relative_error, tol) << "select_batch";
        EXPECT_LE(sub.worst_relative_error, tol) << "sub";
    }
}

INSTANTIATE_TEST_SUITE_P(TwentyFourSeeds, OpGradients, ::testing::Range(0, 24));

TEST(Determinism, ForwardIsReproducible) {
    std::mt19937_64 rng(4);
    auto l = layer(LayerKind::conv1d, layers::conv1d_hyper(1, 4, 4, 1), 8);
    auto bn = layer(LayerKind::batchnorm, layers::batchnorm_hyper(4), 8);
    auto x = random_tensor(Shape{3, 1, 1, 28}, rng);
    auto run = [&] {
        Tape<double> tape;
        return tape.value(apply(tape, bn, apply(tape, l, tape.constant(x), PassMode::inference()), PassMode::inference()));
    };
    const auto a = run(), b = run();
    EXPECT_EQ(a.storage(), b.storage());
}

// ---------------------------------------------------------------------------
// Adam

TEST(Adam, ZeroGradientIsFixedPoint) {
    Parameter<float> p{"p", Tensor<float>(Shape{1, 1, 1, 3}, {1.f, -2.f, 3.f}), {}, ParamGroup::classifier};
    Adam<float> opt({&p}, AdamConfig{});
    opt.zero_grad();
    opt.step();
    EXPECT_EQ(p.value.storage(), (std::vector<float>{1.f, -2.f, 3.f}));
    EXPECT_EQ(opt.state().step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    Parameter<double> p{"p", vec({0.5}), {}, ParamGroup::classifier};
    Adam<double> opt({&p}, AdamConfig{0.001});
    opt.zero_grad();
    p.grad[0] = 1.0;
    opt.step();
    // m̂ = 1, v̂ = 1 → step = ξ · 1/(1 + ε)
    EXPECT_NEAR(p.value[0], 0.5 - 0.001 / (1.0 + 1e-8), 1e-15);
}

TEST(Adam, ConstantGradientMovesMonotonically) {
    Parameter<double> p{"p", vec({0.0}), {}, ParamGroup::classifier};
    Adam<double> opt({&p}, AdamConfig{0.01});
    double prev = p.value[0];
    for (int i = 0; i < 2; ++i) {
        opt.zero_grad();
        p.grad[0] = 2.5;
        opt.step();
        EXPECT_LT(p.value[0], prev);
        prev = p.value[0];
    }
    EXPECT_EQ(opt.state().step, 2u);
    for (const auto& v : opt.state().v)
        for (double e : v) EXPECT_GE(e, 0.0);
}

TEST(Adam, NonFiniteGradientAbortsStep) {
    Parameter<double> a{"a", vec({1.0}), {}, ParamGroup::classifier};
    Parameter<double> b{"b", vec({2.0}), {}, ParamGroup::classifier};
    Adam<double> opt({&a, &b}, AdamConfig{});
    opt.zero_grad();
    a.grad[0] = 1.0;
    b.grad[0] = std::nan("");
    EXPECT_THROW(opt.step(), DivergenceError);
    EXPECT_EQ(a.value[0], 1.0);
    EXPECT_EQ(b.value[0], 2.0);
    EXPECT_EQ(opt.state().step, 0u);
}
