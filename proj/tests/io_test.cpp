#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <random>

#include <zlib.h>

#include "icegan/io/checkpoint.hpp"

using namespace icegan;
using namespace icegan::io;

namespace {

// Fills every tensor, batchnorm statistics included, with random values.
template <typename M>
void scramble(M& m, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> n(0.0f, 3.0f);
    for (LayerParams<float>* l : m.layers())
        for (Tensor<float>* t : {&l->weight.value, &l->bias.value, &l->running_mean, &l->running_var})
            for (float& v : t->data()) v = n(rng);
}

bool bit_equal(const Tensor<float>& a, const Tensor<float>& b) {
    return a.size() == b.size() && std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(float)) == 0;
}

template <typename M>
void expect_bit_equal(M& a, M& b) {
    auto la = a.layers();
    auto lb = b.layers();
    ASSERT_EQ(la.size(), lb.size());
    for (std::size_t i = 0; i < la.size(); ++i) {
        SCOPED_TRACE(la[i]->weight.name);
        EXPECT_TRUE(bit_equal(la[i]->weight.value, lb[i]->weight.value));
        EXPECT_TRUE(bit_equal(la[i]->bias.value, lb[i]->bias.value));
        EXPECT_TRUE(bit_equal(la[i]->running_mean, lb[i]->running_mean));
        EXPECT_TRUE(bit_equal(la[i]->running_var, lb[i]->running_var));
    }
}

data::Scaler some_scaler() {
    data::Scaler s;
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
        s.x_min[j] = -1.0 - 0.1 * static_cast<double>(j);
        s.x_max[j] = 2.0 + 0.37 * static_cast<double>(j);
    }
    return s;
}

Checkpoint pganc_checkpoint(std::uint64_t seed = 3) {
    std::mt19937_64 rng(seed);
    auto m = PgancModel<float>::create(rng, FrontEndKind::gan, 0.02);
    scramble(m, seed + 1);
    return Checkpoint{m, {{"method", "PGANC-stage2"}, {"seed", "3"}}, some_scaler()};
}

void put_crc(std::vector<std::uint8_t>& bytes) {
    const std::size_t body = bytes.size() - 4;
    const auto c = static_cast<std::uint32_t>(crc32(0L, bytes.data(), static_cast<uInt>(body)));
    for (int i = 0; i < 4; ++i) bytes[body + i] = static_cast<std::uint8_t>(c >> (8 * i));
}

}  // namespace

TEST(Checkpoint, PgancRoundTripIsBitExact) {
    Checkpoint ck = pganc_checkpoint();
    Checkpoint back = decode_checkpoint(encode_checkpoint(ck));
    ASSERT_EQ(back.kind(), ModelKind::pganc);
    auto& a = std::get<PgancModel<float>>(ck.model);
    auto& b = std::get<PgancModel<float>>(back.model);
    EXPECT_EQ(b.front.kind, FrontEndKind::gan);
    EXPECT_EQ(b.leaky_slope, a.leaky_slope);
    expect_bit_equal(a, b);
    EXPECT_EQ(back.metadata, ck.metadata);
    ASSERT_TRUE(back.scaler.has_value());
    EXPECT_EQ(*back.scaler, *ck.scaler);
}

TEST(Checkpoint, PgantRoundTripIsBitExact) {
    for (FrontEndKind kind : {FrontEndKind::gan, FrontEndKind::cnn}) {
        std::mt19937_64 rng(11);
        auto m = PgantModel<float>::create(rng, kind, 24, 0.05);
        scramble(m, 12);
        Checkpoint ck{m, {}, std::nullopt};
        Checkpoint back = decode_checkpoint(encode_checkpoint(ck));
        ASSERT_EQ(back.kind(), ModelKind::pgant);
        auto& b = std::get<PgantModel<float>>(back.model);
        EXPECT_EQ(b.hidden(), 24u);
        EXPECT_EQ(b.front.kind, kind);
        expect_bit_equal(m, b);
        EXPECT_FALSE(back.scaler.has_value());
    }
}

TEST(Checkpoint, EncodingIsStable) {
    const auto bytes = encode_checkpoint(pganc_checkpoint());
    EXPECT_EQ(encode_checkpoint(pganc_checkpoint()), bytes);
    EXPECT_EQ(encode_checkpoint(decode_checkpoint(bytes)), bytes);
    ASSERT_GE(bytes.size(), 6u);
    EXPECT_EQ(std::memcmp(bytes.data(), "IGDX", 4), 0);
    EXPECT_EQ(bytes[4] | (bytes[5] << 8), kFormatVersion);
}

TEST(Checkpoint, AnyFlippedByteIsDetected) {
    const auto bytes = encode_checkpoint(pganc_checkpoint());
    for (std::size_t pos = 0; pos < bytes.size(); pos += 1 + pos / 50) {
        auto bad = bytes;
        bad[pos] ^= 0x10;
        if (pos < 4) EXPECT_THROW(decode_checkpoint(bad), InputError) << pos;
        else EXPECT_THROW(decode_checkpoint(bad), ChecksumError) << pos;
    }
}

TEST(Checkpoint, TruncationIsDetected) {
    const auto bytes = encode_checkpoint(pganc_checkpoint());
    for (std::size_t n : {std::size_t{0}, std::size_t{3}, std::size_t{12}, bytes.size() / 2, bytes.size() - 1}) {
        std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(n));
        EXPECT_ANY_THROW(decode_checkpoint(cut)) << n;
    }
    // Truncated payload with a valid checksum.
    std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 40);
    put_crc(cut);
    EXPECT_THROW(decode_checkpoint(cut), InputError);
}

TEST(Checkpoint, ArchitectureMismatchIsAConfigError) {
    std::mt19937_64 rng(5);
    auto bytes = encode_checkpoint(Checkpoint{PgantModel<float>::create(rng), {}, std::nullopt});
    // magic(4) version(2) kind(1) front(1) slope(4) then the hidden width.
    ASSERT_EQ(bytes[12], 16);
    bytes[12] = 8;
    put_crc(bytes);
    EXPECT_THROW(decode_checkpoint(bytes), ConfigError);
}

TEST(Checkpoint, FileRoundTripKeepsPredictions) {
    const auto path = (std::filesystem::temp_directory_path() / "icegan_io_test.igdx").string();
    Checkpoint ck = pganc_checkpoint(9);
    // Keep the batchnorm variances positive so inference is well defined.
    for (LayerParams<float>* l : std::get<PgancModel<float>>(ck.model).layers())
        for (float& v : l->running_var.data()) v = std::abs(v) + 0.5f;
    save_checkpoint(path, ck);
    Checkpoint back = load_checkpoint(path);
    std::filesystem::remove(path);

    std::mt19937_64 rng(1);
    std::normal_distribution<float> n;
    Tensor<float> x(Shape{37, 1, 1, kFeatureCount});
    for (float& v : x.data()) v = n(rng);
    const auto a = icing_scores(ck.model, x, 10);
    const auto b = icing_scores(back.model, x);
    ASSERT_EQ(a.size(), 37u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i], b[i]);
        EXPECT_GE(a[i], 0.0);
        EXPECT_LE(a[i], 1.0);
    }
}

TEST(Checkpoint, MissingFileIsAnIngestError) {
    EXPECT_THROW(load_checkpoint("/nonexistent/dir/model.igdx"), IngestError);
}
