#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <zlib.h>

#include "icegan/data/preprocess.hpp"
#include "icegan/models/pganc.hpp"
#include "icegan/models/pgant.hpp"

namespace icegan::io {

inline constexpr char kMagic[4] = {'I', 'G', 'D', 'X'};
inline constexpr std::uint16_t kFormatVersion = 1;

enum class ModelKind : std::uint8_t { pganc = 1, pgant = 2 };

inline const char* to_string(ModelKind k) { return k == ModelKind::pganc ? "pganc" : "pgant"; }

using AnyModel = std::variant<PgancModel<float>, PgantModel<float>>;

struct Checkpoint {
    AnyModel model;
    std::map<std::string, std::string> metadata;
    std::optional<data::Scaler> scaler;

    ModelKind kind() const { return model.index() == 0 ? ModelKind::pganc : ModelKind::pgant; }
};

inline std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
    return static_cast<std::uint32_t>(crc32(0L, data, static_cast<uInt>(n)));
}

namespace detail {

class Writer {
public:
    std::vector<std::uint8_t> bytes;

    template <typename U>
    void uint(U v) {
        for (std::size_t i = 0; i < sizeof(U); ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
    void str(const std::string& s) {
        uint(static_cast<std::uint32_t>(s.size()));
        bytes.insert(bytes.end(), s.begin(), s.end());
    }
    void tensor(const Tensor<float>& t) {
        uint(static_cast<std::uint32_t>(t.size()));
        for (float v : t.data()) f32(v);
    }
};

class Reader {
public:
    Reader(const std::uint8_t* data, std::size_t size) : p_(data), end_(data + size) {}

    template <typename U>
    U uint() {
        need(sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(p_[i]) << (8 * i));
        p_ += sizeof(U);
        return v;
    }
    float f32() { return std::bit_cast<float>(uint<std::uint32_t>()); }
    std::string str() {
        const auto n = uint<std::uint32_t>();
        need(n);
        std::string s(reinterpret_cast<const char*>(p_), n);
        p_ += n;
        return s;
    }
    void tensor_into(Tensor<float>& t, const std::string& what) {
        const auto n = uint<std::uint32_t>();
        if (n != t.size())
            throw ConfigError("checkpoint: " + what + " holds " + std::to_string(n) + " values, architecture expects " +
                              std::to_string(t.size()));
        for (float& v : t.data()) v = f32();
    }
    bool done() const { return p_ == end_; }

private:
    void need(std::size_t n) const {
        if (static_cast<std::size_t>(end_ - p_) < n) throw InputError("checkpoint: truncated payload");
    }
    const std::uint8_t* p_;
    const std::uint8_t* end_;
};

struct Architecture {
    ModelKind kind = ModelKind::pganc;
    FrontEndKind front = FrontEndKind::gan;
    float leaky_slope = 0.01f;
    std::uint32_t hidden = 0;
};

inline AnyModel instantiate(const Architecture& a) {
    std::mt19937_64 rng(0);
    if (a.kind == ModelKind::pganc) return PgancModel<float>::create(rng, a.front, a.leaky_slope);
    return PgantModel<float>::create(rng, a.front, a.hidden, a.leaky_slope);
}

}  // namespace detail

// Layout: magic, u16 version, payload, u32 CRC-32 of everything before it.
// Payload: architecture (model kind, front end, slope, hidden width, then
// per layer name/kind/hyper), metadata, scaler, then per layer weight, bias,
// running mean and running variance as little-endian float32.
inline std::vector<std::uint8_t> encode_checkpoint(Checkpoint ck) {
    detail::Writer w;
    w.bytes.assign(std::begin(kMagic), std::end(kMagic));
    w.uint(kFormatVersion);
    std::visit(
        [&](auto& m) {
            using M = std::decay_t<decltype(m)>;
            w.uint(static_cast<std::uint8_t>(std::is_same_v<M, PgancModel<float>> ? ModelKind::pganc : ModelKind::pgant));
            w.uint(static_cast<std::uint8_t>(m.front.kind));
            w.f32(m.leaky_slope);
            if constexpr (std::is_same_v<M, PgantModel<float>>) w.uint(static_cast<std::uint32_t>(m.hidden()));
            else w.uint(std::uint32_t{0});
            const auto ls = m.layers();
            w.uint(static_cast<std::uint32_t>(ls.size()));
            for (const LayerParams<float>* l : ls) {
                w.str(l->weight.name);
                w.uint(static_cast<std::uint8_t>(l->kind));
                for (std::uint32_t h : {l->hyper.in_channels, l->hyper.filters, l->hyper.kernel_rows, l->hyper.kernel_cols,
                                        l->hyper.stride_rows, l->hyper.stride_cols})
                    w.uint(h);
            }
            w.uint(static_cast<std::uint32_t>(ck.metadata.size()));
            for (const auto& [k, v] : ck.metadata) {
                w.str(k);
                w.str(v);
            }
            w.str(ck.scaler ? ck.scaler->to_json().dump() : std::string());
            for (const LayerParams<float>* l : ls) {
                w.tensor(l->weight.value);
                w.tensor(l->bias.value);
                w.tensor(l->running_mean);
                w.tensor(l->running_var);
            }
        },
        ck.model);
    w.uint(crc32_of(w.bytes.data(), w.bytes.size()));
    return std::move(w.bytes);
}

inline Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 10 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw InputError("checkpoint: bad magic (not an IGDX file)");
    const std::size_t body = bytes.size() - 4;
    detail::Reader trailer(bytes.data() + body, 4);
    if (trailer.uint<std::uint32_t>() != crc32_of(bytes.data(), body)) throw ChecksumError("checkpoint: CRC-32 mismatch");
    detail::Reader r(bytes.data() + 4, body - 4);
    const auto version = r.uint<std::uint16_t>();
    if (version != kFormatVersion) throw InputError("checkpoint: unsupported format version " + std::to_string(version));

    detail::Architecture a;
    const auto kind = r.uint<std::uint8_t>();
    if (kind != 1 && kind != 2) throw InputError("checkpoint: unknown model kind");
    a.kind = static_cast<ModelKind>(kind);
    const auto front = r.uint<std::uint8_t>();
    if (front != 1 && front != 2) throw InputError("checkpoint: unknown front end");
    a.front = static_cast<FrontEndKind>(front);
    a.leaky_slope = r.f32();
    a.hidden = r.uint<std::uint32_t>();
    if (a.kind == ModelKind::pgant && a.hidden == 0) throw InputError("checkpoint: PGANT hidden width is zero");

    Checkpoint ck{detail::instantiate(a), {}, std::nullopt};
    std::visit(
        [&](auto& m) {
            const auto ls = m.layers();
            const auto n = r.uint<std::uint32_t>();
            if (n != ls.size()) throw ConfigError("checkpoint: layer count does not match the architecture");
            for (const LayerParams<float>* l : ls) {
                const std::string name = r.str();
                const auto lk = r.uint<std::uint8_t>();
                LayerHyper h;
                for (std::uint32_t* f : {&h.in_channels, &h.filters, &h.kernel_rows, &h.kernel_cols, &h.stride_rows, &h.stride_cols})
                    *f = r.uint<std::uint32_t>();
                if (name != l->weight.name || lk != static_cast<std::uint8_t>(l->kind) || !(h == l->hyper))
                    throw ConfigError("checkpoint: layer '" + name + "' does not match architecture layer '" + l->weight.name + "'");
            }
            const auto meta = r.uint<std::uint32_t>();
            for (std::uint32_t i = 0; i < meta; ++i) {
                std::string k = r.str();
                ck.metadata[k] = r.str();
            }
            const std::string scaler = r.str();
            if (!scaler.empty()) {
                try {
                    ck.scaler = data::Scaler::from_json(nlohmann::ordered_json::parse(scaler));
                } catch (const nlohmann::json::exception& e) {
                    throw InputError(std::string("checkpoint scaler: ") + e.what());
                }
            }
            for (LayerParams<float>* l : ls) {
                r.tensor_into(l->weight.value, l->weight.name + " weight");
                r.tensor_into(l->bias.value, l->weight.name + " bias");
                r.tensor_into(l->running_mean, l->weight.name + " running mean");
                r.tensor_into(l->running_var, l->weight.name + " running variance");
            }
        },
        ck.model);
    if (!r.done()) throw InputError("checkpoint: trailing bytes after parameters");
    return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    const auto bytes = encode_checkpoint(ck);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IngestError("cannot write " + path);
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IngestError("failed writing " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

// Icing-class probability for every row, in eval mode.
inline std::vector<double> icing_scores(AnyModel& model, const Tensor<float>& x, std::size_t chunk = 2048) {
    std::vector<double> out;
    const std::size_t n = x.shape().batch;
    out.reserve(n);
    for (std::size_t s = 0; s < n; s += chunk) {
        std::vector<std::size_t> idx;
        for (std::size_t i = s; i < std::min(n, s + chunk); ++i) idx.push_back(i);
        const Tensor<float> xb = gather(x, idx);
        const Tensor<float> p = std::visit(
            [&](auto& m) {
                if constexpr (std::is_same_v<std::decay_t<decltype(m)>, PgancModel<float>>) return pganc_forward(m, xb);
                else return pgant_forward(m, xb).probs;
            },
            model);
        for (std::size_t k = 0; k < idx.size(); ++k) out.push_back(p.data()[2 * k + kIcingClass]);
    }
    return out;
}

}  // namespace icegan::io
