#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "icegan/data/scada.hpp"

namespace icegan::synth {

using data::kRawColumnCount;
using data::ScadaRecord;

struct Affine {
    double gain = 1.0;
    double offset = 0.0;
    friend bool operator==(const Affine&, const Affine&) = default;
};

using DomainShift = std::array<Affine, kRawColumnCount>;

inline bool is_identity(const DomainShift& s) {
    return std::all_of(s.begin(), s.end(), [](const Affine& a) { return a == Affine{}; });
}

struct SynthConfig {
    std::size_t n_records = 50000;
    double icing_fraction = 0.06;
    double invalid_fraction = 0.05;
    double noise_scale = 1.0;
    double icing_power_factor = 0.6;
    DomainShift domain_shift{};
    std::uint64_t seed = 1;
    std::int64_t start_timestamp = 1'500'000'000;
    std::int64_t interval_seconds = 7;

    void validate() const {
        if (n_records == 0) throw ConfigError("synth: n_records must be positive");
        for (double f : {icing_fraction, invalid_fraction})
            if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("synth: fractions must lie in [0, 1]");
        if (icing_fraction + invalid_fraction > 1.0) throw ConfigError("synth: icing and invalid fractions sum to more than 1");
        if (!(icing_power_factor > 0.0 && icing_power_factor < 1.0))
            throw ConfigError("synth: icing_power_factor must lie in (0, 1)");
        if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) throw ConfigError("synth: noise_scale must be non-negative");
        if (interval_seconds <= 0) throw ConfigError("synth: interval must be positive");
        for (const Affine& a : domain_shift)
            if (!std::isfinite(a.gain) || !std::isfinite(a.offset) || a.gain == 0.0)
                throw ConfigError("synth: domain shift gains must be finite and nonzero");
    }

    std::size_t icing_count() const { return static_cast<std::size_t>(std::llround(icing_fraction * static_cast<double>(n_records))); }
    std::size_t invalid_count() const { return static_cast<std::size_t>(std::llround(invalid_fraction * static_cast<double>(n_records))); }
};

// Sensor recalibration of a second turbine: the same physics read through
// different gains and offsets.
inline DomainShift turbine_shift() {
    using namespace data;
    DomainShift s{};
    s[wind_speed] = {1.15, 0.2};
    s[generator_speed] = {0.9, 0.1};
    s[power] = {0.75, 0.3};
    s[environment_tmp] = {1.0, 5.0};
    s[int_tmp] = {1.0, 10.0};
    s[pitch1_moto_tmp] = s[pitch2_moto_tmp] = s[pitch3_moto_tmp] = {1.1, 6.0};
    s[pitch1_ng5_tmp] = s[pitch2_ng5_tmp] = s[pitch3_ng5_tmp] = {1.0, 8.0};
    s[pitch1_ng5_DC] = s[pitch2_ng5_DC] = s[pitch3_ng5_DC] = {1.3, 0.1};
    s[acc_x] = s[acc_y] = {1.6, 0.0};
    return s;
}

namespace detail {

inline constexpr double kCutIn = 3.0, kRated = 13.0, kCutOut = 25.0;

// Normalized power curve: cubic between cut-in and rated wind speed.
inline double power_curve(double ws) {
    if (ws < kCutIn || ws >= kCutOut) return 0.0;
    if (ws >= kRated) return 1.0;
    return (ws * ws * ws - kCutIn * kCutIn * kCutIn) / (kRated * kRated * kRated - kCutIn * kCutIn * kCutIn);
}

inline double reflect(double v, double lo, double hi) {
    while (v < lo || v > hi) v = v < lo ? 2 * lo - v : 2 * hi - v;
    return v;
}

}  // namespace detail

// Labelled synthetic SCADA records at a fixed sampling interval. Class counts
// are exact: round(icing_fraction * n) icing, round(invalid_fraction * n)
// invalid (1-3 blanked fields), the rest normal.
inline std::vector<ScadaRecord> generate(const SynthConfig& cfg) {
    using namespace data;
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    const std::size_t n = cfg.n_records;
    std::vector<Label> labels(n, Label::normal);
    std::fill_n(labels.begin(), cfg.icing_count(), Label::icing);
    std::fill_n(labels.begin() + static_cast<std::ptrdiff_t>(cfg.icing_count()), cfg.invalid_count(), Label::invalid);
    std::shuffle(labels.begin(), labels.end(), rng);

    const double s = cfg.noise_scale;
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::weibull_distribution<double> weibull(2.0, 6.0);
    auto N = [&](double sd) { return sd * s * gauss(rng); };
    auto U = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    std::vector<ScadaRecord> out(n);
    double direction = U(0.0, 360.0);
    for (std::size_t i = 0; i < n; ++i) {
        ScadaRecord& r = out[i];
        r.id = i;
        r.timestamp = cfg.start_timestamp + static_cast<std::int64_t>(i) * cfg.interval_seconds;
        r.label = labels[i];
        const bool icing = labels[i] == Label::icing;

        double ws, t_env;
        if (icing) {
            ws = U(6.5, 11.5);
            t_env = U(-8.0, -0.5);
        } else {
            ws = std::clamp(weibull(rng), 2.0, 25.0);
            t_env = -1.0 + 6.0 * gauss(rng);
        }
        double P = detail::power_curve(ws);
        P = std::clamp(P + N(0.005 + 0.04 * P), 0.0, 1.05);
        if (icing) P *= cfg.icing_power_factor;
        double gs = 0.15 + 0.85 * std::min(ws, detail::kRated) / detail::kRated + N(0.01);
        if (icing) gs *= 0.93;
        const double pitch = ws > detail::kRated ? 2.0 * (ws - detail::kRated) : 0.0;
        const double t_int = t_env + 12.0 + 5.0 * P + N(1.0);
        const double acc_sd = (0.02 + 0.03 * P) * (icing ? 1.3 : 1.0);

        direction = detail::reflect(direction + N(4.0), 0.0, 360.0);
        auto& v = r.values;
        v[wind_speed] = ws / 4.0 + N(0.02);
        v[generator_speed] = 0.5 + 2.0 * gs;
        v[power] = 2.4 * P - 0.2;
        v[wind_direction] = direction;
        v[yaw_position] = direction + N(3.0);
        v[yaw_speed] = N(0.3);
        for (std::size_t b = 0; b < 3; ++b) {
            v[pitch1_angle + b] = pitch + N(0.3);
            v[pitch1_speed + b] = N(0.2);
            v[pitch1_moto_tmp + b] = t_env + 20.0 + 10.0 * P + N(1.0);
            v[pitch1_ng5_tmp + b] = t_int + 5.0 + N(1.0);
            v[pitch1_ng5_DC + b] = 0.5 + 0.2 * P + N(0.05);
        }
        v[acc_x] = N(acc_sd);
        v[acc_y] = N(acc_sd);
        v[environment_tmp] = t_env;
        v[int_tmp] = t_int;
    }
    derive_wind_direction_mean(out);

    for (ScadaRecord& r : out)
        for (std::size_t c = 0; c < kRawColumnCount; ++c) {
            const Affine& a = cfg.domain_shift[c];
            r.values[c] = std::clamp(a.gain * r.values[c] + a.offset, kRawColumns[c].min, kRawColumns[c].max);
        }

    std::uniform_int_distribution<std::size_t> column(0, kRawColumnCount - 1);
    std::uniform_int_distribution<int> blanks(1, 3);
    for (ScadaRecord& r : out)
        if (r.label == Label::invalid) {
            const int k = blanks(rng);
            for (int j = 0; j < k; ++j) r.values[column(rng)] = std::numeric_limits<double>::quiet_NaN();
        }
    return out;
}

}  // namespace icegan::synth
