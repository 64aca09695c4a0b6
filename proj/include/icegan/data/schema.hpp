#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "icegan/errors.hpp"
#include "icegan/feature_count.hpp"

namespace icegan::data {

inline constexpr std::size_t kRawColumnCount = 26;

// One SCADA variable with its admissible range in the (encrypted) units of
// the data. Values outside [min, max] mark a record invalid.
struct RawColumn {
    std::string_view name;
    double min;
    double max;
    bool required;
};

// The 26 SCADA variables, in canonical CSV order. wind_direction_mean may
// be absent from an input file; it is then derived from wind_direction.
inline constexpr std::array<RawColumn, kRawColumnCount> kRawColumns{{
    {"wind_speed", 0.0, 10.0, true},
    {"generator_speed", 0.0, 5.0, true},
    {"power", -1.0, 4.0, true},
    {"wind_direction", -720.0, 720.0, true},
    {"wind_direction_mean", -720.0, 720.0, false},
    {"yaw_position", -720.0, 720.0, true},
    {"yaw_speed", -20.0, 20.0, true},
    {"pitch1_angle", -20.0, 120.0, true},
    {"pitch2_angle", -20.0, 120.0, true},
    {"pitch3_angle", -20.0, 120.0, true},
    {"pitch1_speed", -30.0, 30.0, true},
    {"pitch2_speed", -30.0, 30.0, true},
    {"pitch3_speed", -30.0, 30.0, true},
    {"pitch1_moto_tmp", -60.0, 150.0, true},
    {"pitch2_moto_tmp", -60.0, 150.0, true},
    {"pitch3_moto_tmp", -60.0, 150.0, true},
    {"acc_x", -10.0, 10.0, true},
    {"acc_y", -10.0, 10.0, true},
    {"environment_tmp", -60.0, 60.0, true},
    {"int_tmp", -60.0, 90.0, true},
    {"pitch1_ng5_tmp", -60.0, 150.0, true},
    {"pitch2_ng5_tmp", -60.0, 150.0, true},
    {"pitch3_ng5_tmp", -60.0, 150.0, true},
    {"pitch1_ng5_DC", -20.0, 20.0, true},
    {"pitch2_ng5_DC", -20.0, 20.0, true},
    {"pitch3_ng5_DC", -20.0, 20.0, true},
}};

enum RawIndex : std::size_t {
    wind_speed,
    generator_speed,
    power,
    wind_direction,
    wind_direction_mean,
    yaw_position,
    yaw_speed,
    pitch1_angle,
    pitch2_angle,
    pitch3_angle,
    pitch1_speed,
    pitch2_speed,
    pitch3_speed,
    pitch1_moto_tmp,
    pitch2_moto_tmp,
    pitch3_moto_tmp,
    acc_x,
    acc_y,
    environment_tmp,
    int_tmp,
    pitch1_ng5_tmp,
    pitch2_ng5_tmp,
    pitch3_ng5_tmp,
    pitch1_ng5_DC,
    pitch2_ng5_DC,
    pitch3_ng5_DC,
};

// Model input features in their fixed order.
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames{{
    "wind_speed",       "generator_speed",  "power",           "wind_direction",    "wind_direction_mean",
    "yaw_position",     "yaw_speed",        "acc_x",           "acc_y",             "environment_tmp",
    "int_tmp",          "pitch1_ng5_tmp",   "pitch2_ng5_tmp",  "pitch3_ng5_tmp",    "pitch1_ng5_DC",
    "pitch2_ng5_DC",    "pitch3_ng5_DC",    "pitch_angle_mean", "pitch_speed_mean", "pitch_moto_tmp_mean",
    "kappa_w2p",        "kappa_w2g",        "kappa_w2pg",      "kappa_1",           "kappa_2",
    "kappa_3",          "kappa_4",          "kappa_5",
}};

inline std::size_t raw_index(std::string_view name) {
    for (std::size_t i = 0; i < kRawColumnCount; ++i)
        if (kRawColumns[i].name == name) return i;
    throw ConfigError("unknown raw column '" + std::string(name) + "'");
}

inline bool in_bounds(std::size_t column, double v) { return v >= kRawColumns[column].min && v <= kRawColumns[column].max; }

// Checks a manifest file (CSV: name,min,max,required) against the built-in
// column table so the shipped manifest and the code cannot drift apart.
inline void verify_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open raw-column manifest " + path);
    std::string line;
    std::getline(in, line);
    if (line != "name,min,max,required") throw IngestError("manifest header must be 'name,min,max,required'");
    std::size_t i = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (i >= kRawColumnCount) throw IngestError("manifest lists more than 26 columns");
        std::stringstream ss(line);
        std::string name, lo, hi, req;
        std::getline(ss, name, ',');
        std::getline(ss, lo, ',');
        std::getline(ss, hi, ',');
        std::getline(ss, req, ',');
        const RawColumn& c = kRawColumns[i];
        if (name != c.name || std::stod(lo) != c.min || std::stod(hi) != c.max || (req == "1") != c.required)
            throw IngestError("manifest row " + std::to_string(i + 1) + " (" + name + ") does not match column '" +
                              std::string(c.name) + "'");
        ++i;
    }
    if (i != kRawColumnCount) throw IngestError("manifest lists " + std::to_string(i) + " columns, expected 26");
}

}  // namespace icegan::data
