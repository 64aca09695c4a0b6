#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "icegan/data/schema.hpp"

namespace icegan::data {

enum class Label : std::int8_t { normal = 0, icing = 1, invalid = 2, unlabeled = 3 };

inline const char* to_string(Label l) {
    switch (l) {
        case Label::normal: return "normal";
        case Label::icing: return "icing";
        case Label::invalid: return "invalid";
        case Label::unlabeled: return "unlabeled";
    }
    return "?";
}

// CSV label column: 0 normal, 1 icing, -1 anything else.
inline int label_code(Label l) { return l == Label::normal ? 0 : l == Label::icing ? 1 : -1; }

struct ScadaRecord {
    std::uint64_t id = 0;
    std::int64_t timestamp = 0;  // seconds
    std::array<double, kRawColumnCount> values{};  // NaN when missing
    Label label = Label::unlabeled;

    double operator[](std::size_t column) const { return values[column]; }

    friend bool operator==(const ScadaRecord& a, const ScadaRecord& b) {
        if (a.id != b.id || a.timestamp != b.timestamp || a.label != b.label) return false;
        for (std::size_t i = 0; i < kRawColumnCount; ++i) {
            const double x = a.values[i], y = b.values[i];
            if (!(x == y || (std::isnan(x) && std::isnan(y)))) return false;
        }
        return true;
    }
};

// True when every field is present, finite and inside the column bounds.
inline bool fields_valid(const ScadaRecord& r) {
    for (std::size_t i = 0; i < kRawColumnCount; ++i)
        if (!std::isfinite(r.values[i]) || !in_bounds(i, r.values[i])) return false;
    return true;
}

// Fills column `wind_direction_mean` with the mean wind direction over the
// records of the preceding 25 seconds (inclusive of the current one).
inline void derive_wind_direction_mean(std::vector<ScadaRecord>& records, std::int64_t window_seconds = 25) {
    std::deque<std::size_t> window;
    for (std::size_t i = 0; i < records.size(); ++i) {
        window.push_back(i);
        while (records[window.front()].timestamp <= records[i].timestamp - window_seconds) window.pop_front();
        const double v = records[i].values[wind_direction];
        double s = 0.0;
        std::size_t finite = 0;
        for (std::size_t j : window) {
            const double w = records[j].values[wind_direction];
            if (std::isfinite(w)) {
                s += w;
                ++finite;
            }
        }
        records[i].values[wind_direction_mean] =
            std::isfinite(v) ? s / static_cast<double>(finite) : std::numeric_limits<double>::quiet_NaN();
    }
}

namespace csv {

inline std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i)
        if (i == line.size() || line[i] == ',') {
            out.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

// Parses a number; empty or malformed text yields NaN.
inline double parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) return std::numeric_limits<double>::quiet_NaN();
    return v;
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
    s = trim(s);
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return !s.empty() && ec == std::errc() && p == s.data() + s.size();
}

// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "";
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

}  // namespace csv

struct IngestReport {
    std::size_t rows = 0;
    std::size_t invalid = 0;
    bool derived_wind_direction_mean = false;
};

// Reads the canonical raw CSV: header with `timestamp`, the required SCADA
// columns and `label`; optional `id` and `wind_direction_mean`; other columns
// are ignored. Rows with missing, malformed or out-of-range fields are kept
// and labelled invalid.
inline std::vector<ScadaRecord> ingest_scada(std::istream& in, IngestReport* report = nullptr) {
    std::string line;
    if (!std::getline(in, line)) throw IngestError("empty SCADA file (no header)");
    const auto header = csv::split(line);
    std::map<std::string, std::size_t, std::less<>> pos;
    for (std::size_t i = 0; i < header.size(); ++i) pos[std::string(csv::trim(header[i]))] = i;
    auto find = [&](std::string_view name) -> std::ptrdiff_t {
        auto it = pos.find(name);
        return it == pos.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
    };
    for (std::string_view m : {std::string_view("timestamp"), std::string_view("label")})
        if (find(m) < 0) throw IngestError("missing mandatory column '" + std::string(m) + "'");
    std::array<std::ptrdiff_t, kRawColumnCount> col{};
    for (std::size_t c = 0; c < kRawColumnCount; ++c) {
        col[c] = find(kRawColumns[c].name);
        if (col[c] < 0 && kRawColumns[c].required)
            throw IngestError("missing mandatory column '" + std::string(kRawColumns[c].name) + "'");
    }
    const std::ptrdiff_t ts_col = find("timestamp"), label_col = find("label"), id_col = find("id");
    const bool derive = col[wind_direction_mean] < 0;

    std::vector<ScadaRecord> out;
    std::vector<bool> malformed;
    std::uint64_t row = 0;
    std::int64_t last_ts = std::numeric_limits<std::int64_t>::min();
    while (std::getline(in, line)) {
        if (csv::trim(line).empty()) continue;
        const auto f = csv::split(line);
        auto field = [&](std::ptrdiff_t c) { return c >= 0 && static_cast<std::size_t>(c) < f.size() ? f[c] : std::string_view(); };
        ScadaRecord r;
        bool bad = f.size() != header.size();
        r.id = row;
        if (id_col >= 0 && !csv::parse_int(field(id_col), r.id)) bad = true;
        if (!csv::parse_int(field(ts_col), r.timestamp)) bad = true;
        else {
            if (r.timestamp < last_ts)
                throw IngestError("timestamps must not decrease (row " + std::to_string(row + 2) + ")");
            last_ts = r.timestamp;
        }
        for (std::size_t c = 0; c < kRawColumnCount; ++c)
            r.values[c] = col[c] >= 0 ? csv::parse_double(field(col[c])) : std::numeric_limits<double>::quiet_NaN();
        int code = 0;
        if (!csv::parse_int(field(label_col), code) || code < -1 || code > 1) bad = true;
        r.label = code == 0 ? Label::normal : code == 1 ? Label::icing : Label::unlabeled;
        out.push_back(r);
        malformed.push_back(bad);
        ++row;
    }
    if (derive) derive_wind_direction_mean(out);
    IngestReport rep;
    rep.rows = out.size();
    rep.derived_wind_direction_mean = derive;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (malformed[i] || !fields_valid(out[i])) {
            out[i].label = Label::invalid;
            ++rep.invalid;
        }
    if (report) *report = rep;
    return out;
}

inline std::vector<ScadaRecord> ingest_scada(const std::string& path, IngestReport* report = nullptr) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open " + path);
    return ingest_scada(in, report);
}

// Writes the canonical raw CSV (id, timestamp, 26 columns, label). Missing
// values are written as empty fields; invalid records get label -1.
inline void write_scada(std::ostream& os, const std::vector<ScadaRecord>& records) {
    os << "id,timestamp";
    for (const RawColumn& c : kRawColumns) os << "," << c.name;
    os << ",label\n";
    for (const ScadaRecord& r : records) {
        os << r.id << "," << r.timestamp;
        for (double v : r.values) os << "," << csv::format_double(v);
        os << "," << label_code(r.label) << "\n";
    }
}

inline void write_scada(const std::string& path, const std::vector<ScadaRecord>& records) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IngestError("cannot write " + path);
    write_scada(os, records);
}

}  // namespace icegan::data
