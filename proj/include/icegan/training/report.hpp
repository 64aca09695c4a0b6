#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "icegan/errors.hpp"

namespace icegan {

// Per-epoch loss values. Each series is keyed "<stage>/<loss>", e.g.
// "gan_normal/L_con" or "pgant.head/L_md".
class LossReport {
public:
    struct Row {
        std::string series;
        std::size_t epoch;
        double value;
    };

    void record(const std::string& stage, std::size_t epoch, const std::string& loss, double value) {
        const std::string key = stage + "/" + loss;
        if (!std::isfinite(value)) throw DivergenceError("non-finite " + key + " at epoch " + std::to_string(epoch), last_finite());
        auto it = last_epoch_.find(key);
        if (it != last_epoch_.end() && epoch <= it->second)
            throw UsageError("loss report epochs must increase for " + key);
        last_epoch_[key] = epoch;
        rows_.push_back({key, epoch, value});
    }

    void merge(const LossReport& other) {
        for (const Row& r : other.rows_) {
            last_epoch_[r.series] = r.epoch;
            rows_.push_back(r);
        }
    }

    const std::vector<Row>& rows() const { return rows_; }

    std::vector<double> series(const std::string& stage, const std::string& loss) const {
        std::vector<double> out;
        const std::string key = stage + "/" + loss;
        for (const Row& r : rows_)
            if (r.series == key) out.push_back(r.value);
        return out;
    }

    bool has(const std::string& stage, const std::string& loss) const { return !series(stage, loss).empty(); }

    // "series=value" list of the latest value of every series of a stage (all
    // stages when empty), for divergence reports.
    std::string last_finite(const std::string& stage = {}) const {
        std::map<std::string, double> latest;
        const std::string prefix = stage.empty() ? std::string() : stage + "/";
        for (const Row& r : rows_)
            if (r.series.rfind(prefix, 0) == 0) latest[r.series] = r.value;
        std::ostringstream os;
        bool first = true;
        for (const auto& [k, v] : latest) {
            os << (first ? "" : " ") << k << "=" << format(v);
            first = false;
        }
        return os.str();
    }

    void write_csv(std::ostream& os) const {
        os << "epoch,loss,value\n";
        for (const Row& r : rows_) os << r.epoch << "," << r.series << "," << format(r.value) << "\n";
    }

    static std::string format(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }

private:
    std::vector<Row> rows_;
    std::map<std::string, std::size_t> last_epoch_;
};

// Stops after `patience` epochs without improving the best value by more
// than min_delta. patience == 0 disables stopping.
class EarlyStopping {
public:
    EarlyStopping(std::size_t patience, double min_delta) : patience_(patience), min_delta_(min_delta) {}

    bool should_stop(double value) {
        if (value < best_ - min_delta_) {
            best_ = value;
            stale_ = 0;
            return false;
        }
        ++stale_;
        return patience_ > 0 && stale_ >= patience_;
    }

    double best() const { return best_; }

private:
    std::size_t patience_;
    double min_delta_;
    double best_ = std::numeric_limits<double>::infinity();
    std::size_t stale_ = 0;
};

}  // namespace icegan
