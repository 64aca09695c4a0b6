#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace icegan {

// Invalid configuration or architecture (bad shapes, out-of-range hyper-parameters).
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// API misuse: calling an operation outside its precondition.
struct UsageError : std::logic_error {
    using std::logic_error::logic_error;
};

// Non-finite or otherwise malformed input values.
struct InputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct IngestError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A loss or gradient became non-finite during training.
struct DivergenceError : std::runtime_error {
    DivergenceError(const std::string& what, std::string last_finite)
        : std::runtime_error(what), last_finite_losses(std::move(last_finite)) {}
    std::string last_finite_losses;
};

struct ChecksumError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace icegan
