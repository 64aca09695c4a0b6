#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "icegan/diffnet/tape.hpp"

namespace icegan {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// First/second moments per parameter element, aligned with the parameter
// list the state was created for.
template <typename T>
struct AdamState {
    AdamConfig config;
    std::uint64_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

    AdamState() = default;
    AdamState(std::span<Parameter<T>* const> params, AdamConfig cfg) : config(cfg) {
        for (const Parameter<T>* p : params) {
            m.emplace_back(p->value.size(), 0.0);
            v.emplace_back(p->value.size(), 0.0);
        }
    }
};

// One bias-corrected Adam update using each parameter's accumulated grad.
// A missing grad counts as zero. If any gradient is non-finite nothing is
// modified and DivergenceError is thrown.
template <typename T>
void adam_step(std::span<Parameter<T>* const> params, AdamState<T>& state) {
    if (params.size() != state.m.size()) throw UsageError("adam_step: parameter list does not match state");
    for (std::size_t k = 0; k < params.size(); ++k) {
        const Parameter<T>& p = *params[k];
        if (p.grad.empty()) continue;
        if (p.grad.size() != p.value.size() || p.value.size() != state.m[k].size())
            throw UsageError("adam_step: gradient of " + p.name + " misaligned with parameter");
        if (!p.grad.all_finite()) throw DivergenceError("non-finite gradient for " + p.name, "");
    }
    state.step += 1;
    const AdamConfig& c = state.config;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(c.beta1, t);
    const double correction2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        Parameter<T>& p = *params[k];
        auto& m = state.m[k];
        auto& v = state.v[k];
        const bool has_grad = !p.grad.empty();
        for (std::size_t i = 0; i < m.size(); ++i) {
            const double g = has_grad ? static_cast<double>(p.grad[i]) : 0.0;
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            p.value[i] = static_cast<T>(static_cast<double>(p.value[i]) -
                                        c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon));
        }
    }
}

// Owns a parameter list plus its Adam state.
template <typename T>
class Adam {
public:
    Adam(std::vector<Parameter<T>*> params, AdamConfig cfg) : params_(std::move(params)), state_(params_, cfg) {}

    void zero_grad() {
        for (Parameter<T>* p : params_) p->zero_grad();
    }
    void step() { adam_step<T>(params_, state_); }

    const AdamState<T>& state() const { return state_; }
    const std::vector<Parameter<T>*>& params() const { return params_; }

private:
    std::vector<Parameter<T>*> params_;
    AdamState<T> state_;
};

}  // namespace icegan
