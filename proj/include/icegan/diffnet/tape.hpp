#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "icegan/diffnet/tensor.hpp"

namespace icegan {

// Parameter partition used by the transfer update rule: the GAN feature
// extractor, the CNN feature extractor, and the classifier each receive a
// different combination of loss gradients.
enum class ParamGroup : std::uint8_t { gan_feature, cnn_feature, classifier };

inline const char* to_string(ParamGroup g) {
    switch (g) {
        case ParamGroup::gan_feature: return "gan_feature";
        case ParamGroup::cnn_feature: return "cnn_feature";
        case ParamGroup::classifier: return "classifier";
    }
    return "?";
}

template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
    ParamGroup group = ParamGroup::classifier;

    void zero_grad() {
        if (grad.shape() != value.shape()) grad = Tensor<T>(value.shape());
        else grad.fill(T{});
    }
};

// Handle to a node on a Tape.
struct Var {
    std::size_t id = 0;
    std::uint64_t tape = 0;
};

// Reverse-mode record of executed operations. Every op appends a node that
// owns its forward value and a closure mapping the node's output gradient to
// its inputs' gradients.
template <typename T>
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, std::size_t self)>;
    using Sink = std::function<bool(const Parameter<T>&)>;

    Tape() : uid_(next_uid()) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor<T> value) {
        nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
        return Var{nodes_.size() - 1, uid_};
    }

    // Frozen parameters enter the tape as constants.
    Var parameter(Parameter<T>& p, bool trainable = true) {
        nodes_.push_back(Node{p.value, {}, {}, trainable ? &p : nullptr, trainable});
        return Var{nodes_.size() - 1, uid_};
    }

    // `fn` is only stored when at least one input needs a gradient.
    Var record(Tensor<T> value, std::span<const Var> inputs, BackwardFn fn) {
        bool needs = false;
        for (const Var& v : inputs) {
            check(v);
            needs = needs || nodes_[v.id].needs_grad;
        }
        nodes_.push_back(Node{std::move(value), {}, needs ? std::move(fn) : BackwardFn{}, nullptr, needs});
        return Var{nodes_.size() - 1, uid_};
    }
    Var record(Tensor<T> value, std::initializer_list<Var> inputs, BackwardFn fn) {
        return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(fn));
    }

    const Tensor<T>& value(Var v) const {
        check(v);
        return nodes_[v.id].value;
    }
    const Tensor<T>& value(std::size_t id) const { return nodes_[id].value; }
    const Tensor<T>& grad(std::size_t id) const { return nodes_[id].grad; }

    bool needs_grad(Var v) const {
        check(v);
        return nodes_[v.id].needs_grad;
    }

    // Gradient accumulator of an input node, or nullptr when the node is
    // constant (no gradient needed).
    Tensor<T>* grad_target(std::size_t id) {
        Node& n = nodes_[id];
        if (!n.needs_grad) return nullptr;
        if (n.grad.shape() != n.value.shape()) n.grad = Tensor<T>(n.value.shape());
        return &n.grad;
    }

    bool owns(Var v) const { return v.tape == uid_ && v.id < nodes_.size(); }
    std::size_t size() const { return nodes_.size(); }

    // Accumulates seed * d(loss)/d(theta) into Parameter::grad for every
    // trainable parameter reached from `loss` that passes `sink`. Gradient
    // still flows *through* parameters rejected by the sink. Returns the
    // parameters that received a contribution.
    std::vector<Parameter<T>*> backward(Var loss, const Sink& sink = {}, T seed = T(1)) {
        if (!owns(loss)) throw UsageError("backward: loss was not produced on this tape");
        if (nodes_[loss.id].value.size() != 1)
            throw UsageError("backward: loss must be a scalar, got shape " +
                             nodes_[loss.id].value.shape().str());
        for (Node& n : nodes_) n.grad = Tensor<T>();
        std::vector<Parameter<T>*> touched;
        if (!nodes_[loss.id].needs_grad) return touched;

        nodes_[loss.id].grad = Tensor<T>(nodes_[loss.id].value.shape(), seed);
        for (std::size_t i = loss.id + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (n.grad.empty()) continue;
            if (n.backward) n.backward(*this, i);
        }
        for (Node& n : nodes_) {
            if (!n.param || n.grad.empty()) continue;
            if (sink && !sink(*n.param)) continue;
            if (n.param->grad.shape() != n.param->value.shape()) n.param->zero_grad();
            n.param->grad += n.grad;
            touched.push_back(n.param);
        }
        return touched;
    }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        BackwardFn backward;
        Parameter<T>* param = nullptr;
        bool needs_grad = false;
    };

    static std::uint64_t next_uid() {
        static std::atomic<std::uint64_t> counter{1};
        return counter.fetch_add(1);
    }

    void check(Var v) const {
        if (!owns(v)) throw UsageError("variable does not belong to this tape");
    }

    std::uint64_t uid_;
    std::vector<Node> nodes_;
};

}  // namespace icegan
