#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "icegan/diffnet/tape.hpp"

// Differentiable operations recorded on a Tape. Every op validates shapes,
// computes its forward value eagerly and registers a backward closure.

namespace icegan::ops {

struct Stride2 {
    std::size_t rows = 1;
    std::size_t cols = 1;
};

namespace detail {

template <typename T>
Tensor<T> scalar_tensor(T v) {
    return Tensor<T>(Shape{1, 1, 1, 1}, v);
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ConfigError(msg);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Convolutions (cross-correlation, no kernel flip)

// x: N×C×H×W, weight: F×C×KH×KW, bias: 1×1×1×F.
template <typename T>
Var conv2d(Tape<T>& tape, Var x, Var weight, Var bias, Stride2 stride) {
    const Tensor<T>& xv = tape.value(x);
    const Tensor<T>& wv = tape.value(weight);
    const Shape xs = xv.shape();
    const Shape ws = wv.shape();
    const std::size_t filters = ws.batch, kh = ws.rows, kw = ws.cols;
    detail::require(stride.rows > 0 && stride.cols > 0, "conv2d: stride must be positive");
    detail::require(ws.channels == xs.channels,
                    "conv2d: input " + xs.sample_str() + " has " + std::to_string(xs.channels) +
                        " channels but weights " + ws.str() + " expect " + std::to_string(ws.channels));
    detail::require(xs.rows >= kh && xs.cols >= kw,
                    "conv2d: input " + xs.sample_str() + " smaller than kernel " + std::to_string(kh) +
                        "x" + std::to_string(kw));
    detail::require(tape.value(bias).size() == filters,
                    "conv2d: bias length " + std::to_string(tape.value(bias).size()) + " != filters " +
                        std::to_string(filters));

    const std::size_t oh = (xs.rows - kh) / stride.rows + 1;
    const std::size_t ow = (xs.cols - kw) / stride.cols + 1;
    Tensor<T> out(Shape{xs.batch, filters, oh, ow});
    const Tensor<T>& bv = tape.value(bias);
    for (std::size_t n = 0; n < xs.batch; ++n)
        for (std::size_t f = 0; f < filters; ++f)
            for (std::size_t r = 0; r < oh; ++r)
                for (std::size_t c = 0; c < ow; ++c) {
                    T acc = bv[f];
                    for (std::size_t ch = 0; ch < xs.channels; ++ch)
                        for (std::size_t i = 0; i < kh; ++i) {
                            const T* xrow = &xv.at(n, ch, r * stride.rows + i, c * stride.cols);
                            const T* wrow = &wv.at(f, ch, i, 0);
                            for (std::size_t j = 0; j < kw; ++j) acc += xrow[j] * wrow[j];
                        }
                    out.at(n, f, r, c) = acc;
                }

    const std::size_t xi = x.id, wi = weight.id, bi = bias.id;
    return tape.record(std::move(out), {x, weight, bias}, [xi, wi, bi, stride](Tape<T>& t, std::size_t self) {
        const Tensor<T>& g = t.grad(self);
        const Tensor<T>& xv = t.value(xi);
        const Tensor<T>& wv = t.value(wi);
        Tensor<T>* gx = t.grad_target(xi);
        Tensor<T>* gw = t.grad_target(wi);
        Tensor<T>* gb = t.grad_target(bi);
        const Shape gs = g.shape();
        const Shape ws = wv.shape();
        for (std::size_t n = 0; n < gs.batch; ++n)
            for (std::size_t f = 0; f < gs.channels; ++f)
                for (std::size_t r = 0; r < gs.rows; ++r)
                    for (std::size_t c = 0; c < gs.cols; ++c) {
                        const T go = g.at(n, f, r, c);
                        if (gb) (*gb)[f] += go;
                        for (std::size_t ch = 0; ch < ws.channels; ++ch)
                            for (std::size_t i = 0; i < ws.rows; ++i) {
                                const std::size_t xr = r * stride.rows + i, xc = c * stride.cols;
                                if (gx) {
                                    T* dst = &gx->at(n, ch, xr, xc);
                                    const T* wrow = &wv.at(f, ch, i, 0);
                                    for (std::size_t j = 0; j < ws.cols; ++j) dst[j] += go * wrow[j];
                                }
                                if (gw) {
                                    T* dst = &gw->at(f, ch, i, 0);
                                    const T* xrow = &xv.at(n, ch, xr, xc);
                                    for (std::size_t j = 0; j < ws.cols; ++j) dst[j] += go * xrow[j];
                                }
                            }
                    }
    });
}

// Convolution along cols of single-row inputs. x: N×C×1×W, weight: F×C×1×K.
template <typename T>
Var conv1d(Tape<T>& tape, Var x, Var weight, Var bias, std::size_t stride) {
    const Shape xs = tape.value(x).shape();
    const Shape ws = tape.value(weight).shape();
    detail::require(xs.rows == 1, "conv1d: expected single-row input, got " + xs.sample_str());
    detail::require(ws.rows == 1, "conv1d: expected 1-row kernel, got weights " + ws.str());
    return conv2d(tape, x, weight, bias, Stride2{1, stride});
}

// Transposed 1-D convolution, the adjoint of conv1d with shared weights.
// x: N×Cin×1×W, weight: Cin×Cout×1×K, output N×Cout×1×((W-1)·stride + K).
template <typename T>
Var conv_transpose1d(Tape<T>& tape, Var x, Var weight, Var bias, std::size_t stride) {
    const Tensor<T>& xv = tape.value(x);
    const Tensor<T>& wv = tape.value(weight);
    const Tensor<T>& bv = tape.value(bias);
    const Shape xs = xv.shape();
    const Shape ws = wv.shape();
    detail::require(stride > 0, "conv_transpose1d: stride must be positive");
    detail::require(xs.rows == 1 && ws.rows == 1,
                    "conv_transpose1d: expected single-row input/kernel, got " + xs.sample_str() + " and " +
                        ws.str());
    detail::require(ws.batch == xs.channels,
                    "conv_transpose1d: input " + xs.sample_str() + " vs weights " + ws.str());
    const std::size_t cout = ws.channels, k = ws.cols;
    detail::require(bv.size() == cout, "conv_transpose1d: bias length mismatch");
    const std::size_t ow = (xs.cols - 1) * stride + k;

    Tensor<T> out(Shape{xs.batch, cout, 1, ow});
    for (std::size_t n = 0; n < xs.batch; ++n) {
        for (std::size_t o = 0; o < cout; ++o) {
            T* dst = &out.at(n, o, 0, 0);
            for (std::size_t c = 0; c < ow; ++c) dst[c] = bv[o];
            for (std::size_t ci = 0; ci < xs.channels; ++ci) {
                const T* wrow = &wv.at(ci, o, 0, 0);
                const T* xrow = &xv.at(n, ci, 0, 0);
                for (std::size_t i = 0; i < xs.cols; ++i) {
                    const T xval = xrow[i];
                    T* d = dst + i * stride;
                    for (std::size_t j = 0; j < k; ++j) d[j] += xval * wrow[j];
                }
            }
        }
    }

    const std::size_t xi = x.id, wi = weight.id, bi = bias.id;
    return tape.record(std::move(out), {x, weight, bias}, [xi, wi, bi, stride](Tape<T>& t, std::size_t self) {
        const Tensor<T>& g = t.grad(self);
        const Tensor<T>& xv = t.value(xi);
        const Tensor<T>& wv = t.value(wi);
        Tensor<T>* gx = t.grad_target(xi);
        Tensor<T>* gw = t.grad_target(wi);
        Tensor<T>* gb = t.grad_target(bi);
        const Shape xs = xv.shape();
        const Shape ws = wv.shape();
        for (std::size_t n = 0; n < xs.batch; ++n)
            for (std::size_t o = 0; o < ws.channels; ++o) {
                const T* grow = &g.at(n, o, 0, 0);
                if (gb)
                    for (std::size_t c = 0; c < g.shape().cols; ++c) (*gb)[o] += grow[c];
                for (std::size_t ci = 0; ci < xs.channels; ++ci) {
                    const T* wrow = &wv.at(ci, o, 0, 0);
                    const T* xrow = &xv.at(n, ci, 0, 0);
                    for (std::size_t i = 0; i < xs.cols; ++i) {
                        const T* gg = grow + i * stride;
                        if (gx) {
                            T acc{};
                            for (std::size_t j = 0; j < ws.cols; ++j) acc += gg[j] * wrow[j];
                            gx->at(n, ci, 0, i) += acc;
                        }
                        if (gw) {
                            T* dw = &gw->at(ci, o, 0, 0);
                            const T xval = xrow[i];
                            for (std::size_t j = 0; j < ws.cols; ++j) dw[j] += xval * gg[j];
                        }
                    }
                }
            }
    });
}

// ---------------------------------------------------------------------------
// Dense

// Affine map W·flatten(x) + b. weight: 1×1×out×in, bias: 1×1×1×out.
// Output: N×1×1×out.
template <typename T>
Var fully_connected(Tape<T>& tape, Var x, Var weight, Var bias) {
    const Tensor<T>& xv = tape.value(x);
    const Tensor<T>& wv = tape.value(weight);
    const Tensor<T>& bv = tape.value(bias);
    const std::size_t in = wv.shape().cols, out_len = wv.shape().rows;
    detail::require(xv.shape().sample_size() == in,
                    "fully_connected: flattened input length " + std::to_string(xv.shape().sample_size()) +
                        " (" + xv.shape().sample_str() + ") != weight columns " + std::to_string(in));
    detail::require(bv.size() == out_len, "fully_connected: bias length mismatch");
    const std::size_t batch = xv.shape().batch;
    Tensor<T> out(Shape{batch, 1, 1, out_len});
    for (std::size_t n = 0; n < batch; ++n) {
        const T* xs = xv.sample(n).data();
        for (std::size_t o = 0; o < out_len; ++o) {
            const T* w = &wv[o * in];
            T acc = bv[o];
            for (std::size_t i = 0; i < in; ++i) acc += w[i] * xs[i];
            out[n * out_len + o] = acc;
        }
    }
    const std::size_t xi = x.id, wi = weight.id, bi = bias.id;
    return tape.record(std::move(out), {x, weight, bias}, [xi, wi, bi, in, out_len](Tape<T>& t, std::size_t self) {
        const Tensor<T>& g = t.grad(self);
        const Tensor<T>& xv = t.value(xi);
        const Tensor<T>& wv = t.value(wi);
        Tensor<T>* gx = t.grad_target(xi);
        Tensor<T>* gw = t.grad_target(wi);
        Tensor<T>* gb = t.grad_target(bi);
        const std::size_t batch = xv.shape().batch;
        for (std::size_t n = 0; n < batch; ++n) {
            const T* xs = xv.sample(n).data();
            for (std::size_t o = 0; o < out_len; ++o) {
                const T go = g[n * out_len + o];
                if (gb) (*gb)[o] += go;
                if (gw) {
                    T* dw = &(*gw)[o * in];
                    for (std::size_t i = 0; i < in; ++i) dw[i] += go * xs[i];
                }
                if (gx) {
                    T* dx = gx->sample(n).data();
                    const T* w = &wv[o * in];
                    for (std::size_t i = 0; i < in; ++i) dx[i] += go * w[i];
                }
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Activations

template <typename T>
Var leaky_relu(Tape<T>& tape, Var x, T slope = T(0.01)) {
    const Tensor<T>& xv = tape.value(x);
    Tensor<T> out(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] >= T(0) ? xv[i] : slope * xv[i];
    const std::size_t xi = x.id;
    return tape.record(std::move(out), {x}, [xi, slope](Tape<T>& t, std::size_t self) {
        const Tensor<T>& g = t.grad(self);
        const Tensor<T>& xv = t.value(xi);
        Tensor<T>* gx = t.grad_target(xi);
        for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += xv[i] >= T(0) ? g[i] : slope * g[i];
    });
}

template <typename T>
Var tanh(Tape<T>& tape, Var x) {
    const Tensor<T>& xv = tape.value(x);
    Tensor<T> out(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = std::tanh(xv[i]);
    const std::size_t xi = x.id;
    return tape.record(std::move(out), {x}, [xi](Tape<T>& t, std::size_t self) {
        const Tensor<T>& g = t.grad(self);
        const Tensor<T>& y = t.value(self);
        Tensor<T>* gx = t.grad_target(xi);
        for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * (T(1) - y[i] * y[i]);
    });
}

template <typename T>
T sigmoid_value(T z) {
    if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
    const T e = std::exp(z);
    return e / (T(1) + e);
}

template <typename T>
Var sigmoid(Tape<T>& tape, Var x) {
    const Tensor<T>& xv = tape.value(x);
    Tensor<T> out(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = sigmoid_value(xv[i]);
    const std::size_t xi = x.id;
    return tape.record(std::move(out), {x}, [xi](Tape<T>& t, std::size_t self) {
        const Tensor<T>& g = t.grad(self);
        const Tensor<T>& y = t.value(self);
        Tensor<T>* gx = t.grad_target(xi);
        for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * y[i] * (T(1) - y[i]);
    });
}

// Softmax over each sample's flattened values.
template <typename T>
Var softmax(Tape<T>& tape, Var x) {
    const Tensor<T>& xv = tape.value(x);
    Tensor<T> out(xv.shape());
    for (std::size_t n = 0; n < xv.shape().batch; ++n) {
        auto in = xv.sample(n);
        auto o = out.sample(n);
        T mx = in[0];
        for (T v : in) mx = std::max(mx, v);
        T sum{};
        for (std::size_t i = 0; i < in.size(); ++i) sum += (o[i] = std::exp(in[i] - mx));
        for (T& v : o) v /= sum;
    }
    const std::size_t xi = x.id;
    return tape.record(std::move(out), {x}, [xi](Tape<T>& t, std::size_t self) {
        const Tensor<T>& g = t.grad(self);
        const Tensor<T>& y = t.value(self);
        Tensor<T>* gx = t.grad_target(xi);
        for (std::size_t n = 0; n < y.shape().batch; ++n) {
            auto gy = g.sample(n);
            auto yy = y.sample(n);
            auto dx = gx->sample(n);
            T dot{};
            for (std::size_t i = 0; i < yy.size(); ++i) dot += gy[i] * yy[i];
            for (std::size_t i = 0; i < yy.size(); ++i) dx[i] += yy[i] * (gy[i] - dot);
        }
    });
}

// ---------------------------------------------------------------------------
// Batch normalization

enum class Mode { train, eval };

struct BatchNormOptions {
    double epsilon = 1e-5;
    double momentum = 0.1;
    // Train-mode batch statistics are still used when false; only the
    // running-stat update is skipped.
    bool update_running_stats = true;
};

// Per-channel normalization over (batch, rows, cols). gamma/beta: 1×1×1×C.
// running_mean / running_var are updated in place in train mode.
template <typename T>
Var batchnorm(Tape<T>& tape, Var x, Var gamma, Var beta, Tensor<T>& running_mean, Tensor<T>& running_var,
              Mode mode, const BatchNormOptions& opt = {}) {
    const Tensor<T>& xv = tape.value(x);
    const Tensor<T>& gv = tape.value(gamma);
    const Tensor<T>& bv = tape.value(beta);
    const Shape s = xv.shape();
    detail::require(gv.size() == s.channels && bv.size() == s.channels,
                    "batchnorm: affine length " + std::to_string(gv.size()) + " != channels " +
                        std::to_string(s.channels));
    detail::require(running_mean.size() == s.channels && running_var.size() == s.channels,
                    "batchnorm: running statistics do not match channel count");
    if (mode == Mode::train && s.batch < 2)
        throw UsageError("batchnorm: train mode needs a batch of at least 2 samples (variance undefined)");

    const std::size_t per = s.rows * s.cols;
    const std::size_t count = s.batch * per;
    std::vector<T> mean(s.channels), inv_std(s.channels);
    for (std::size_t c = 0; c < s.channels; ++c) {
        if (mode == Mode::train) {
            double m = 0.0;
            bool constant = true;
            const T first = xv.at(0, c, 0, 0);
            for (std::size_t n = 0; n < s.batch; ++n) {
                const T* p = &xv.at(n, c, 0, 0);
                for (std::size_t i = 0; i < per; ++i) {
                    m += p[i];
                    constant = constant && p[i] == first;
                }
            }
            m = constant ? static_cast<double>(first) : m / static_cast<double>(count);
            double v = 0.0;
            for (std::size_t n = 0; n < s.batch; ++n) {
                const T* p = &xv.at(n, c, 0, 0);
                for (std::size_t i = 0; i < per; ++i) v += (p[i] - m) * (p[i] - m);
            }
            v /= static_cast<double>(count);
            mean[c] = static_cast<T>(m);
            inv_std[c] = static_cast<T>(1.0 / std::sqrt(v + opt.epsilon));
            if (opt.update_running_stats) {
                const double unbiased = count > 1 ? v * static_cast<double>(count) / (count - 1) : v;
                running_mean[c] = static_cast<T>((1.0 - opt.momentum) * running_mean[c] + opt.momentum * m);
                running_var[c] = static_cast<T>((1.0 - opt.momentum) * running_var[c] + opt.momentum * unbiased);
            }
        } else {
            mean[c] = running_mean[c];
            inv_std[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var[c]) + opt.epsilon));
        }
    }

    Tensor<T> out(s);
    for (std::size_t n = 0; n < s.batch; ++n)
        for (std::size_t c = 0; c < s.channels; ++c) {
            const T* p = &xv.at(n, c, 0, 0);
            T* o = &out.at(n, c, 0, 0);
            for (std::size_t i = 0; i < per; ++i) o[i] = gv[c] * (p[i] - mean[c]) * inv_std[c] + bv[c];
        }

    const std::size_t xi = x.id, gi = gamma.id, bi = beta.id;
    const bool train = mode == Mode::train;
    return tape.record(std::move(out), {x, gamma, beta},
                       [xi, gi, bi, mean, inv_std, train](Tape<T>& t, std::size_t self) {
                           const Tensor<T>& g = t.grad(self);
                           const Tensor<T>& xv = t.value(xi);
                           const Tensor<T>& gv = t.value(gi);
                           Tensor<T>* gx = t.grad_target(xi);
                           Tensor<T>* gg = t.grad_target(gi);
                           Tensor<T>* gb = t.grad_target(bi);
                           const Shape s = xv.shape();
                           const std::size_t per = s.rows * s.cols;
                           const T count = static_cast<T>(s.batch * per);
                           for (std::size_t c = 0; c < s.channels; ++c) {
                               T sum_g{}, sum_gx{};
                               for (std::size_t n = 0; n < s.batch; ++n) {
                                   const T* gp = &g.at(n, c, 0, 0);
                                   const T* xp = &xv.at(n, c, 0, 0);
                                   for (std::size_t i = 0; i < per; ++i) {
                                       sum_g += gp[i];
                                       sum_gx += gp[i] * (xp[i] - mean[c]) * inv_std[c];
                                   }
                               }
                               if (gg) (*gg)[c] += sum_gx;
                               if (gb) (*gb)[c] += sum_g;
                               if (!gx) continue;
                               const T scale = gv[c] * inv_std[c];
                               for (std::size_t n = 0; n < s.batch; ++n) {
                                   const T* gp = &g.at(n, c, 0, 0);
                                   const T* xp = &xv.at(n, c, 0, 0);
                                   T* dx = &gx->at(n, c, 0, 0);
                                   for (std::size_t i = 0; i < per; ++i) {
                                       if (train) {
                                           const T xhat = (xp[i] - mean[c]) * inv_std[c];
                                           dx[i] += scale * (gp[i] - sum_g / count - xhat * sum_gx / count);
                                       } else {
                                           dx[i] += scale * gp[i];
                                       }
                                   }
                               }
                           }
                       });
}

// ---------------------------------------------------------------------------
// Structural ops

template <typename T>
Var add(Tape<T>& tape, Var a, Var b) {
    const Tensor<T>& av = tape.value(a);
    const Tensor<T>& bv = tape.value(b);
    detail::require(av.shape() == bv.shape(), "add: shape " + av.shape().str() + " vs " + bv.shape().str());
    Tensor<T> out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
    const std::size_t ai = a.id, bi = b.id;
    return tape.record(std::move(out), {a, b}, [ai, bi](Tape<T>& t, std::size_t self) {
        const Tensor<T>& g = t.grad(self);
        if (Tensor<T>* ga = t.grad_target(ai)) *ga += g;
        if (Tensor<T>* gb = t.grad_target(bi)) *gb += g;
    });
}

template <typename T>
Var sub(Tape<T>& tape, Var a, Var b) {
    const Tensor<T>& av = tape.value(a);
    const Tensor<T>& bv = tape.value(b);
    detail::require(av.shape() == bv.shape(), "sub: shape " + av.shape().str() + " vs " + bv.shape().str());
    Tensor<T> out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
    const std::size_t ai = a.id, bi = b.id;
    return tape.record(std::move(out), {a, b}, [ai, bi](Tape<T>& t, std::size_t self) {
        const Tensor<T>& g = t.grad(self);
        if (Tensor<T>* ga = t.grad_target(ai)) *ga += g;
        if (Tensor<T>* gb = t.grad_target(bi))
            for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
    });
}

template <typename T>
Var reshape(Tape<T>& tape, Var x, Shape shape) {
    Tensor<T> out = tape.value(x).reshaped(shape);
    const std::size_t xi = x.id;
    return tape.record(std::move(out), {x}, [xi](Tape<T>& t, std::size_t self) {
        const Tensor<T>& g = t.grad(self);
        Tensor<T>* gx = t.grad_target(xi);
        for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
    });
}

// N×C×H×W → N×1×1×(C·H·W)
template <typename T>
Var flatten(Tape<T>& tape, Var x) {
    const Shape s = tape.value(x).shape();
    return reshape(tape, x, Shape{s.batch, 1, 1, s.sample_size()});
}

// Stacks rows: a N×C×Ra×W and b N×C×Rb×W give N×C×(Ra+Rb)×W.
template <typename T>
Var concat_rows(Tape<T>& tape, Var a, Var b) {
    const Tensor<T>& av = tape.value(a);
    const Tensor<T>& bv = tape.value(b);
    const Shape as = av.shape(), bs = bv.shape();
    detail::require(as.batch == bs.batch && as.channels == bs.channels && as.cols == bs.cols,
                    "concat_rows: " + as.str() + " vs " + bs.str());
    Tensor<T> out(Shape{as.batch, as.channels, as.rows + bs.rows, as.cols});
    const std::size_t la = as.rows * as.cols, lb = bs.rows * bs.cols;
    for (std::size_t n = 0; n < as.batch; ++n)
        for (std::size_t c = 0; c < as.channels; ++c) {
            const T* pa = &av.at(n, c, 0, 0);
            const T* pb = &bv.at(n, c, 0, 0);
            T* o = &out.at(n, c, 0, 0);
            std::copy(pa, pa + la, o);
            std::copy(pb, pb + lb, o + la);
        }
    const std::size_t ai = a.id, bi = b.id;
    return tape.record(std::move(out), {a, b}, [ai, bi, la, lb](Tape<T>& t, std::size_t self) {
        const Tensor<T>& g = t.grad(self);
        Tensor<T>* ga = t.grad_target(ai);
        Tensor<T>* gb = t.grad_target(bi);
        const Shape s = g.shape();
        for (std::size_t n = 0; n < s.batch; ++n)
            for (std::size_t c = 0; c < s.channels; ++c) {
                const T* gp = &g.at(n, c, 0, 0);
                if (ga) {
                    T* d = &ga->at(n, c, 0, 0);
                    for (std::size_t i = 0; i < la; ++i) d[i] += gp[i];
                }
                if (gb) {
                    T* d = &gb->at(n, c, 0, 0);
                    for (std::size_t i = 0; i < lb; ++i) d[i] += gp[la + i];
                }
            }
    });
}

// Stacks samples along the batch axis.
template <typename T>
Var concat_batch(Tape<T>& tape, Var a, Var b) {
    const Tensor<T>& av = tape.value(a);
    const Tensor<T>& bv = tape.value(b);
    detail::require(av.shape().with_batch(1) == bv.shape().with_batch(1),
                    "concat_batch: " + av.shape().str() + " vs " + bv.shape().str());
    std::vector<T> data(av.storage());
    data.insert(data.end(), bv.storage().begin(), bv.storage().end());
    Tensor<T> out(av.shape().with_batch(av.shape().batch + bv.shape().batch), std::move(data));
    const std::size_t ai = a.id, bi = b.id, split = av.size();
    return tape.record(std::move(out), {a, b}, [ai, bi, split](Tape<T>& t, std::size_t self) {
        const Tensor<T>& g = t.grad(self);
        if (Tensor<T>* ga = t.grad_target(ai))
            for (std::size_t i = 0; i < split; ++i) (*ga)[i] += g[i];
        if (Tensor<T>* gb = t.grad_target(bi))
            for (std::size_t i = split; i < g.size(); ++i) (*gb)[i - split] += g[i];
    });
}

// Gathers the listed samples (in order) into a new batch.
template <typename T>
Var select_batch(Tape<T>& tape, Var x, std::vector<std::size_t> indices) {
    const Tensor<T>& xv = tape.value(x);
    const Shape s = xv.shape();
    const std::size_t len = s.sample_size();
    Tensor<T> out(s.with_batch(indices.size()));
    for (std::size_t k = 0; k < indices.size(); ++k) {
        if (indices[k] >= s.batch) throw UsageError("select_batch: index out of range");
        auto src = xv.sample(indices[k]);
        std::copy(src.begin(), src.end(), out.sample(k).begin());
    }
    const std::size_t xi = x.id;
    return tape.record(std::move(out), {x}, [xi, idx = std::move(indices), len](Tape<T>& t, std::size_t self) {
        const Tensor<T>& g = t.grad(self);
        Tensor<T>* gx = t.grad_target(xi);
        for (std::size_t k = 0; k < idx.size(); ++k)
            for (std::size_t i = 0; i < len; ++i) (*gx)[idx[k] * len + i] += g[k * len + i];
    });
}

// ---------------------------------------------------------------------------
// Reductions and scalar algebra. Scalars are 1×1×1×1 tensors.

template <typename T>
Var sum(Tape<T>& tape, Var x) {
    const Tensor<T>& xv = tape.value(x);
    T acc{};
    for (T v : xv.data()) acc += v;
    const std::size_t xi = x.id;
    return tape.record(detail::scalar_tensor(acc), {x}, [xi](Tape<T>& t, std::size_t self) {
        const T g = t.grad(self)[0];
        Tensor<T>* gx = t.grad_target(xi);
        for (T& v : gx->data()) v += g;
    });
}

// Σ coeffs[i]·terms[i] over scalar vars.
template <typename T>
Var weighted_sum(Tape<T>& tape, const std::vector<Var>& terms, const std::vector<T>& coeffs) {
    detail::require(terms.size() == coeffs.size() && !terms.empty(), "weighted_sum: term/coeff mismatch");
    T acc{};
    for (std::size_t i = 0; i < terms.size(); ++i) {
        detail::require(tape.value(terms[i]).size() == 1, "weighted_sum: terms must be scalars");
        acc += coeffs[i] * tape.value(terms[i])[0];
    }
    std::vector<std::size_t> ids;
    for (const Var& v : terms) ids.push_back(v.id);
    Var result = tape.record(detail::scalar_tensor(acc), std::span<const Var>(terms), [ids, coeffs](Tape<T>& t, std::size_t self) {
        const T g = t.grad(self)[0];
        for (std::size_t i = 0; i < ids.size(); ++i)
            if (Tensor<T>* gt = t.grad_target(ids[i])) (*gt)[0] += coeffs[i] * g;
    });
    return result;
}

}  // namespace icegan::ops
