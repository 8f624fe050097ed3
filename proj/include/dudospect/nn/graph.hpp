#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dudospect/nn/conv_kernels.hpp"
#include "dudospect/nn/tensor.hpp"
#include "dudospect/projector.hpp"

namespace dudospect::nn {

// Learnable tensor plus its accumulated gradient and Adam state.
template <class T>
struct Param {
    std::string name;
    TensorT<T> value;
    TensorT<T> grad;
    TensorT<T> adam_m, adam_v;

    void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), T(0)); }
};

template <class T>
class ParamStore {
public:
    int add(std::string name, TensorT<T> value) {
        Param<T> p;
        p.name = std::move(name);
        p.grad = TensorT<T>::zeros(value.shape);
        p.adam_m = TensorT<T>::zeros(value.shape);
        p.adam_v = TensorT<T>::zeros(value.shape);
        p.value = std::move(value);
        params_.push_back(std::move(p));
        return static_cast<int>(params_.size()) - 1;
    }
    Param<T>& at(int id) { return params_[static_cast<size_t>(id)]; }
    const Param<T>& at(int id) const { return params_[static_cast<size_t>(id)]; }
    size_t size() const { return params_.size(); }
    void zero_grads() {
        for (auto& p : params_) p.zero_grad();
    }
    std::vector<Param<T>>& all() { return params_; }
    const std::vector<Param<T>>& all() const { return params_; }

private:
    std::vector<Param<T>> params_;
};

using Var = int32_t;

// Single-pass computation tape. Build the forward graph with the op
// methods, then call backward(loss) once; gradients accumulate into node
// grads and can be harvested into the bound ParamStore. Everything is
// sequential and allocation-ordered, so repeated runs are bitwise equal.
template <class T>
class Graph {
public:
    explicit Graph(ParamStore<T>* store = nullptr) : store_(store) {}

    Var input(TensorT<T> value, bool requires_grad = false) {
        return push(std::move(value), requires_grad, {});
    }

    Var param(int param_id) {
        for (const auto& [id, var] : param_vars_)
            if (id == param_id) return var;
        Var v = push(TensorT<T>(store_->at(param_id).value), true, {});
        param_vars_.emplace_back(param_id, v);
        return v;
    }

    const TensorT<T>& value(Var v) const { return nodes_[static_cast<size_t>(v)].value; }
    TensorT<T>& grad(Var v) { return grad_ref(v); }
    bool has_grad(Var v) const { return !nodes_[static_cast<size_t>(v)].grad.data.empty(); }

    // ---- elementwise ----

    Var add(Var a, Var b) {
        check_same(a, b, "add");
        TensorT<T> out = value(a);
        const auto& bv = value(b).data;
        for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += bv[i];
        return push(std::move(out), needs(a) || needs(b), [a, b](Graph& g, Var self) {
            const auto& go = g.grad_of(self);
            if (g.needs(a)) g.axpy(a, T(1), go);
            if (g.needs(b)) g.axpy(b, T(1), go);
        });
    }

    Var sub(Var a, Var b) {
        check_same(a, b, "sub");
        TensorT<T> out = value(a);
        const auto& bv = value(b).data;
        for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= bv[i];
        return push(std::move(out), needs(a) || needs(b), [a, b](Graph& g, Var self) {
            const auto& go = g.grad_of(self);
            if (g.needs(a)) g.axpy(a, T(1), go);
            if (g.needs(b)) g.axpy(b, T(-1), go);
        });
    }

    Var mul(Var a, Var b) {
        check_same(a, b, "mul");
        TensorT<T> out = value(a);
        const auto& bv = value(b).data;
        for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= bv[i];
        return push(std::move(out), needs(a) || needs(b), [a, b](Graph& g, Var self) {
            const auto& go = g.grad_of(self);
            if (g.needs(a)) {
                auto& ga = g.grad_ref(a);
                const auto& bv = g.value(b).data;
                for (size_t i = 0; i < go.data.size(); ++i) ga.data[i] += go.data[i] * bv[i];
            }
            if (g.needs(b)) {
                auto& gb = g.grad_ref(b);
                const auto& av = g.value(a).data;
                for (size_t i = 0; i < go.data.size(); ++i) gb.data[i] += go.data[i] * av[i];
            }
        });
    }

    // y = alpha * x + beta
    Var affine(Var x, T alpha, T beta) {
        TensorT<T> out = value(x);
        for (auto& v : out.data) v = alpha * v + beta;
        return push(std::move(out), needs(x), [x, alpha](Graph& g, Var self) {
            if (!g.needs(x)) return;
            g.axpy(x, alpha, g.grad_of(self));
        });
    }

    Var scale(Var x, T alpha) { return affine(x, alpha, T(0)); }

    Var relu(Var x) {
        TensorT<T> out = value(x);
        for (auto& v : out.data) v = v > T(0) ? v : T(0);
        return push(std::move(out), needs(x), [x](Graph& g, Var self) {
            if (!g.needs(x)) return;
            const auto& go = g.grad_of(self);
            const auto& xv = g.value(x).data;
            auto& gx = g.grad_ref(x);
            for (size_t i = 0; i < go.data.size(); ++i)
                if (xv[i] > T(0)) gx.data[i] += go.data[i];
        });
    }

    Var sigmoid(Var x) {
        TensorT<T> out = value(x);
        for (auto& v : out.data) v = T(1) / (T(1) + std::exp(-v));
        return push(std::move(out), needs(x), [x](Graph& g, Var self) {
            if (!g.needs(x)) return;
            const auto& go = g.grad_of(self);
            const auto& yv = g.value(self).data;
            auto& gx = g.grad_ref(x);
            for (size_t i = 0; i < go.data.size(); ++i)
                gx.data[i] += go.data[i] * yv[i] * (T(1) - yv[i]);
        });
    }

    // ---- structure ----

    Var concat(const std::vector<Var>& parts) {
        if (parts.empty()) throw ShapeError("concat of nothing");
        auto shape = value(parts[0]).shape;
        int64_t channels = 0;
        for (Var p : parts) {
            const auto& s = value(p).shape;
            for (size_t i = 1; i < shape.size(); ++i)
                if (s[i] != shape[i]) throw ShapeError("concat: spatial shape mismatch");
            channels += s[0];
        }
        shape[0] = channels;
        TensorT<T> out = TensorT<T>::zeros(shape);
        int64_t off = 0;
        for (Var p : parts) {
            const auto& pv = value(p);
            std::copy(pv.data.begin(), pv.data.end(), out.data.begin() + off);
            off += pv.numel();
        }
        bool rg = false;
        for (Var p : parts) rg = rg || needs(p);
        std::vector<Var> ps = parts;
        return push(std::move(out), rg, [ps](Graph& g, Var self) {
            const auto& go = g.grad_of(self);
            int64_t off = 0;
            for (Var p : ps) {
                const int64_t n = g.value(p).numel();
                if (g.needs(p)) {
                    auto& gp = g.grad_ref(p);
                    for (int64_t i = 0; i < n; ++i) gp.data[static_cast<size_t>(i)] += go.data[static_cast<size_t>(off + i)];
                }
                off += n;
            }
        });
    }

    // zero-pad / crop the last (fastest) dimension of a 4D field
    Var pad_last(Var x, int64_t new_last) {
        const auto& xv = value(x);
        const int64_t last = xv.shape.back();
        if (new_last < last) throw ShapeError("pad_last: target smaller than input");
        auto shape = xv.shape;
        shape.back() = new_last;
        TensorT<T> out = TensorT<T>::zeros(shape);
        const int64_t rows = xv.numel() / last;
        for (int64_t r = 0; r < rows; ++r)
            std::copy(xv.data.begin() + r * last, xv.data.begin() + (r + 1) * last,
                      out.data.begin() + r * new_last);
        return push(std::move(out), needs(x), [x, last, new_last](Graph& g, Var self) {
            if (!g.needs(x)) return;
            const auto& go = g.grad_of(self);
            auto& gx = g.grad_ref(x);
            const int64_t rows = gx.numel() / last;
            for (int64_t r = 0; r < rows; ++r)
                for (int64_t i = 0; i < last; ++i)
                    gx.data[static_cast<size_t>(r * last + i)] += go.data[static_cast<size_t>(r * new_last + i)];
        });
    }

    Var crop_last(Var x, int64_t new_last) {
        const auto& xv = value(x);
        const int64_t last = xv.shape.back();
        if (new_last > last) throw ShapeError("crop_last: target larger than input");
        auto shape = xv.shape;
        shape.back() = new_last;
        TensorT<T> out = TensorT<T>::zeros(shape);
        const int64_t rows = xv.numel() / last;
        for (int64_t r = 0; r < rows; ++r)
            std::copy(xv.data.begin() + r * last, xv.data.begin() + r * last + new_last,
                      out.data.begin() + r * new_last);
        return push(std::move(out), needs(x), [x, last, new_last](Graph& g, Var self) {
            if (!g.needs(x)) return;
            const auto& go = g.grad_of(self);
            auto& gx = g.grad_ref(x);
            const int64_t rows = gx.numel() / last;
            for (int64_t r = 0; r < rows; ++r)
                for (int64_t i = 0; i < new_last; ++i)
                    gx.data[static_cast<size_t>(r * last + i)] += go.data[static_cast<size_t>(r * new_last + i)];
        });
    }

    // ---- conv / pooling ----

    Var conv3d(Var x, Var w, Var b) {
        const auto& xv = value(x);
        const auto& wv = value(w);
        if (xv.shape.size() != 4 || wv.shape.size() != 5) throw ShapeError("conv3d: bad ranks");
        TensorT<T> out = conv3d_forward(xv, wv, b >= 0 ? value(b).data.data() : nullptr);
        const bool rg = needs(x) || needs(w) || (b >= 0 && needs(b));
        return push(std::move(out), rg, [x, w, b](Graph& g, Var self) {
            const auto& go = g.grad_of(self);
            if (g.needs(x)) conv3d_backward_data(go, g.value(w), g.grad_ref(x));
            if (g.needs(w) || (b >= 0 && g.needs(b))) {
                T* db = nullptr;
                if (b >= 0 && g.needs(b)) db = g.grad_ref(b).data.data();
                conv3d_backward_weights(go, g.value(x), g.grad_ref(w), db);
            }
        });
    }

    Var maxpool2(Var x) {
        const auto& xv = value(x);
        const int64_t c = xv.dim(0), d = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
        if (d % 2 || h % 2 || w % 2) throw ShapeError("maxpool2: dimensions must be even");
        TensorT<T> out = TensorT<T>::zeros({c, d / 2, h / 2, w / 2});
        auto argmax = std::make_shared<std::vector<int64_t>>(out.data.size());
        const int64_t hp = h, wp = w;
        for (int64_t ch = 0; ch < c; ++ch)
            for (int64_t z = 0; z < d / 2; ++z)
                for (int64_t y = 0; y < h / 2; ++y)
                    for (int64_t xx = 0; xx < w / 2; ++xx) {
                        T best = -std::numeric_limits<T>::infinity();
                        int64_t best_idx = -1;
                        for (int64_t dz = 0; dz < 2; ++dz)
                            for (int64_t dy = 0; dy < 2; ++dy)
                                for (int64_t dx = 0; dx < 2; ++dx) {
                                    const int64_t idx =
                                        ((ch * d + 2 * z + dz) * hp + 2 * y + dy) * wp + 2 * xx + dx;
                                    const T v = xv.data[static_cast<size_t>(idx)];
                                    if (v > best) {
                                        best = v;
                                        best_idx = idx;
                                    }
                                }
                        const int64_t out_idx = ((ch * (d / 2) + z) * (h / 2) + y) * (w / 2) + xx;
                        out.data[static_cast<size_t>(out_idx)] = best;
                        (*argmax)[static_cast<size_t>(out_idx)] = best_idx;
                    }
        return push(std::move(out), needs(x), [x, argmax](Graph& g, Var self) {
            if (!g.needs(x)) return;
            const auto& go = g.grad_of(self);
            auto& gx = g.grad_ref(x);
            for (size_t i = 0; i < go.data.size(); ++i)
                gx.data[static_cast<size_t>((*argmax)[i])] += go.data[i];
        });
    }

    Var upsample2(Var x) {
        const auto& xv = value(x);
        const int64_t c = xv.dim(0), d = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
        TensorT<T> out = TensorT<T>::zeros({c, 2 * d, 2 * h, 2 * w});
        for (int64_t ch = 0; ch < c; ++ch)
            for (int64_t z = 0; z < 2 * d; ++z)
                for (int64_t y = 0; y < 2 * h; ++y) {
                    const T* src = xv.data.data() + ((ch * d + z / 2) * h + y / 2) * w;
                    T* dst = out.data.data() + ((ch * 2 * d + z) * 2 * h + y) * 2 * w;
                    for (int64_t xx = 0; xx < 2 * w; ++xx) dst[xx] = src[xx / 2];
                }
        return push(std::move(out), needs(x), [x, c, d, h, w](Graph& g, Var self) {
            if (!g.needs(x)) return;
            const auto& go = g.grad_of(self);
            auto& gx = g.grad_ref(x);
            for (int64_t ch = 0; ch < c; ++ch)
                for (int64_t z = 0; z < 2 * d; ++z)
                    for (int64_t y = 0; y < 2 * h; ++y) {
                        const T* src = go.data.data() + ((ch * 2 * d + z) * 2 * h + y) * 2 * w;
                        T* dst = gx.data.data() + ((ch * d + z / 2) * h + y / 2) * w;
                        for (int64_t xx = 0; xx < 2 * w; ++xx) dst[xx / 2] += src[xx];
                    }
        });
    }

    // ---- reductions / broadcasts ----

    Var gap(Var x) {  // [C, spatial...] -> [C]
        const auto& xv = value(x);
        const int64_t c = xv.dim(0);
        const int64_t n = xv.spatial();
        TensorT<T> out = TensorT<T>::zeros({c});
        for (int64_t ch = 0; ch < c; ++ch) {
            T acc = T(0);
            const T* row = xv.data.data() + ch * n;
            for (int64_t i = 0; i < n; ++i) acc += row[i];
            out.data[static_cast<size_t>(ch)] = acc / static_cast<T>(n);
        }
        return push(std::move(out), needs(x), [x, c, n](Graph& g, Var self) {
            if (!g.needs(x)) return;
            const auto& go = g.grad_of(self);
            auto& gx = g.grad_ref(x);
            for (int64_t ch = 0; ch < c; ++ch) {
                const T v = go.data[static_cast<size_t>(ch)] / static_cast<T>(n);
                T* row = gx.data.data() + ch * n;
                for (int64_t i = 0; i < n; ++i) row[i] += v;
            }
        });
    }

    Var linear(Var x, Var w, Var b) {  // x [n], w [m, n], b [m]
        const auto& xv = value(x);
        const auto& wv = value(w);
        const int64_t m = wv.dim(0), n = wv.dim(1);
        if (xv.numel() != n) throw ShapeError("linear: size mismatch");
        TensorT<T> out = TensorT<T>::zeros({m});
        for (int64_t r = 0; r < m; ++r) {
            T acc = b >= 0 ? value(b).data[static_cast<size_t>(r)] : T(0);
            for (int64_t i = 0; i < n; ++i)
                acc += wv.data[static_cast<size_t>(r * n + i)] * xv.data[static_cast<size_t>(i)];
            out.data[static_cast<size_t>(r)] = acc;
        }
        return push(std::move(out), needs(x) || needs(w) || (b >= 0 && needs(b)),
                    [x, w, b, m, n](Graph& g, Var self) {
                        const auto& go = g.grad_of(self);
                        const auto& xv = g.value(x);
                        const auto& wv = g.value(w);
                        if (g.needs(x)) {
                            auto& gx = g.grad_ref(x);
                            for (int64_t r = 0; r < m; ++r)
                                for (int64_t i = 0; i < n; ++i)
                                    gx.data[static_cast<size_t>(i)] +=
                                        go.data[static_cast<size_t>(r)] * wv.data[static_cast<size_t>(r * n + i)];
                        }
                        if (g.needs(w)) {
                            auto& gw = g.grad_ref(w);
                            for (int64_t r = 0; r < m; ++r)
                                for (int64_t i = 0; i < n; ++i)
                                    gw.data[static_cast<size_t>(r * n + i)] +=
                                        go.data[static_cast<size_t>(r)] * xv.data[static_cast<size_t>(i)];
                        }
                        if (b >= 0 && g.needs(b)) {
                            auto& gb = g.grad_ref(b);
                            for (int64_t r = 0; r < m; ++r)
                                gb.data[static_cast<size_t>(r)] += go.data[static_cast<size_t>(r)];
                        }
                    });
    }

    // x [C, spatial] * m [1, spatial], broadcast over channels
    Var mul_spatial(Var x, Var m) {
        const auto& xv = value(x);
        const auto& mv = value(m);
        if (mv.dim(0) != 1 || mv.spatial() != xv.spatial())
            throw ShapeError("mul_spatial: mask shape mismatch");
        const int64_t c = xv.dim(0), n = xv.spatial();
        TensorT<T> out = xv;
        for (int64_t ch = 0; ch < c; ++ch)
            for (int64_t i = 0; i < n; ++i) out.data[static_cast<size_t>(ch * n + i)] *= mv.data[static_cast<size_t>(i)];
        return push(std::move(out), needs(x) || needs(m), [x, m, c, n](Graph& g, Var self) {
            const auto& go = g.grad_of(self);
            const auto& xv = g.value(x);
            const auto& mv = g.value(m);
            if (g.needs(x)) {
                auto& gx = g.grad_ref(x);
                for (int64_t ch = 0; ch < c; ++ch)
                    for (int64_t i = 0; i < n; ++i)
                        gx.data[static_cast<size_t>(ch * n + i)] +=
                            go.data[static_cast<size_t>(ch * n + i)] * mv.data[static_cast<size_t>(i)];
            }
            if (g.needs(m)) {
                auto& gm = g.grad_ref(m);
                for (int64_t ch = 0; ch < c; ++ch)
                    for (int64_t i = 0; i < n; ++i)
                        gm.data[static_cast<size_t>(i)] +=
                            go.data[static_cast<size_t>(ch * n + i)] * xv.data[static_cast<size_t>(ch * n + i)];
            }
        });
    }

    // x [C, spatial] * s [C], broadcast over spatial
    Var mul_channel(Var x, Var s) {
        const auto& xv = value(x);
        const auto& sv = value(s);
        const int64_t c = xv.dim(0), n = xv.spatial();
        if (sv.numel() != c) throw ShapeError("mul_channel: scale size mismatch");
        TensorT<T> out = xv;
        for (int64_t ch = 0; ch < c; ++ch)
            for (int64_t i = 0; i < n; ++i) out.data[static_cast<size_t>(ch * n + i)] *= sv.data[static_cast<size_t>(ch)];
        return push(std::move(out), needs(x) || needs(s), [x, s, c, n](Graph& g, Var self) {
            const auto& go = g.grad_of(self);
            const auto& xv = g.value(x);
            const auto& sv = g.value(s);
            if (g.needs(x)) {
                auto& gx = g.grad_ref(x);
                for (int64_t ch = 0; ch < c; ++ch)
                    for (int64_t i = 0; i < n; ++i)
                        gx.data[static_cast<size_t>(ch * n + i)] +=
                            go.data[static_cast<size_t>(ch * n + i)] * sv.data[static_cast<size_t>(ch)];
            }
            if (g.needs(s)) {
                auto& gs = g.grad_ref(s);
                for (int64_t ch = 0; ch < c; ++ch) {
                    T acc = T(0);
                    for (int64_t i = 0; i < n; ++i)
                        acc += go.data[static_cast<size_t>(ch * n + i)] * xv.data[static_cast<size_t>(ch * n + i)];
                    gs.data[static_cast<size_t>(ch)] += acc;
                }
            }
        });
    }

    Var sum_channels(Var x) {  // [C, spatial] -> [1, spatial]
        const auto& xv = value(x);
        const int64_t c = xv.dim(0), n = xv.spatial();
        auto shape = xv.shape;
        shape[0] = 1;
        TensorT<T> out = TensorT<T>::zeros(shape);
        for (int64_t ch = 0; ch < c; ++ch)
            for (int64_t i = 0; i < n; ++i) out.data[static_cast<size_t>(i)] += xv.data[static_cast<size_t>(ch * n + i)];
        return push(std::move(out), needs(x), [x, c, n](Graph& g, Var self) {
            if (!g.needs(x)) return;
            const auto& go = g.grad_of(self);
            auto& gx = g.grad_ref(x);
            for (int64_t ch = 0; ch < c; ++ch)
                for (int64_t i = 0; i < n; ++i) gx.data[static_cast<size_t>(ch * n + i)] += go.data[static_cast<size_t>(i)];
        });
    }

    // ---- losses ----

    // mean |x - target|; optional elementwise weights (masked mean).
    Var l1_mean(Var x, TensorT<T> target, TensorT<T> weights = {}) {
        const auto& xv = value(x);
        if (!xv.same_shape(target)) throw ShapeError("l1_mean: target shape mismatch");
        const bool masked = !weights.data.empty();
        if (masked && !xv.same_shape(weights)) throw ShapeError("l1_mean: weight shape mismatch");
        T wsum = T(0);
        if (masked)
            for (T w : weights.data) wsum += w;
        else
            wsum = static_cast<T>(xv.numel());
        if (wsum <= T(0)) throw ValidationError("l1_mean: zero total weight");
        T acc = T(0);
        for (size_t i = 0; i < xv.data.size(); ++i) {
            const T d = std::abs(xv.data[i] - target.data[i]);
            acc += masked ? weights.data[i] * d : d;
        }
        auto tgt = std::make_shared<TensorT<T>>(std::move(target));
        auto wts = std::make_shared<TensorT<T>>(std::move(weights));
        return push(TensorT<T>::scalar(acc / wsum), needs(x),
                    [x, tgt, wts, masked, wsum](Graph& g, Var self) {
                        if (!g.needs(x)) return;
                        const T go = g.grad_of(self).data[0];
                        const auto& xv = g.value(x);
                        auto& gx = g.grad_ref(x);
                        for (size_t i = 0; i < xv.data.size(); ++i) {
                            const T d = xv.data[i] - tgt->data[i];
                            const T sg = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
                            const T w = masked ? wts->data[i] : T(1);
                            gx.data[i] += go * w * sg / wsum;
                        }
                    });
    }

    // scalar combination sum_i weights[i] * scalars[i]
    Var weighted_sum(const std::vector<Var>& scalars, const std::vector<T>& weights) {
        if (scalars.size() != weights.size()) throw ShapeError("weighted_sum: length mismatch");
        T acc = T(0);
        bool rg = false;
        for (size_t i = 0; i < scalars.size(); ++i) {
            acc += weights[i] * value(scalars[i]).item();
            rg = rg || needs(scalars[i]);
        }
        std::vector<Var> vs = scalars;
        std::vector<T> ws = weights;
        return push(TensorT<T>::scalar(acc), rg, [vs, ws](Graph& g, Var self) {
            const T go = g.grad_of(self).data[0];
            for (size_t i = 0; i < vs.size(); ++i)
                if (g.needs(vs[i])) g.grad_ref(vs[i]).data[0] += go * ws[i];
        });
    }

    // ---- physics ----

    // x [1, nx, ny, nz] -> [1, bins_u, bins_v, n_angles]; linear operator,
    // backward applies the exact adjoint. The operator must outlive the graph.
    Var project_fp(Var x, const SystemOperator* op) {
        const auto& xv = value(x);
        const auto& grid = op->geometry.image_grid;
        if (xv.dim(0) != 1 || xv.dim(1) != grid.nx || xv.dim(2) != grid.ny || xv.dim(3) != grid.nz)
            throw ShapeError("project_fp: volume shape does not match operator grid");
        VolumeTensor vol = VolumeTensor::zeros(grid);
        for (size_t i = 0; i < vol.data.size(); ++i) vol.data[i] = static_cast<double>(xv.data[i]);
        const ProjectionTensor proj = forward_project(*op, vol);
        TensorT<T> out = TensorT<T>::zeros({1, proj.bins_u, proj.bins_v, proj.n_angles});
        for (size_t i = 0; i < proj.data.size(); ++i) out.data[i] = static_cast<T>(proj.data[i]);
        return push(std::move(out), needs(x), [x, op](Graph& g, Var self) {
            if (!g.needs(x)) return;
            const auto& go = g.grad_of(self);
            ProjectionTensor gp = ProjectionTensor::zeros(static_cast<int>(go.dim(1)),
                                                          static_cast<int>(go.dim(2)),
                                                          static_cast<int>(go.dim(3)));
            for (size_t i = 0; i < gp.data.size(); ++i) gp.data[i] = static_cast<double>(go.data[i]);
            const VolumeTensor gv = back_project(*op, gp);
            auto& gx = g.grad_ref(x);
            for (size_t i = 0; i < gv.data.size(); ++i) gx.data[i] += static_cast<T>(gv.data[i]);
        });
    }

    // ---- engine ----

    void backward(Var loss, T seed = T(1)) {
        if (value(loss).numel() != 1) throw ShapeError("backward: loss must be scalar");
        grad_ref(loss).data[0] += seed;
        for (Var v = static_cast<Var>(nodes_.size()) - 1; v >= 0; --v) {
            auto& node = nodes_[static_cast<size_t>(v)];
            if (!node.requires_grad || !node.backward || node.grad.data.empty()) continue;
            node.backward(*this, v);
        }
    }

    // Add accumulated parameter gradients back into the bound store.
    void harvest_param_grads() {
        for (const auto& [id, var] : param_vars_) {
            if (!has_grad(var)) continue;
            auto& dst = store_->at(id).grad;
            const auto& src = nodes_[static_cast<size_t>(var)].grad;
            for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
        }
    }

    bool needs(Var v) const { return nodes_[static_cast<size_t>(v)].requires_grad; }
    size_t num_nodes() const { return nodes_.size(); }

private:
    struct Node {
        TensorT<T> value;
        TensorT<T> grad;
        bool requires_grad = false;
        std::function<void(Graph&, Var)> backward;
    };

    Var push(TensorT<T> value, bool requires_grad, std::function<void(Graph&, Var)> backward) {
        Node n;
        n.value = std::move(value);
        n.requires_grad = requires_grad;
        n.backward = std::move(backward);
        nodes_.push_back(std::move(n));
        return static_cast<Var>(nodes_.size()) - 1;
    }

    TensorT<T>& grad_ref(Var v) {
        auto& node = nodes_[static_cast<size_t>(v)];
        if (node.grad.data.empty()) node.grad = TensorT<T>::zeros(node.value.shape);
        return node.grad;
    }

    const TensorT<T>& grad_of(Var v) const { return nodes_[static_cast<size_t>(v)].grad; }

    void axpy(Var dst, T alpha, const TensorT<T>& src) {
        auto& g = grad_ref(dst);
        for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += alpha * src.data[i];
    }

    void check_same(Var a, Var b, const char* what) const {
        if (!value(a).same_shape(value(b)))
            throw ShapeError(std::string(what) + ": shape mismatch");
    }

    std::vector<Node> nodes_;
    ParamStore<T>* store_;
    std::vector<std::pair<int, Var>> param_vars_;
};

}  // namespace dudospect::nn
