#pragma once

#include <Eigen/Dense>
#include <cstring>

#include "dudospect/nn/tensor.hpp"

namespace dudospect::nn {

// 3D convolution kernels (stride 1, kernels 1 or 3 with "same" zero
// padding). The k=3 path copies the field into a zero-padded buffer and
// accumulates one GEMM per kernel offset over shifted flat views; entries
// falling into the padded halo are discarded on extraction. All loops and
// GEMMs are single-threaded and run in a fixed order, so results are
// bitwise reproducible.

template <class T>
using MatrixRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapRM = Eigen::Map<MatrixRM<T>, Eigen::Unaligned, Eigen::OuterStride<>>;
template <class T>
using CMapRM = Eigen::Map<const MatrixRM<T>, Eigen::Unaligned, Eigen::OuterStride<>>;

namespace detail {

template <class T>
void pad_field(const T* src, T* dst, int64_t channels, int64_t d, int64_t h, int64_t w) {
    const int64_t hp = h + 2, wp = w + 2;
    const int64_t pv = (d + 2) * hp * wp;
    std::memset(dst, 0, static_cast<size_t>(channels * pv) * sizeof(T));
    for (int64_t c = 0; c < channels; ++c)
        for (int64_t z = 0; z < d; ++z)
            for (int64_t y = 0; y < h; ++y) {
                const T* row = src + ((c * d + z) * h + y) * w;
                T* out = dst + c * pv + ((z + 1) * hp + (y + 1)) * wp + 1;
                std::memcpy(out, row, static_cast<size_t>(w) * sizeof(T));
            }
}

template <class T>
void unpad_field(const T* src, T* dst, int64_t channels, int64_t d, int64_t h, int64_t w) {
    const int64_t hp = h + 2, wp = w + 2;
    const int64_t pv = (d + 2) * hp * wp;
    for (int64_t c = 0; c < channels; ++c)
        for (int64_t z = 0; z < d; ++z)
            for (int64_t y = 0; y < h; ++y) {
                const T* row = src + c * pv + ((z + 1) * hp + (y + 1)) * wp + 1;
                T* out = dst + ((c * d + z) * h + y) * w;
                std::memcpy(out, row, static_cast<size_t>(w) * sizeof(T));
            }
}

}  // namespace detail

// y = conv(x, w) + b. x [Ci,D,H,W], w [Co,Ci,k,k,k], b [Co] or nullptr.
template <class T>
TensorT<T> conv3d_forward(const TensorT<T>& x, const TensorT<T>& w, const T* bias) {
    const int64_t ci = x.dim(0), d = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const int64_t co = w.dim(0), k = w.dim(2);
    if (w.dim(1) != ci) throw ShapeError("conv3d: input channel mismatch");
    TensorT<T> y = TensorT<T>::zeros({co, d, h, wd});
    const int64_t n = d * h * wd;

    if (k == 1) {
        CMapRM<T> wm(w.data.data(), co, ci, Eigen::OuterStride<>(ci));
        CMapRM<T> xm(x.data.data(), ci, n, Eigen::OuterStride<>(n));
        MapRM<T> ym(y.data.data(), co, n, Eigen::OuterStride<>(n));
        ym.noalias() = wm * xm;
    } else if (k == 3) {
        const int64_t hp = h + 2, wp = wd + 2;
        const int64_t pv = (d + 2) * hp * wp;
        std::vector<T> xp(static_cast<size_t>(ci * pv));
        std::vector<T> yp(static_cast<size_t>(co * pv), T(0));
        detail::pad_field(x.data.data(), xp.data(), ci, d, h, wd);
        std::vector<T> wk(static_cast<size_t>(co * ci));
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                for (int c = 0; c < 3; ++c) {
                    for (int64_t o = 0; o < co; ++o)
                        for (int64_t i = 0; i < ci; ++i)
                            wk[static_cast<size_t>(o * ci + i)] =
                                w.data[static_cast<size_t>((((o * ci + i) * 3 + a) * 3 + b) * 3 + c)];
                    const int64_t s = (static_cast<int64_t>(a - 1) * hp + (b - 1)) * wp + (c - 1);
                    const int64_t y0 = s < 0 ? -s : 0;
                    const int64_t x0 = y0 + s;
                    const int64_t len = pv - (s < 0 ? -s : s);
                    CMapRM<T> wkm(wk.data(), co, ci, Eigen::OuterStride<>(ci));
                    CMapRM<T> xm(xp.data() + x0, ci, len, Eigen::OuterStride<>(pv));
                    MapRM<T> ym(yp.data() + y0, co, len, Eigen::OuterStride<>(pv));
                    ym.noalias() += wkm * xm;
                }
        detail::unpad_field(yp.data(), y.data.data(), co, d, h, wd);
    } else {
        throw ShapeError("conv3d: only kernels 1 and 3 are supported");
    }

    if (bias) {
        for (int64_t o = 0; o < co; ++o) {
            T* row = y.data.data() + o * n;
            for (int64_t j = 0; j < n; ++j) row[j] += bias[o];
        }
    }
    return y;
}

// dx += conv(dy, flip(w)^T): realized by transforming the weights and
// reusing the forward kernel.
template <class T>
void conv3d_backward_data(const TensorT<T>& dy, const TensorT<T>& w, TensorT<T>& dx_accum) {
    const int64_t co = w.dim(0), ci = w.dim(1), k = w.dim(2);
    TensorT<T> wt = TensorT<T>::zeros({ci, co, k, k, k});
    for (int64_t o = 0; o < co; ++o)
        for (int64_t i = 0; i < ci; ++i)
            for (int64_t a = 0; a < k; ++a)
                for (int64_t b = 0; b < k; ++b)
                    for (int64_t c = 0; c < k; ++c)
                        wt.data[static_cast<size_t>(
                            (((i * co + o) * k + (k - 1 - a)) * k + (k - 1 - b)) * k + (k - 1 - c))] =
                            w.data[static_cast<size_t>((((o * ci + i) * k + a) * k + b) * k + c)];
    const TensorT<T> dx = conv3d_forward(dy, wt, static_cast<const T*>(nullptr));
    for (size_t i = 0; i < dx.data.size(); ++i) dx_accum.data[i] += dx.data[i];
}

// dw += dy (*) x, db += sum(dy).
template <class T>
void conv3d_backward_weights(const TensorT<T>& dy, const TensorT<T>& x, TensorT<T>& dw_accum,
                             T* db_accum) {
    const int64_t ci = x.dim(0), d = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const int64_t co = dy.dim(0), k = dw_accum.dim(2);
    const int64_t n = d * h * wd;

    if (db_accum) {
        for (int64_t o = 0; o < co; ++o) {
            T acc = T(0);
            const T* row = dy.data.data() + o * n;
            for (int64_t j = 0; j < n; ++j) acc += row[j];
            db_accum[o] += acc;
        }
    }

    if (k == 1) {
        CMapRM<T> dym(dy.data.data(), co, n, Eigen::OuterStride<>(n));
        CMapRM<T> xm(x.data.data(), ci, n, Eigen::OuterStride<>(n));
        MapRM<T> dwm(dw_accum.data.data(), co, ci, Eigen::OuterStride<>(ci));
        dwm.noalias() += dym * xm.transpose();
        return;
    }

    const int64_t hp = h + 2, wp = wd + 2;
    const int64_t pv = (d + 2) * hp * wp;
    std::vector<T> xp(static_cast<size_t>(ci * pv));
    std::vector<T> dyp(static_cast<size_t>(co * pv));
    detail::pad_field(x.data.data(), xp.data(), ci, d, h, wd);
    detail::pad_field(dy.data.data(), dyp.data(), co, d, h, wd);
    MatrixRM<T> dwk(co, ci);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            for (int c = 0; c < 3; ++c) {
                const int64_t s = (static_cast<int64_t>(a - 1) * hp + (b - 1)) * wp + (c - 1);
                const int64_t y0 = s < 0 ? -s : 0;
                const int64_t x0 = y0 + s;
                const int64_t len = pv - (s < 0 ? -s : s);
                CMapRM<T> dym(dyp.data() + y0, co, len, Eigen::OuterStride<>(pv));
                CMapRM<T> xm(xp.data() + x0, ci, len, Eigen::OuterStride<>(pv));
                dwk.noalias() = dym * xm.transpose();
                for (int64_t o = 0; o < co; ++o)
                    for (int64_t i = 0; i < ci; ++i)
                        dw_accum.data[static_cast<size_t>((((o * ci + i) * 3 + a) * 3 + b) * 3 + c)] +=
                            dwk(o, i);
            }
}

}  // namespace dudospect::nn
