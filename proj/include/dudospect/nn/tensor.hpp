#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "dudospect/errors.hpp"

namespace dudospect::nn {

// Dense row-major tensor. Network fields are 4D [channels, d0, d1, d2],
// vectors are 1D, scalars are shape {1}.
template <class T>
struct TensorT {
    std::vector<int64_t> shape;
    std::vector<T> data;

    TensorT() = default;
    TensorT(std::vector<int64_t> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (numel_of(shape) != static_cast<int64_t>(data.size()))
            throw ShapeError("tensor shape does not match data size");
    }

    static int64_t numel_of(const std::vector<int64_t>& s) {
        if (s.empty()) return 0;
        return std::accumulate(s.begin(), s.end(), int64_t{1}, std::multiplies<>());
    }
    static TensorT zeros(std::vector<int64_t> s) {
        const int64_t n = numel_of(s);
        return TensorT(std::move(s), std::vector<T>(static_cast<size_t>(n), T(0)));
    }
    static TensorT scalar(T v) { return TensorT({1}, {v}); }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int64_t dim(size_t i) const { return shape.at(i); }
    bool same_shape(const TensorT& other) const { return shape == other.shape; }
    // spatial element count of a 4D field
    int64_t spatial() const {
        int64_t n = 1;
        for (size_t i = 1; i < shape.size(); ++i) n *= shape[i];
        return n;
    }
    T item() const {
        if (data.size() != 1) throw ShapeError("item() on non-scalar tensor");
        return data[0];
    }

    template <class U>
    TensorT<U> cast() const {
        TensorT<U> out;
        out.shape = shape;
        out.data.assign(data.begin(), data.end());
        return out;
    }
};

}  // namespace dudospect::nn
