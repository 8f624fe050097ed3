#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dudospect/nn/graph.hpp"
#include "dudospect/rng.hpp"

namespace dudospect::model {

using nn::Graph;
using nn::ParamStore;
using nn::TensorT;
using nn::Var;

// He-normal initialization for a conv/linear weight with fan_in inputs.
template <class T>
TensorT<T> he_normal(std::vector<int64_t> shape, int64_t fan_in, Rng& rng) {
    TensorT<T> t = TensorT<T>::zeros(std::move(shape));
    const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& v : t.data) v = static_cast<T>(std * rng.next_normal());
    return t;
}

// Small random bias initialization. Zero biases put every ReLU kink of a
// zeroed input patch exactly at the evaluation point, which breaks
// finite-difference checks; a small offset keeps the function smooth in a
// neighborhood of the initial parameters.
template <class T>
TensorT<T> bias_init(int64_t n, Rng& rng) {
    TensorT<T> t = TensorT<T>::zeros({n});
    for (auto& v : t.data) v = static_cast<T>(rng.next_uniform(-0.05, 0.05));
    return t;
}

// 3D convolution layer (kernel 1 or 3, same padding).
template <class T>
struct Conv {
    int w_id = -1, b_id = -1;
    Conv() = default;
    Conv(ParamStore<T>& ps, const std::string& name, int64_t cin, int64_t cout, int64_t k, Rng& rng,
         bool zero_init = false) {
        TensorT<T> w = zero_init ? TensorT<T>::zeros({cout, cin, k, k, k})
                                 : he_normal<T>({cout, cin, k, k, k}, cin * k * k * k, rng);
        TensorT<T> b = zero_init ? TensorT<T>::zeros({cout}) : bias_init<T>(cout, rng);
        w_id = ps.add(name + ".w", std::move(w));
        b_id = ps.add(name + ".b", std::move(b));
    }
    Var operator()(Graph<T>& g, Var x) const { return g.conv3d(x, g.param(w_id), g.param(b_id)); }
};

template <class T>
struct Dense {
    int w_id = -1, b_id = -1;
    Dense() = default;
    Dense(ParamStore<T>& ps, const std::string& name, int64_t nin, int64_t nout, Rng& rng) {
        w_id = ps.add(name + ".w", he_normal<T>({nout, nin}, nin, rng));
        b_id = ps.add(name + ".b", bias_init<T>(nout, rng));
    }
    Var operator()(Graph<T>& g, Var x) const { return g.linear(x, g.param(w_id), g.param(b_id)); }
};

// Additive attention gate: the skip connection x is reweighted by a
// gating field computed from x and the coarser decoder signal g.
template <class T>
struct AttentionGate {
    Conv<T> theta_x, phi_g, psi;
    AttentionGate() = default;
    AttentionGate(ParamStore<T>& ps, const std::string& name, int64_t skip_ch, int64_t gate_ch,
                  Rng& rng) {
        const int64_t inter = std::max<int64_t>(1, skip_ch / 2);
        theta_x = Conv<T>(ps, name + ".theta", skip_ch, inter, 1, rng);
        phi_g = Conv<T>(ps, name + ".phi", gate_ch, inter, 1, rng);
        psi = Conv<T>(ps, name + ".psi", inter, 1, 1, rng);
    }
    // x at full resolution, gate at half resolution
    Var operator()(Graph<T>& g, Var x, Var gate) const {
        Var gu = g.upsample2(gate);
        Var e = g.relu(g.add(theta_x(g, x), phi_g(g, gu)));
        Var alpha = g.sigmoid(psi(g, e));
        return g.mul_spatial(x, alpha);
    }
};

// Depth-2 U-Net with optional attention-gated skips; one conv block per
// level, nearest-neighbor upsampling with 1x1 channel reducers, linear
// 1x1 head. Input spatial dims must be divisible by 4.
template <class T>
struct AttentionUNet {
    int64_t cin = 0;
    int64_t width = 16;
    bool attention = true;
    Conv<T> enc0, enc1, bottleneck, up1, dec1, up0, dec0, head;
    AttentionGate<T> gate1, gate0;

    AttentionUNet() = default;
    AttentionUNet(ParamStore<T>& ps, const std::string& name, int64_t cin_, int64_t width_,
                  bool attention_, Rng& rng)
        : cin(cin_), width(width_), attention(attention_) {
        const int64_t w1 = 2 * width, w2 = 4 * width;
        enc0 = Conv<T>(ps, name + ".enc0", cin, width, 3, rng);
        enc1 = Conv<T>(ps, name + ".enc1", width, w1, 3, rng);
        bottleneck = Conv<T>(ps, name + ".bott", w1, w2, 3, rng);
        up1 = Conv<T>(ps, name + ".up1", w2, w1, 1, rng);
        dec1 = Conv<T>(ps, name + ".dec1", 2 * w1, w1, 3, rng);
        up0 = Conv<T>(ps, name + ".up0", w1, width, 1, rng);
        dec0 = Conv<T>(ps, name + ".dec0", 2 * width, width, 3, rng);
        head = Conv<T>(ps, name + ".head", width, 1, 1, rng);
        if (attention) {
            gate1 = AttentionGate<T>(ps, name + ".att1", w1, w2, rng);
            gate0 = AttentionGate<T>(ps, name + ".att0", width, w1, rng);
        }
    }

    Var operator()(Graph<T>& g, Var x) const {
        const auto& shape = g.value(x).shape;
        if (shape.size() != 4 || shape[0] != cin) throw ShapeError("unet: bad input channels");
        for (size_t i = 1; i < 4; ++i)
            if (shape[i] % 4 != 0)
                throw ShapeError("unet: spatial dims must be divisible by 4");
        Var s0 = g.relu(enc0(g, x));
        Var s1 = g.relu(enc1(g, g.maxpool2(s0)));
        Var bn = g.relu(bottleneck(g, g.maxpool2(s1)));
        Var a1 = attention ? gate1(g, s1, bn) : s1;
        Var d1 = g.relu(dec1(g, g.concat({up1(g, g.upsample2(bn)), a1})));
        Var a0 = attention ? gate0(g, s0, d1) : s0;
        Var d0 = g.relu(dec0(g, g.concat({up0(g, g.upsample2(d1)), a0})));
        return head(g, d0);
    }
};

// 4-layer residual CNN for the image-domain prior. The final conv is
// zero-initialized, so an untrained net is the identity.
template <class T>
struct ResidualImageNet {
    Conv<T> c1, c2, c3, c4;
    ResidualImageNet() = default;
    ResidualImageNet(ParamStore<T>& ps, const std::string& name, int64_t width, Rng& rng) {
        c1 = Conv<T>(ps, name + ".c1", 1, width, 3, rng);
        c2 = Conv<T>(ps, name + ".c2", width, width, 3, rng);
        c3 = Conv<T>(ps, name + ".c3", width, width, 3, rng);
        c4 = Conv<T>(ps, name + ".c4", width, 1, 3, rng, /*zero_init=*/true);
    }
    Var operator()(Graph<T>& g, Var x) const {
        Var h = g.relu(c1(g, x));
        h = g.relu(c2(g, h));
        h = g.relu(c3(g, h));
        return g.add(x, c4(g, h));
    }
};

// Densely-connected 3-layer CNN producing the voxelwise fusion mask
// gamma in (0,1) from the concatenated (aux, primary) pair.
template <class T>
struct AdaptiveMaskNet {
    Conv<T> l1, l2, l3, headc;
    AdaptiveMaskNet() = default;
    AdaptiveMaskNet(ParamStore<T>& ps, const std::string& name, int64_t growth, Rng& rng) {
        l1 = Conv<T>(ps, name + ".l1", 2, growth, 3, rng);
        l2 = Conv<T>(ps, name + ".l2", 2 + growth, growth, 3, rng);
        l3 = Conv<T>(ps, name + ".l3", 2 + 2 * growth, growth, 3, rng);
        headc = Conv<T>(ps, name + ".head", 2 + 3 * growth, 1, 1, rng);
    }
    Var operator()(Graph<T>& g, Var aux, Var primary) const {
        Var x0 = g.concat({aux, primary});
        Var f1 = g.relu(l1(g, x0));
        Var x1 = g.concat({x0, f1});
        Var f2 = g.relu(l2(g, x1));
        Var x2 = g.concat({x1, f2});
        Var f3 = g.relu(l3(g, x2));
        Var x3 = g.concat({x2, f3});
        return g.sigmoid(headc(g, x3));
    }
};

// Squeeze-excitation over the 3 weighted projections: global average
// pool -> bottleneck -> sigmoid, yielding the recalibration vector r.
template <class T>
struct ChannelRecalibration {
    Dense<T> fc1, fc2;
    ChannelRecalibration() = default;
    ChannelRecalibration(ParamStore<T>& ps, const std::string& name, Rng& rng) {
        fc1 = Dense<T>(ps, name + ".fc1", 3, 2, rng);
        fc2 = Dense<T>(ps, name + ".fc2", 2, 3, rng);
    }
    Var operator()(Graph<T>& g, Var stacked3) const {
        Var z = g.gap(stacked3);
        return g.sigmoid(fc2(g, g.relu(fc1(g, z))));
    }
};

}  // namespace dudospect::model
