#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "morphcl/activation.hpp"
#include "morphcl/matrix.hpp"
#include "morphcl/rng.hpp"

namespace morphcl {

// Layer widths from input to output, plus an optional square conv kernel
// side length for models that carry a spatial front end.
struct Architecture {
    std::vector<int> widths;
    std::optional<int> filter_size;

    Architecture() = default;
    Architecture(std::vector<int> w) : widths(std::move(w)) {}
    Architecture(std::vector<int> w, int filter) : widths(std::move(w)), filter_size(filter) {}

    int input_width() const { return widths.front(); }
    int output_width() const { return widths.back(); }
    std::size_t layer_count() const { return widths.empty() ? 0 : widths.size() - 1; }

    void validate() const {
        detail::require(widths.size() >= 2, "architecture needs at least input and output widths");
        for (int w : widths)
            detail::require(w >= 1, "architecture width must be >= 1, got " + std::to_string(w));
        if (filter_size) {
            detail::require(*filter_size >= 1 && *filter_size % 2 == 1,
                            "filter size must be odd and >= 1, got " + std::to_string(*filter_size));
        }
    }

    bool valid() const {
        if (widths.size() < 2) return false;
        for (int w : widths)
            if (w < 1) return false;
        if (filter_size && (*filter_size < 1 || *filter_size % 2 == 0)) return false;
        return true;
    }

    friend bool operator==(const Architecture& a, const Architecture& b) {
        return a.widths == b.widths && a.filter_size == b.filter_size;
    }
};

struct Layer {
    Matrix w;               // out x in
    std::vector<double> b;  // out
    ActivationKind act = ActivationKind::identity;
};

struct Network {
    Architecture arch;
    std::vector<Layer> layers;

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.w.size() + l.b.size();
        return n;
    }
};

inline double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

// Glorot-uniform weights, zero biases. Hidden layers take the given
// activation; the final layer is left linear (regression output or raw
// logits).
inline Network init_network(const Architecture& arch, ActivationKind hidden_act, std::uint64_t seed) {
    arch.validate();
    Network net;
    net.arch = arch;
    Rng rng(derive_seed(seed, {0x696e6974ULL}));  // "init" stream
    const std::size_t d = arch.layer_count();
    net.layers.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
        const std::size_t in = static_cast<std::size_t>(arch.widths[i]);
        const std::size_t out = static_cast<std::size_t>(arch.widths[i + 1]);
        const double bound = glorot_bound(in, out);
        Layer& l = net.layers[i];
        l.w = Matrix(out, in);
        for (double& v : l.w.data()) v = rng.uniform(-bound, bound);
        l.b.assign(out, 0.0);
        l.act = (i + 1 == d) ? ActivationKind::identity : hidden_act;
    }
    return net;
}

// Per-layer pre-activations and activations kept for the backward pass.
struct ForwardTrace {
    std::vector<Matrix> pre;   // pre[i]: batch x widths[i+1]
    std::vector<Matrix> post;  // post[i]: activation of pre[i]
};

inline Matrix forward(const Network& net, const Matrix& x, ForwardTrace* trace = nullptr) {
    detail::require(!net.layers.empty(), "forward: network has no layers");
    detail::require(x.cols() == static_cast<std::size_t>(net.arch.input_width()),
                    "forward: input has " + std::to_string(x.cols()) + " columns, layer 0 expects " +
                        std::to_string(net.arch.input_width()));
    detail::require(x.all_finite(), "forward: input contains non-finite values");
    if (trace) {
        trace->pre.clear();
        trace->post.clear();
        trace->pre.reserve(net.layers.size());
        trace->post.reserve(net.layers.size());
    }
    Matrix cur = x;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const Layer& l = net.layers[i];
        detail::require(cur.cols() == l.w.cols(),
                        "forward: dimension mismatch at layer " + std::to_string(i));
        Matrix z = matmul_nt(cur, l.w);
        for (std::size_t r = 0; r < z.rows(); ++r)
            for (std::size_t c = 0; c < z.cols(); ++c) z(r, c) += l.b[c];
        if (trace) trace->pre.push_back(z);
        if (l.act != ActivationKind::identity)
            for (double& v : z.data()) v = activation_value(l.act, v);
        if (trace) trace->post.push_back(z);
        cur = std::move(z);
    }
    return cur;
}

inline bool networks_identical(const Network& a, const Network& b) {
    if (!(a.arch == b.arch) || a.layers.size() != b.layers.size()) return false;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        if (a.layers[i].act != b.layers[i].act) return false;
        if (!(a.layers[i].w == b.layers[i].w)) return false;
        if (a.layers[i].b != b.layers[i].b) return false;
    }
    return true;
}

}  // namespace morphcl
