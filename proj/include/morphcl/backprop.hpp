#pragma once

#include <span>
#include <vector>

#include "morphcl/loss.hpp"
#include "morphcl/network.hpp"

namespace morphcl {

// Per-layer weight and bias gradients, same shapes as the network.
struct Gradients {
    std::vector<Matrix> w;
    std::vector<std::vector<double>> b;

    static Gradients zeros_like(const Network& net) {
        Gradients g;
        g.w.reserve(net.layers.size());
        g.b.reserve(net.layers.size());
        for (const auto& l : net.layers) {
            g.w.emplace_back(l.w.rows(), l.w.cols());
            g.b.emplace_back(l.b.size(), 0.0);
        }
        return g;
    }

    void add_scaled(const Gradients& o, double s) {
        for (std::size_t i = 0; i < w.size(); ++i) {
            axpy(s, o.w[i].view(), w[i].view());
            axpy(s, {o.b[i].data(), o.b[i].size()}, {b[i].data(), b[i].size()});
        }
    }

    void scale(double s) {
        for (auto& m : w)
            for (double& v : m.data()) v *= s;
        for (auto& vec : b)
            for (double& v : vec) v *= s;
    }
};

// Mutable flat views over a parameter set; the unit the optimizer works on.
using ParamViews = std::vector<std::span<double>>;
using ConstParamViews = std::vector<std::span<const double>>;

inline ParamViews param_views(Network& net) {
    ParamViews v;
    v.reserve(net.layers.size() * 2);
    for (auto& l : net.layers) {
        v.push_back(l.w.view());
        v.push_back({l.b.data(), l.b.size()});
    }
    return v;
}

inline ConstParamViews grad_views(const Gradients& g) {
    ConstParamViews v;
    v.reserve(g.w.size() * 2);
    for (std::size_t i = 0; i < g.w.size(); ++i) {
        v.push_back(g.w[i].view());
        v.push_back({g.b[i].data(), g.b[i].size()});
    }
    return v;
}

inline ParamViews grad_views_mut(Gradients& g) {
    ParamViews v;
    v.reserve(g.w.size() * 2);
    for (std::size_t i = 0; i < g.w.size(); ++i) {
        v.push_back(g.w[i].view());
        v.push_back({g.b[i].data(), g.b[i].size()});
    }
    return v;
}

// Reverse-mode gradient of the loss with respect to every weight and bias.
inline Gradients backward(const Network& net, const Matrix& x, const Matrix& target, LossKind kind) {
    ForwardTrace trace;
    const Matrix pred = forward(net, x, &trace);
    Gradients g = Gradients::zeros_like(net);

    Matrix delta = loss_grad(pred, target, kind);  // d loss / d output activations
    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const Layer& l = net.layers[li];
        // through the activation
        if (l.act != ActivationKind::identity) {
            const Matrix& pre = trace.pre[li];
            for (std::size_t i = 0; i < delta.size(); ++i)
                delta.data()[i] *= activation_deriv(l.act, pre.data()[i]);
        }
        const Matrix& input = (li == 0) ? x : trace.post[li - 1];
        g.w[li] = matmul_tn(delta, input);
        for (std::size_t r = 0; r < delta.rows(); ++r)
            for (std::size_t c = 0; c < delta.cols(); ++c) g.b[li][c] += delta(r, c);
        if (li > 0) delta = matmul_nn(delta, l.w);
    }
    return g;
}

// Max relative disagreement between the analytic gradient and central finite
// differences over all parameters.
inline double grad_check(const Network& net, const Matrix& x, const Matrix& target, LossKind kind,
                         double h) {
    detail::require(h > 0.0 && h <= 1e-3, "grad_check: h must be in (0, 1e-3]");
    const Gradients analytic = backward(net, x, target, kind);
    Network probe = net;
    const ConstParamViews grads = grad_views(analytic);
    const ParamViews params = param_views(probe);
    double worst = 0.0;
    for (std::size_t vi = 0; vi < params.size(); ++vi) {
        for (std::size_t i = 0; i < params[vi].size(); ++i) {
            double& p = params[vi][i];
            const double orig = p;
            p = orig + h;
            const double lp = loss(forward(probe, x), target, kind);
            p = orig - h;
            const double lm = loss(forward(probe, x), target, kind);
            p = orig;
            const double fd = (lp - lm) / (2.0 * h);
            const double a = grads[vi][i];
            const double rel = std::fabs(a - fd) / (std::fabs(a) + std::fabs(fd) + 1e-12);
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace morphcl
