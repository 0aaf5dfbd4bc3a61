#pragma once

#include <algorithm>
#include <cstdint>

#include "morphcl/backprop.hpp"
#include "morphcl/dataset.hpp"

namespace morphcl {

// Blend weights for the current-task, replay, and regularization gradients.
struct GradWeights {
    double alpha = 0.4;
    double beta = 0.4;
    double gamma = 0.1;
};

struct PerturbationResult {
    Gradients grad;
    double dv = 0.0;  // perturbed loss minus base loss, normalized by (t+1)
};

// Gradient of the loss gap between a jointly perturbed evaluation
// (weights + sigma_w noise, inputs + sigma_x noise) and the clean one, from a
// single Gaussian draw, scaled by 1/(t+1) so it cannot grow with the task
// count. A precomputed clean gradient can be passed to skip one backward.
inline PerturbationResult perturbation_grad_full(const Network& net, const Dataset& batch,
                                                 double sigma_x, double sigma_w, int t,
                                                 LossKind kind, std::uint64_t seed,
                                                 const Gradients* clean_grad = nullptr,
                                                 double clean_loss_in = -1.0) {
    detail::require(sigma_x >= 0.0 && sigma_w >= 0.0, "perturbation: sigmas must be >= 0");
    detail::require(t >= 0, "perturbation: t must be >= 0");
    PerturbationResult res;
    const double scale = 1.0 / static_cast<double>(t + 1);
    if (sigma_x == 0.0 && sigma_w == 0.0) {
        res.grad = Gradients::zeros_like(net);
        return res;
    }
    Rng rng(derive_seed(seed, {0x70657274ULL}));
    Network noisy = net;
    if (sigma_w > 0.0)
        for (auto& view : param_views(noisy))
            for (double& v : view) v += rng.normal(0.0, sigma_w);
    Matrix x = batch.x;
    if (sigma_x > 0.0)
        for (double& v : x.data()) v += rng.normal(0.0, sigma_x);

    res.grad = backward(noisy, x, batch.y, kind);
    const double noisy_loss = loss(forward(noisy, x), batch.y, kind);
    double base_loss = clean_loss_in;
    if (clean_grad) {
        res.grad.add_scaled(*clean_grad, -1.0);
    } else {
        const Gradients base = backward(net, batch.x, batch.y, kind);
        res.grad.add_scaled(base, -1.0);
    }
    if (base_loss < 0.0) base_loss = loss(forward(net, batch.x), batch.y, kind);
    res.grad.scale(scale);
    res.dv = (noisy_loss - base_loss) * scale;
    return res;
}

inline Gradients perturbation_grad(const Network& net, const Dataset& batch, double sigma_x,
                                   double sigma_w, int t, LossKind kind, std::uint64_t seed) {
    return perturbation_grad_full(net, batch, sigma_x, sigma_w, t, kind, seed).grad;
}

struct HamiltonianResult {
    Gradients grad;
    double loss_current = 0.0;
    double loss_replay = 0.0;
    double dv = 0.0;
    // The blended scalar the gradient descends.
    double blended(const GradWeights& w, bool has_replay) const {
        return w.alpha * loss_current + (has_replay ? w.beta * loss_replay : 0.0) + w.gamma * dv;
    }
};

// alpha * grad(current batch) + beta * grad(replay batch) + gamma * dV.
// The replay term vanishes at t=0 or with an empty replay batch.
inline HamiltonianResult hamiltonian_grad_full(const Network& net, const Dataset& batch_c,
                                               const Dataset& batch_e, const GradWeights& w, int t,
                                               LossKind kind, double sigma_x, double sigma_w,
                                               std::uint64_t seed) {
    HamiltonianResult res;
    const Gradients gc = backward(net, batch_c.x, batch_c.y, kind);
    res.loss_current = loss(forward(net, batch_c.x), batch_c.y, kind);
    res.grad = Gradients::zeros_like(net);
    res.grad.add_scaled(gc, w.alpha);
    const bool has_replay = t > 0 && !batch_e.empty();
    if (has_replay && w.beta != 0.0) {
        const Gradients ge = backward(net, batch_e.x, batch_e.y, kind);
        res.loss_replay = loss(forward(net, batch_e.x), batch_e.y, kind);
        res.grad.add_scaled(ge, w.beta);
    }
    if (w.gamma != 0.0) {
        const PerturbationResult p = perturbation_grad_full(net, batch_c, sigma_x, sigma_w, t, kind,
                                                            seed, &gc, res.loss_current);
        res.grad.add_scaled(p.grad, w.gamma);
        res.dv = p.dv;
    }
    return res;
}

inline Gradients hamiltonian_grad(const Network& net, const Dataset& batch_c,
                                  const Dataset& batch_e, const GradWeights& w, int t,
                                  LossKind kind, double sigma_x, double sigma_w,
                                  std::uint64_t seed) {
    return hamiltonian_grad_full(net, batch_c, batch_e, w, t, kind, sigma_x, sigma_w, seed).grad;
}

// Rebalances the blend from the loss ratio at a task transition. Falls back
// to the defaults when the previous loss is unusable.
inline GradWeights adapt_weights(double j_curr, double j_prev) {
    if (j_prev <= 0.0) return GradWeights{};
    const double r = j_curr / j_prev;
    GradWeights w;
    w.alpha = std::clamp(std::min(0.7, 0.3 + 0.4 * (r - 1.0)), 0.0, 1.0);
    w.beta = std::clamp(std::max(0.2, 0.6 - 0.4 * (r - 1.0)), 0.0, 1.0);
    w.gamma = 0.1;
    return w;
}

}  // namespace morphcl
