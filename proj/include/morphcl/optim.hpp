#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "morphcl/matrix.hpp"

namespace morphcl {

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// First/second moment buffers matching a parameter set, plus the step count.
struct AdamWState {
    std::vector<std::vector<double>> m, v;
    long step_count = 0;
    AdamWConfig cfg;

    template <typename Views>
    static AdamWState init_like(const Views& params, AdamWConfig cfg = {}) {
        AdamWState s;
        s.cfg = cfg;
        s.m.reserve(params.size());
        s.v.reserve(params.size());
        for (const auto& p : params) {
            s.m.emplace_back(p.size(), 0.0);
            s.v.emplace_back(p.size(), 0.0);
        }
        return s;
    }
};

// One AdamW update with decoupled weight decay. Bias-corrected moments.
inline void adamw_step(AdamWState& state, std::vector<std::span<double>> params,
                       std::vector<std::span<const double>> grads, double lr) {
    detail::require(lr > 0.0, "adamw_step: lr must be positive");
    detail::require(params.size() == grads.size() && params.size() == state.m.size(),
                    "adamw_step: parameter/gradient/state structure mismatch");
    const double b1 = state.cfg.beta1, b2 = state.cfg.beta2;
    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(b1, t);
    const double bc2 = 1.0 - std::pow(b2, t);
    for (std::size_t vi = 0; vi < params.size(); ++vi) {
        detail::require(params[vi].size() == grads[vi].size(), "adamw_step: shape mismatch");
        auto& m = state.m[vi];
        auto& v = state.v[vi];
        for (std::size_t i = 0; i < params[vi].size(); ++i) {
            const double g = grads[vi][i];
            if (!std::isfinite(g)) throw std::invalid_argument("adamw_step: non-finite gradient");
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            const double mh = m[i] / bc1;
            const double vh = v[i] / bc2;
            params[vi][i] -= lr * (mh / (std::sqrt(vh) + state.cfg.eps) +
                                   state.cfg.weight_decay * params[vi][i]);
        }
    }
}

enum class ScheduleKind { constant, cosine, step, exponential, linear };

struct Schedule {
    ScheduleKind kind = ScheduleKind::constant;
    double eta0 = 1e-4;
    double eta_min = 1e-6;
    long horizon = 1;       // cosine, linear
    long drop_every = 100;  // step
    double factor = 0.5;    // step
    double decay = 0.99;    // exponential

    static Schedule constant_lr(double eta0) { return {ScheduleKind::constant, eta0}; }
    static Schedule cosine_lr(double eta0, double eta_min, long horizon) {
        Schedule s;
        s.kind = ScheduleKind::cosine;
        s.eta0 = eta0;
        s.eta_min = eta_min;
        s.horizon = horizon;
        return s;
    }
};

inline double schedule_lr(const Schedule& s, long epoch) {
    detail::require(epoch >= 0, "schedule_lr: negative epoch");
    switch (s.kind) {
        case ScheduleKind::constant: return s.eta0;
        case ScheduleKind::cosine: {
            if (epoch >= s.horizon) return s.eta_min;
            const double frac = static_cast<double>(epoch) / static_cast<double>(s.horizon);
            return s.eta_min + 0.5 * (s.eta0 - s.eta_min) * (1.0 + std::cos(M_PI * frac));
        }
        case ScheduleKind::step: {
            const long drops = epoch / std::max<long>(1, s.drop_every);
            return std::max(s.eta_min, s.eta0 * std::pow(s.factor, static_cast<double>(drops)));
        }
        case ScheduleKind::exponential:
            return std::max(s.eta_min, s.eta0 * std::pow(s.decay, static_cast<double>(epoch)));
        case ScheduleKind::linear: {
            if (epoch >= s.horizon) return s.eta_min;
            const double frac = static_cast<double>(epoch) / static_cast<double>(s.horizon);
            return s.eta0 + (s.eta_min - s.eta0) * frac;
        }
    }
    throw std::logic_error("unknown schedule kind");
}

inline double global_norm(std::vector<std::span<const double>> views) {
    double s = 0.0;
    for (const auto& v : views) s += dot(v, v);
    return std::sqrt(s);
}

// Scales the whole gradient set so its global L2 norm does not exceed
// max_norm. Returns the pre-clip norm.
inline double clip_grad(std::vector<std::span<double>> grads, double max_norm) {
    detail::require(max_norm > 0.0, "clip_grad: max_norm must be positive");
    double s = 0.0;
    for (const auto& v : grads) s += dot(v, v);
    const double norm = std::sqrt(s);
    if (norm > max_norm) {
        const double scale = max_norm / norm;
        for (auto& v : grads)
            for (double& x : v) x *= scale;
    }
    return norm;
}

}  // namespace morphcl
