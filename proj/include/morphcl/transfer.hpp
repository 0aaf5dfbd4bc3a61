#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "morphcl/backprop.hpp"
#include "morphcl/dataset.hpp"
#include "morphcl/network.hpp"
#include "morphcl/optim.hpp"

namespace morphcl {

// Per-layer dimensions of the transfer pair mapping a weight matrix
// W (old_out x old_in) to V = A * W * B^T (new_out x new_in).
struct LayerPlan {
    int a_rows, a_cols;  // new_out x old_out
    int b_rows, b_cols;  // new_in x old_in
};

struct FilterPlan {
    int k_new, k_old;  // A and B are both k_new x k_old
};

struct TransferPlan {
    std::vector<LayerPlan> layers;
    std::optional<FilterPlan> filter;
};

struct TransferPair {
    std::vector<Matrix> a, b;
};

inline TransferPlan plan_ffn_shapes(const Architecture& old_arch, const Architecture& new_arch) {
    old_arch.validate();
    new_arch.validate();
    detail::require(old_arch.widths.size() == new_arch.widths.size(),
                    "transfer plan: depth mismatch");
    detail::require(old_arch.input_width() == new_arch.input_width(),
                    "transfer plan: input width must not change");
    detail::require(old_arch.output_width() == new_arch.output_width(),
                    "transfer plan: output width must not change");
    TransferPlan plan;
    const std::size_t d = old_arch.layer_count();
    plan.layers.reserve(d);
    for (std::size_t i = 0; i < d; ++i) {
        LayerPlan lp;
        lp.a_rows = new_arch.widths[i + 1];
        lp.a_cols = old_arch.widths[i + 1];
        lp.b_rows = new_arch.widths[i];
        lp.b_cols = old_arch.widths[i];
        plan.layers.push_back(lp);
    }
    return plan;
}

inline FilterPlan plan_conv_shapes(int k_old, int k_new) {
    detail::require(k_old >= 1 && k_new >= 1, "conv plan: kernel sides must be >= 1");
    return {k_new, k_old};
}

namespace detail {

// Identity in the top-left block, small Glorot-scaled noise elsewhere. The
// identity block keeps the source function representable at initialization;
// the noise keeps fresh rows from being permanently dead.
inline Matrix identity_like(int rows, int cols, Rng& rng) {
    Matrix m(rows, cols);
    const double scale = 0.01 * glorot_bound(cols, rows);
    const int k = std::min(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            m(r, c) = (r == c) ? 1.0 : (r < k && c < k ? 0.0 : rng.uniform(-scale, scale));
    return m;
}

}  // namespace detail

inline TransferPair init_ab(const TransferPlan& plan, std::uint64_t seed) {
    Rng rng(derive_seed(seed, {0x6162ULL}));
    TransferPair pair;
    pair.a.reserve(plan.layers.size());
    pair.b.reserve(plan.layers.size());
    for (const auto& lp : plan.layers) {
        pair.a.push_back(detail::identity_like(lp.a_rows, lp.a_cols, rng));
        pair.b.push_back(detail::identity_like(lp.b_rows, lp.b_cols, rng));
    }
    return pair;
}

// V_i = A_i * W_i * B_i^T per layer; biases follow through A.
inline Network apply_transfer(const TransferPair& pair, const Network& src,
                              const Architecture& new_arch) {
    detail::require(pair.a.size() == src.layers.size(), "apply_transfer: layer count mismatch");
    Network out;
    out.arch = new_arch;
    out.layers.resize(src.layers.size());
    for (std::size_t i = 0; i < src.layers.size(); ++i) {
        const Matrix& a = pair.a[i];
        const Matrix& b = pair.b[i];
        const Layer& l = src.layers[i];
        detail::require(a.cols() == l.w.rows() && b.cols() == l.w.cols(),
                        "apply_transfer: plan does not fit source at layer " + std::to_string(i));
        detail::require(a.rows() == static_cast<std::size_t>(new_arch.widths[i + 1]) &&
                            b.rows() == static_cast<std::size_t>(new_arch.widths[i]),
                        "apply_transfer: plan does not fit target at layer " + std::to_string(i));
        out.layers[i].w = matmul_nn(a, matmul_nt(l.w, b));
        out.layers[i].b.assign(a.rows(), 0.0);
        for (std::size_t r = 0; r < a.rows(); ++r)
            out.layers[i].b[r] = dot(a.row(r), {l.b.data(), l.b.size()});
        out.layers[i].act = l.act;
    }
    return out;
}

// One shared (A, B) applied to every conv filter slice: V = A * W * B^T.
inline std::vector<Matrix> transform_filters(const std::vector<Matrix>& filters, const Matrix& a,
                                             const Matrix& b) {
    std::vector<Matrix> out;
    out.reserve(filters.size());
    for (const auto& w : filters) out.push_back(matmul_nn(a, matmul_nt(w, b)));
    return out;
}

struct TrainAbResult {
    TransferPair pair;
    double pre_loss = 0.0;
    double post_loss = 0.0;
    bool diverged = false;
};

// Trains A and B against the task loss of the transferred network while the
// source weights stay frozen. Tracks the best pair seen on the full dataset
// and returns it.
inline TrainAbResult train_ab(const Network& src, TransferPair pair, const Architecture& new_arch,
                              const Dataset& data, int n_epochs, double eta_ab, std::uint64_t seed,
                              std::size_t batch_size, LossKind kind) {
    detail::require(n_epochs >= 0, "train_ab: n_epochs must be >= 0");
    TrainAbResult res;

    auto eval_full = [&](const TransferPair& p) {
        const Network net = apply_transfer(p, src, new_arch);
        return loss(forward(net, data.x), data.y, kind);
    };
    res.pre_loss = eval_full(pair);
    if (n_epochs == 0) {
        res.pair = std::move(pair);
        res.post_loss = res.pre_loss;
        return res;
    }

    auto views = [](TransferPair& p) {
        ParamViews v;
        for (auto& m : p.a) v.push_back(m.view());
        for (auto& m : p.b) v.push_back(m.view());
        return v;
    };
    AdamWConfig ab_opt;
    ab_opt.weight_decay = 0.0;  // decay would corrode the identity blocks
    AdamWState state = AdamWState::init_like(views(pair), ab_opt);

    TransferPair best = pair;
    double best_loss = res.pre_loss;
    const std::size_t bsz = std::min(batch_size, data.size());

    for (int epoch = 0; epoch < n_epochs; ++epoch) {
        const Dataset batch =
            sample_batch(data, bsz, derive_seed(seed, {0x61627472ULL, std::uint64_t(epoch)}));
        const Network net = apply_transfer(pair, src, new_arch);
        const Gradients gnet = backward(net, batch.x, batch.y, kind);

        // chain rule through V_i = A_i W_i B_i^T and b_i = A_i b_old_i
        TransferPair grad;
        grad.a.reserve(pair.a.size());
        grad.b.reserve(pair.b.size());
        bool finite = true;
        for (std::size_t i = 0; i < pair.a.size(); ++i) {
            const Matrix& w = src.layers[i].w;
            const Matrix& gv = gnet.w[i];
            Matrix ga = matmul_nt(matmul_nn(gv, pair.b[i]), w);
            const auto& b_old = src.layers[i].b;
            for (std::size_t r = 0; r < ga.rows(); ++r)
                axpy(gnet.b[i][r], {b_old.data(), b_old.size()}, ga.row(r));
            Matrix gb = matmul_nn(matmul_tn(gv, pair.a[i]), w);
            finite = finite && ga.all_finite() && gb.all_finite();
            grad.a.push_back(std::move(ga));
            grad.b.push_back(std::move(gb));
        }
        if (!finite) {
            res.diverged = true;
            break;
        }

        ConstParamViews gviews;
        for (const auto& m : grad.a) gviews.push_back(m.view());
        for (const auto& m : grad.b) gviews.push_back(m.view());
        adamw_step(state, views(pair), gviews, eta_ab);

        const double full = eval_full(pair);
        if (!std::isfinite(full)) {
            res.diverged = true;
            break;
        }
        if (full < best_loss) {
            best_loss = full;
            best = pair;
        }
    }
    res.pair = std::move(best);
    res.post_loss = best_loss;
    return res;
}

struct MorphResult {
    Network net;
    double pre_loss = 0.0;   // task loss right after the identity-like init
    double post_loss = 0.0;  // task loss of the returned network
    double awb_norm = 0.0;   // Frobenius norm of the transferred weights
    bool diverged = false;
};

// plan -> identity-like init -> A/B training -> apply. With an unchanged
// architecture and zero training epochs this is an exact fixed point.
inline MorphResult morph(const Network& src, const Architecture& new_arch, const Dataset& data,
                         int n_ab_epochs, double eta_ab, std::size_t batch_size, LossKind kind,
                         std::uint64_t seed) {
    const TransferPlan plan = plan_ffn_shapes(src.arch, new_arch);
    TransferPair pair = init_ab(plan, derive_seed(seed, {0x696e6962ULL}));
    TrainAbResult trained =
        train_ab(src, std::move(pair), new_arch, data, n_ab_epochs, eta_ab, seed, batch_size, kind);
    MorphResult res;
    res.net = apply_transfer(trained.pair, src, new_arch);
    res.pre_loss = trained.pre_loss;
    res.post_loss = trained.post_loss;
    res.diverged = trained.diverged;
    double sq = 0.0;
    for (const auto& l : res.net.layers) {
        const double f = frobenius_norm(l.w);
        sq += f * f;
    }
    res.awb_norm = std::sqrt(sq);
    return res;
}

}  // namespace morphcl
