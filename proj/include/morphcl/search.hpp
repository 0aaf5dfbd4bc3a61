#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <vector>

#include "morphcl/hamiltonian.hpp"
#include "morphcl/network.hpp"
#include "morphcl/optim.hpp"

namespace morphcl {

// Integer directions over the width vector. Entries touching the input or
// output width must stay zero.
struct DirectionSet {
    std::vector<std::vector<int>> dirs;

    void validate(std::size_t width_count) const {
        detail::require(!dirs.empty(), "direction set: needs at least one direction");
        bool any_nonzero = false;
        for (const auto& d : dirs) {
            detail::require(d.size() == width_count, "direction set: length mismatch");
            detail::require(d.front() == 0 && d.back() == 0,
                            "direction set: input/output widths must stay fixed");
            for (int v : d) any_nonzero = any_nonzero || v != 0;
        }
        detail::require(any_nonzero, "direction set: all directions are zero");
    }
};

// +/- unit vector per hidden layer.
inline DirectionSet default_directions(const Architecture& arch) {
    DirectionSet d;
    for (std::size_t i = 1; i + 1 < arch.widths.size(); ++i) {
        std::vector<int> up(arch.widths.size(), 0), down(arch.widths.size(), 0);
        up[i] = 1;
        down[i] = -1;
        d.dirs.push_back(up);
        d.dirs.push_back(down);
    }
    return d;
}

struct SearchConfig {
    int step = 16;                 // width increment per direction
    double threshold_ratio = 0.9;  // stop once loss <= ratio * initial loss
    int max_rounds = 5;
    int eval_epochs = 100;
    std::size_t eval_subset = 512;
    // candidate training loop settings
    double eval_lr = 1e-4;
    std::size_t eval_batch = 256;
    GradWeights eval_weights{};
    double sigma_x = 1e-2;
    double sigma_w = 1e-4;
    LossKind loss_kind = LossKind::mse;
    ActivationKind activation = ActivationKind::relu;
    AdamWConfig opt{};
    double clip_norm = 1.0;

    void validate() const {
        detail::require(step >= 0, "search: step must be >= 0");
        detail::require(threshold_ratio > 0.0 && threshold_ratio <= 1.0,
                        "search: threshold_ratio must be in (0, 1]");
        detail::require(max_rounds >= 1, "search: max_rounds must be >= 1");
    }
};

// One candidate per direction plus, for small direction sets (|D| <= 3), the
// pairwise-combined moves. Candidates with any width < 1 or equal to the
// incumbent are dropped; an empty result means the neighborhood is exhausted.
inline std::vector<Architecture> poll_points(const Architecture& x_s, const DirectionSet& d,
                                             int step) {
    x_s.validate();
    d.validate(x_s.widths.size());
    std::vector<std::vector<int>> moves(d.dirs.begin(), d.dirs.end());
    if (d.dirs.size() <= 3) {
        for (std::size_t i = 0; i < d.dirs.size(); ++i) {
            for (std::size_t j = i + 1; j < d.dirs.size(); ++j) {
                std::vector<int> sum(x_s.widths.size(), 0);
                for (std::size_t k = 0; k < sum.size(); ++k) sum[k] = d.dirs[i][k] + d.dirs[j][k];
                moves.push_back(std::move(sum));
            }
        }
    }
    std::vector<Architecture> out;
    std::vector<std::vector<int>> seen;
    for (const auto& m : moves) {
        Architecture cand = x_s;
        for (std::size_t k = 0; k < m.size(); ++k) cand.widths[k] += step * m[k];
        if (cand.widths == x_s.widths) continue;  // no-op move
        if (!cand.valid()) continue;
        if (std::find(seen.begin(), seen.end(), cand.widths) != seen.end()) continue;
        seen.push_back(cand.widths);
        out.push_back(std::move(cand));
    }
    return out;
}

// Candidate evaluations are pure in (architecture, search seed): the network
// init and the training stream are both derived from a hash of the widths.
inline std::uint64_t candidate_seed(const Architecture& arch, std::uint64_t search_seed) {
    std::uint64_t h = mix64(search_seed ^ 0x63616e64ULL);
    for (int w : arch.widths) h = mix64(h ^ static_cast<std::uint64_t>(w));
    return h;
}

// Trains a fresh Glorot network of the candidate architecture on the subset
// with the plain continual step (no replay at this stage) and returns the
// final loss over the whole subset. Divergence yields +inf so the candidate
// loses every comparison.
inline double evaluate_candidate(const Architecture& cand, const Dataset& subset, int eval_epochs,
                                 std::uint64_t seed, const SearchConfig& cfg) {
    detail::require(!subset.empty(), "evaluate_candidate: empty subset");
    detail::require(eval_epochs >= 0, "evaluate_candidate: eval_epochs must be >= 0");
    Network net = init_network(cand, cfg.activation, derive_seed(seed, {0x65696eULL}));
    AdamWState opt = AdamWState::init_like(param_views(net), cfg.opt);
    const std::size_t bsz = std::min(cfg.eval_batch, subset.size());
    const Dataset empty_replay;
    for (int e = 0; e < eval_epochs; ++e) {
        const Dataset batch = sample_batch(subset, bsz, derive_seed(seed, {0x65626174ULL, std::uint64_t(e)}));
        HamiltonianResult h =
            hamiltonian_grad_full(net, batch, empty_replay, cfg.eval_weights, 0, cfg.loss_kind,
                                  cfg.sigma_x, cfg.sigma_w, derive_seed(seed, {0x65677264ULL, std::uint64_t(e)}));
        if (!std::isfinite(h.loss_current)) return std::numeric_limits<double>::infinity();
        clip_grad(grad_views_mut(h.grad), cfg.clip_norm);
        adamw_step(opt, param_views(net), grad_views(h.grad), cfg.eval_lr);
    }
    const double final_loss = loss(forward(net, subset.x), subset.y, cfg.loss_kind);
    return std::isfinite(final_loss) ? final_loss : std::numeric_limits<double>::infinity();
}

struct SearchEvent {
    int round = 0;
    std::vector<int> candidate;
    double loss = 0.0;
    bool accepted = false;
};

struct SearchResult {
    Architecture arch;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    int rounds = 0;
    std::size_t evaluations = 0;
    std::vector<SearchEvent> trace;
};

using CandidateEval = std::function<double(const Architecture&, std::uint64_t cand_seed)>;

// Greedy neighborhood descent over poll points. Each round polls the
// incumbent's neighbors in order and moves on strict improvement (ties keep
// the incumbent). Terminates once the loss falls below threshold_ratio times
// the initial loss or after max_rounds rounds. The step size stays fixed.
inline SearchResult ndds_search(const Architecture& psi, const DirectionSet& dirs,
                                const SearchConfig& cfg, std::uint64_t seed,
                                const CandidateEval& eval) {
    psi.validate();
    cfg.validate();
    SearchResult res;
    res.arch = psi;

    std::map<std::vector<int>, double> cache;
    auto eval_cached = [&](const Architecture& a) {
        auto it = cache.find(a.widths);
        if (it != cache.end()) return it->second;
        const double l = eval(a, candidate_seed(a, seed));
        cache.emplace(a.widths, l);
        ++res.evaluations;
        return l;
    };

    double cur_loss = eval_cached(psi);
    res.initial_loss = cur_loss;
    const double threshold = cfg.threshold_ratio * res.initial_loss;

    Architecture x_s = psi;
    int round = 0;
    while (cur_loss > threshold && round < cfg.max_rounds) {
        const auto polls = poll_points(x_s, dirs, cfg.step);
        if (polls.empty()) break;  // exhausted neighborhood
        bool moved = false;
        for (const auto& cand : polls) {
            const double l = eval_cached(cand);
            SearchEvent ev;
            ev.round = round;
            ev.candidate = cand.widths;
            ev.loss = l;
            ev.accepted = l < cur_loss;
            res.trace.push_back(ev);
            if (l < cur_loss) {
                x_s = cand;
                cur_loss = l;
                moved = true;
            }
        }
        ++round;
        if (!moved) break;
        if (cur_loss <= threshold) break;
    }
    res.arch = x_s;
    res.final_loss = cur_loss;
    res.rounds = round;
    return res;
}

inline SearchResult ndds_search(const Architecture& psi, const Dataset& data,
                                const SearchConfig& cfg, std::uint64_t seed) {
    DirectionSet dirs = default_directions(psi);
    return ndds_search(psi, dirs, cfg, seed, [&](const Architecture& a, std::uint64_t s) {
        return evaluate_candidate(a, data, cfg.eval_epochs, s, cfg);
    });
}

// True when the loss ratio strictly exceeds the threshold; an unusable
// previous loss never triggers.
inline bool should_change(double j_curr, double j_prev, double theta) {
    if (j_prev <= 0.0) return false;
    return j_curr / j_prev > theta;
}

}  // namespace morphcl
