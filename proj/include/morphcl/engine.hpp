#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "morphcl/hamiltonian.hpp"
#include "morphcl/replay.hpp"
#include "morphcl/search.hpp"
#include "morphcl/transfer.hpp"

namespace morphcl {

enum class Condition { C1, C2, C3, C4 };

inline std::string to_string(Condition c) {
    switch (c) {
        case Condition::C1: return "C1";
        case Condition::C2: return "C2";
        case Condition::C3: return "C3";
        case Condition::C4: return "C4";
    }
    throw std::logic_error("unknown condition");
}

inline Condition condition_from_string(const std::string& s) {
    if (s == "C1") return Condition::C1;
    if (s == "C2") return Condition::C2;
    if (s == "C3") return Condition::C3;
    if (s == "C4") return Condition::C4;
    throw std::invalid_argument("unknown condition: " + s);
}

struct EngineConfig {
    int epochs_per_task = 500;
    std::size_t batch_size = 1024;
    double eta0 = 1e-4;
    double eta_min = 1e-6;
    ScheduleKind schedule = ScheduleKind::cosine;  // C2..C4; C1 is constant
    int warmup_epochs = 25;
    double warmup_lr_factor = 0.1;
    GradWeights weights{};
    bool adaptive_weights = true;
    double sigma_x2 = 1e-4;
    double sigma_w2 = 1e-8;
    double theta_loss = 1.1;
    double clip_norm = 1.0;
    AdamWConfig opt{};
    LossKind loss_kind = LossKind::mse;
    ActivationKind activation = ActivationKind::relu;
    SearchConfig search{};
    int n_ab = 500;
    double eta_ab = 1e-3;
    double recent_quota = 0.1;
    double older_quota = 0.8;
    int loss_window = 10;  // epochs averaged for transition decisions
    int eval_every = 10;   // replay-metric cadence

    double sigma_x() const { return std::sqrt(sigma_x2); }
    double sigma_w() const { return std::sqrt(sigma_w2); }
};

struct EpochRow {
    int task = 0;
    int epoch = 0;  // contiguous within a task, warmup included
    bool warmup = false;
    double lr = 0.0;
    double h_loss = 0.0;    // blended objective value
    double cur_loss = 0.0;  // current-task batch loss
    double grad_norm = 0.0;
    std::optional<double> replay_metric;
    std::vector<int> arch;
};

struct MorphEvent {
    int task = 0;
    std::vector<int> psi_old, psi_new;
    double pre_loss = 0.0, post_loss = 0.0;
    double awb_norm = 0.0;
    int n_ab = 0;
    bool transferred = false;  // false for a plain reinit (C3)
};

struct TaskLog {
    std::vector<EpochRow> rows;
    std::vector<SearchEvent> search_trace;
    std::optional<MorphEvent> morph;
    std::optional<std::string> warning;
    GradWeights applied_weights{};
    double j_curr = 0.0, j_prev = 0.0;
};

// Per-condition behavior switches derived from the experimental regime.
struct ConditionTraits {
    bool warmup = false;
    bool adaptive = false;
    bool cosine = false;
    bool balanced_replay = false;
    bool search = false;
    bool transfer = false;  // search + AWB instead of reinit
};

inline ConditionTraits condition_traits(Condition c) {
    ConditionTraits t;
    switch (c) {
        case Condition::C1: break;
        case Condition::C2:
            t.warmup = t.adaptive = t.cosine = t.balanced_replay = true;
            break;
        case Condition::C3:
            t.warmup = t.adaptive = t.cosine = t.balanced_replay = t.search = true;
            break;
        case Condition::C4:
            t.warmup = t.adaptive = t.cosine = t.balanced_replay = t.search = t.transfer = true;
            break;
    }
    return t;
}

// Trains on current-task data only with weights (1,0,0) at a reduced rate.
inline Network warmup(Network net, const Dataset& task_data, int n_epochs, double eta0,
                      const EngineConfig& cfg, std::uint64_t seed, AdamWState* opt_state = nullptr,
                      std::vector<double>* losses = nullptr) {
    detail::require(n_epochs >= 0, "warmup: n_epochs must be >= 0");
    if (n_epochs == 0) return net;
    AdamWState local = AdamWState::init_like(param_views(net), cfg.opt);
    AdamWState& opt = opt_state ? *opt_state : local;
    const GradWeights w{1.0, 0.0, 0.0};
    const Dataset empty;
    const std::size_t bsz = std::min(cfg.batch_size, task_data.size());
    for (int e = 0; e < n_epochs; ++e) {
        const Dataset batch =
            sample_batch(task_data, bsz, derive_seed(seed, {0x7762ULL, std::uint64_t(e)}));
        HamiltonianResult h = hamiltonian_grad_full(net, batch, empty, w, 0, cfg.loss_kind,
                                                    cfg.sigma_x(), cfg.sigma_w(),
                                                    derive_seed(seed, {0x7767ULL, std::uint64_t(e)}));
        clip_grad(grad_views_mut(h.grad), cfg.clip_norm);
        adamw_step(opt, param_views(net), grad_views(h.grad), cfg.warmup_lr_factor * eta0);
        if (losses) losses->push_back(h.loss_current);
    }
    return net;
}

// Drives one (condition, seed) run across a task sequence. Owns the network,
// architecture, optimizer state, and the transition statistics that carry
// between tasks.
class ContinualTrainer {
  public:
    ContinualTrainer(Condition cond, const EngineConfig& cfg, Network initial,
                     std::uint64_t run_seed)
        : cond_(cond), traits_(condition_traits(cond)), cfg_(cfg), net_(std::move(initial)),
          run_seed_(run_seed) {
        if (cond == Condition::C1) {
            detail::require(cfg.warmup_epochs == 0 && !cfg.adaptive_weights &&
                                cfg.schedule == ScheduleKind::constant,
                            "C1 does not accept warmup, adaptive weights, or a decaying schedule");
        }
        opt_ = AdamWState::init_like(param_views(net_), cfg_.opt);
    }

    const Network& net() const { return net_; }
    const Architecture& arch() const { return net_.arch; }

    // One task of the sequence. Appends the task's data to the buffer at the
    // end. replay_eval, when given, is scored every eval_every epochs.
    TaskLog train_task(const Dataset& task_data, ReplayBuffer& buf, int t,
                       const Dataset* replay_eval = nullptr) {
        detail::require(!task_data.empty(), "train_task: empty task data");
        TaskLog log;
        GradWeights weights = cfg_.weights;
        int epoch_index = 0;

        if (traits_.warmup && t > 0 && cfg_.warmup_epochs > 0) {
            std::vector<double> warmup_losses;
            net_ = warmup(std::move(net_), task_data, cfg_.warmup_epochs, cfg_.eta0, cfg_,
                          derive_seed(run_seed_, {0x7761726dULL, std::uint64_t(t)}), &opt_,
                          &warmup_losses);
            for (double l : warmup_losses) {
                EpochRow row;
                row.task = t;
                row.epoch = epoch_index++;
                row.warmup = true;
                row.lr = cfg_.warmup_lr_factor * cfg_.eta0;
                row.h_loss = l;
                row.cur_loss = l;
                row.arch = net_.arch.widths;
                log.rows.push_back(std::move(row));
            }
            log.j_curr = window_mean(warmup_losses);
            log.j_prev = j_prev_;

            if (traits_.adaptive) weights = adapt_weights(log.j_curr, log.j_prev);

            if (traits_.search && should_change(log.j_curr, log.j_prev, cfg_.theta_loss)) {
                run_search_step(task_data, buf, t, log);
            }
        } else if (traits_.adaptive && t > 0) {
            // no warmup window configured; fall back to one probe batch
            const Dataset probe = sample_batch(
                task_data, std::min(cfg_.batch_size, task_data.size()),
                derive_seed(run_seed_, {0x70726f62ULL, std::uint64_t(t)}));
            log.j_curr = loss(forward(net_, probe.x), probe.y, cfg_.loss_kind);
            log.j_prev = j_prev_;
            weights = adapt_weights(log.j_curr, log.j_prev);
            if (traits_.search && should_change(log.j_curr, log.j_prev, cfg_.theta_loss))
                run_search_step(task_data, buf, t, log);
        }
        log.applied_weights = weights;

        Schedule sched;
        if (traits_.cosine && cfg_.schedule != ScheduleKind::constant) {
            sched = Schedule::cosine_lr(cfg_.eta0, cfg_.eta_min, cfg_.epochs_per_task);
            sched.kind = cfg_.schedule;
        } else {
            sched = Schedule::constant_lr(cfg_.eta0);
        }

        const std::size_t bsz = std::min(cfg_.batch_size, task_data.size());
        std::vector<double> tail;
        for (int e = 0; e < cfg_.epochs_per_task; ++e) {
            const Dataset batch_c = sample_batch(
                task_data, bsz, derive_seed(run_seed_, {0x6263ULL, std::uint64_t(t), std::uint64_t(e)}));
            Dataset batch_e;
            if (t > 0 && !buf.empty()) {
                const std::uint64_t es =
                    derive_seed(run_seed_, {0x6265ULL, std::uint64_t(t), std::uint64_t(e)});
                batch_e = traits_.balanced_replay
                              ? buf.sample_balanced(bsz, t, es, cfg_.recent_quota, cfg_.older_quota)
                              : buf.sample_uniform(bsz, es);
            }
            HamiltonianResult h = hamiltonian_grad_full(
                net_, batch_c, batch_e, weights, t, cfg_.loss_kind, cfg_.sigma_x(), cfg_.sigma_w(),
                derive_seed(run_seed_, {0x6467ULL, std::uint64_t(t), std::uint64_t(e)}));
            const double pre_norm = clip_grad(grad_views_mut(h.grad), cfg_.clip_norm);
            const double lr = schedule_lr(sched, e);
            adamw_step(opt_, param_views(net_), grad_views(h.grad), lr);

            EpochRow row;
            row.task = t;
            row.epoch = epoch_index++;
            row.lr = lr;
            row.h_loss = h.blended(weights, t > 0 && !batch_e.empty());
            row.cur_loss = h.loss_current;
            row.grad_norm = pre_norm;
            row.arch = net_.arch.widths;
            if (replay_eval && !replay_eval->empty() &&
                (e % cfg_.eval_every == 0 || e + 1 == cfg_.epochs_per_task)) {
                const Matrix pred = forward(net_, replay_eval->x);
                row.replay_metric = cfg_.loss_kind == LossKind::mse
                                        ? loss(pred, replay_eval->y, cfg_.loss_kind)
                                        : accuracy(pred, replay_eval->y);
            }
            log.rows.push_back(std::move(row));
            tail.push_back(h.blended(weights, t > 0 && !batch_e.empty()));
        }
        j_prev_ = window_mean(tail);
        buf.add_task(task_data, t);
        return log;
    }

  private:
    double window_mean(const std::vector<double>& v) const {
        if (v.empty()) return 0.0;
        const std::size_t w = std::min<std::size_t>(v.size(), std::size_t(cfg_.loss_window));
        double s = 0.0;
        for (std::size_t i = v.size() - w; i < v.size(); ++i) s += v[i];
        return s / static_cast<double>(w);
    }

    // Architecture step shared by C3 and C4: search, then either reinit
    // (C3) or transfer (C4).
    void run_search_step(const Dataset& task_data, const ReplayBuffer& buf, int t, TaskLog& log) {
        Dataset pool = task_data;
        if (!buf.empty()) {
            const std::size_t n_prev = std::min<std::size_t>(buf.size(), cfg_.search.eval_subset);
            pool = concat(pool, buf.sample_uniform(
                                    n_prev, derive_seed(run_seed_, {0x73756273ULL, std::uint64_t(t)})));
        }
        const std::size_t subset_n = std::min<std::size_t>(pool.size(), cfg_.search.eval_subset);
        const Dataset subset =
            sample_batch(pool, subset_n, derive_seed(run_seed_, {0x73756274ULL, std::uint64_t(t)}));

        SearchConfig scfg = cfg_.search;
        scfg.loss_kind = cfg_.loss_kind;
        scfg.activation = cfg_.activation;
        scfg.opt = cfg_.opt;
        scfg.clip_norm = cfg_.clip_norm;
        scfg.sigma_x = cfg_.sigma_x();
        scfg.sigma_w = cfg_.sigma_w();

        SearchResult sr;
        try {
            sr = ndds_search(net_.arch, subset,
                             scfg, derive_seed(run_seed_, {0x736565ULL, std::uint64_t(t)}));
        } catch (const std::exception& e) {
            log.warning = std::string("architecture search failed: ") + e.what();
            return;
        }
        for (auto& ev : sr.trace) log.search_trace.push_back(ev);
        if (sr.arch == net_.arch) return;  // nothing better nearby

        MorphEvent ev;
        ev.task = t;
        ev.psi_old = net_.arch.widths;
        ev.psi_new = sr.arch.widths;
        if (traits_.transfer) {
            MorphResult mr = morph(net_, sr.arch, task_data, cfg_.n_ab, cfg_.eta_ab,
                                   cfg_.batch_size, cfg_.loss_kind,
                                   derive_seed(run_seed_, {0x6d726668ULL, std::uint64_t(t)}));
            if (mr.diverged) log.warning = "A/B training diverged; kept best pair";
            net_ = std::move(mr.net);
            ev.pre_loss = mr.pre_loss;
            ev.post_loss = mr.post_loss;
            ev.awb_norm = mr.awb_norm;
            ev.n_ab = cfg_.n_ab;
            ev.transferred = true;
        } else {
            net_ = init_network(sr.arch, cfg_.activation,
                                derive_seed(run_seed_, {0x7265696eULL, std::uint64_t(t)}));
            ev.pre_loss = sr.initial_loss;
            ev.post_loss = sr.final_loss;
            ev.transferred = false;
        }
        opt_ = AdamWState::init_like(param_views(net_), cfg_.opt);
        log.morph = ev;
    }

    Condition cond_;
    ConditionTraits traits_;
    EngineConfig cfg_;
    Network net_;
    AdamWState opt_;
    std::uint64_t run_seed_;
    double j_prev_ = 0.0;
};

}  // namespace morphcl
