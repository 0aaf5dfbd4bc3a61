#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "morphcl/engine.hpp"
#include "morphcl/tasks.hpp"

namespace morphcl {

class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class ExperimentKind { sine2, sine10, sine_noisy5, sine_shock3, image2, image10 };

inline std::string to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::sine2: return "sine2";
        case ExperimentKind::sine10: return "sine10";
        case ExperimentKind::sine_noisy5: return "sine_noisy5";
        case ExperimentKind::sine_shock3: return "sine_shock3";
        case ExperimentKind::image2: return "image2";
        case ExperimentKind::image10: return "image10";
    }
    throw std::logic_error("unknown experiment kind");
}

inline ExperimentKind experiment_from_string(const std::string& s) {
    if (s == "sine2") return ExperimentKind::sine2;
    if (s == "sine10") return ExperimentKind::sine10;
    if (s == "sine_noisy5") return ExperimentKind::sine_noisy5;
    if (s == "sine_shock3") return ExperimentKind::sine_shock3;
    if (s == "image2") return ExperimentKind::image2;
    if (s == "image10") return ExperimentKind::image10;
    throw ConfigError("unknown experiment: " + s);
}

inline int experiment_task_count(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::sine2: return 2;
        case ExperimentKind::sine10: return 10;
        case ExperimentKind::sine_noisy5: return 5;
        case ExperimentKind::sine_shock3: return 3;
        case ExperimentKind::image2: return 2;
        case ExperimentKind::image10: return 10;
    }
    throw std::logic_error("unknown experiment kind");
}

inline bool experiment_is_image(ExperimentKind k) {
    return k == ExperimentKind::image2 || k == ExperimentKind::image10;
}

// Data-generation knobs, config-exposed.
struct DataConfig {
    std::size_t n_samples = 2000;
    double amp_lo = 0.75, amp_hi = 1.25;
    double phase_lo = -0.35, phase_hi = 0.35;
    double frequency = M_PI / 180.0;
    double domain_lo = -90.0, domain_hi = 90.0;
    double noise_base = 0.02;
    double train_frac = 0.8;
    double input_scale = 90.0;  // sine inputs are divided by this
    std::size_t images_per_class = 200;
    std::string images_path, labels_path;  // explicit IDX files, optional
};

struct RunConfig {
    ExperimentKind experiment = ExperimentKind::sine10;
    std::vector<Condition> conditions{Condition::C1, Condition::C2, Condition::C3, Condition::C4};
    std::vector<std::uint64_t> seeds{0, 1, 2};
    std::vector<int> hidden;  // empty -> experiment default
    EngineConfig engine{};
    std::size_t buffer_capacity = 200000;
    DataConfig data{};
    std::string out_dir = "out";
    int workers = 0;  // 0 -> hardware concurrency

    int task_count() const { return experiment_task_count(experiment); }
    LossKind loss_kind() const {
        return experiment_is_image(experiment) ? LossKind::cross_entropy_with_logits
                                               : LossKind::mse;
    }
    std::vector<int> default_hidden() const {
        return experiment_is_image(experiment) ? std::vector<int>{512, 64}
                                               : std::vector<int>{64, 64, 64};
    }
    Architecture architecture() const {
        const int in = experiment_is_image(experiment) ? 784 : 1;
        const int out = experiment_is_image(experiment) ? 10 : 1;
        std::vector<int> widths{in};
        const auto h = hidden.empty() ? default_hidden() : hidden;
        widths.insert(widths.end(), h.begin(), h.end());
        widths.push_back(out);
        return Architecture(widths);
    }
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                       const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) {
        try {
            out = j.at(key).get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
        }
    }
}

}  // namespace detail

// Parses a config document. Every field is optional; the defaults reproduce
// the reference hyperparameters at full experiment scale.
inline RunConfig parse_config(const nlohmann::json& j) {
    RunConfig cfg;
    detail::check_keys(
        j,
        {"experiment", "conditions", "seeds", "hidden", "epochs_per_task", "batch_size", "eta0",
         "eta_min", "schedule", "warmup_epochs", "warmup_lr_factor", "grad_weights",
         "adaptive_weights", "sigma_x2", "sigma_w2", "theta_loss", "clip_norm", "betas",
         "weight_decay", "buffer_capacity", "recent_quota", "older_quota", "n_ab", "eta_ab",
         "search", "task", "out_dir", "workers", "eval_every", "loss_window"},
        "config");

    if (j.contains("experiment"))
        cfg.experiment = experiment_from_string(j.at("experiment").get<std::string>());
    if (j.contains("conditions")) {
        cfg.conditions.clear();
        for (const auto& c : j.at("conditions"))
            cfg.conditions.push_back(condition_from_string(c.get<std::string>()));
        if (cfg.conditions.empty()) throw ConfigError("conditions must be non-empty");
    }
    if (j.contains("seeds")) {
        cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        if (cfg.seeds.empty()) throw ConfigError("seeds must be non-empty");
    }
    detail::read_if(j, "hidden", cfg.hidden);

    auto& e = cfg.engine;
    detail::read_if(j, "epochs_per_task", e.epochs_per_task);
    detail::read_if(j, "batch_size", e.batch_size);
    detail::read_if(j, "eta0", e.eta0);
    detail::read_if(j, "eta_min", e.eta_min);
    if (j.contains("schedule")) {
        const auto s = j.at("schedule").get<std::string>();
        if (s == "cosine") e.schedule = ScheduleKind::cosine;
        else if (s == "constant") e.schedule = ScheduleKind::constant;
        else if (s == "step") e.schedule = ScheduleKind::step;
        else if (s == "exponential") e.schedule = ScheduleKind::exponential;
        else if (s == "linear") e.schedule = ScheduleKind::linear;
        else throw ConfigError("unknown schedule: " + s);
    }
    detail::read_if(j, "warmup_epochs", e.warmup_epochs);
    detail::read_if(j, "warmup_lr_factor", e.warmup_lr_factor);
    if (j.contains("grad_weights")) {
        const auto w = j.at("grad_weights").get<std::vector<double>>();
        if (w.size() != 3) throw ConfigError("grad_weights needs exactly [alpha, beta, gamma]");
        e.weights = {w[0], w[1], w[2]};
    }
    detail::read_if(j, "adaptive_weights", e.adaptive_weights);
    detail::read_if(j, "sigma_x2", e.sigma_x2);
    detail::read_if(j, "sigma_w2", e.sigma_w2);
    detail::read_if(j, "theta_loss", e.theta_loss);
    detail::read_if(j, "clip_norm", e.clip_norm);
    if (j.contains("betas")) {
        const auto b = j.at("betas").get<std::vector<double>>();
        if (b.size() != 2) throw ConfigError("betas needs exactly [beta1, beta2]");
        e.opt.beta1 = b[0];
        e.opt.beta2 = b[1];
    }
    detail::read_if(j, "weight_decay", e.opt.weight_decay);
    detail::read_if(j, "buffer_capacity", cfg.buffer_capacity);
    detail::read_if(j, "recent_quota", e.recent_quota);
    detail::read_if(j, "older_quota", e.older_quota);
    detail::read_if(j, "n_ab", e.n_ab);
    detail::read_if(j, "eta_ab", e.eta_ab);
    detail::read_if(j, "eval_every", e.eval_every);
    detail::read_if(j, "loss_window", e.loss_window);

    if (j.contains("search")) {
        const auto& s = j.at("search");
        detail::check_keys(s,
                           {"step", "threshold_ratio", "max_rounds", "eval_epochs", "eval_subset",
                            "eval_lr", "eval_batch"},
                           "search");
        detail::read_if(s, "step", e.search.step);
        detail::read_if(s, "threshold_ratio", e.search.threshold_ratio);
        detail::read_if(s, "max_rounds", e.search.max_rounds);
        detail::read_if(s, "eval_epochs", e.search.eval_epochs);
        detail::read_if(s, "eval_subset", e.search.eval_subset);
        detail::read_if(s, "eval_lr", e.search.eval_lr);
        detail::read_if(s, "eval_batch", e.search.eval_batch);
    }
    if (j.contains("task")) {
        const auto& t = j.at("task");
        detail::check_keys(t,
                           {"n_samples", "amp", "phase", "frequency", "domain", "noise_base",
                            "train_frac", "input_scale", "images_per_class", "images_path",
                            "labels_path"},
                           "task");
        detail::read_if(t, "n_samples", cfg.data.n_samples);
        if (t.contains("amp")) {
            const auto a = t.at("amp").get<std::vector<double>>();
            if (a.size() != 2) throw ConfigError("task.amp needs [lo, hi]");
            cfg.data.amp_lo = a[0];
            cfg.data.amp_hi = a[1];
        }
        if (t.contains("phase")) {
            const auto p = t.at("phase").get<std::vector<double>>();
            if (p.size() != 2) throw ConfigError("task.phase needs [lo, hi]");
            cfg.data.phase_lo = p[0];
            cfg.data.phase_hi = p[1];
        }
        detail::read_if(t, "frequency", cfg.data.frequency);
        if (t.contains("domain")) {
            const auto d = t.at("domain").get<std::vector<double>>();
            if (d.size() != 2) throw ConfigError("task.domain needs [lo, hi]");
            cfg.data.domain_lo = d[0];
            cfg.data.domain_hi = d[1];
        }
        detail::read_if(t, "noise_base", cfg.data.noise_base);
        detail::read_if(t, "train_frac", cfg.data.train_frac);
        detail::read_if(t, "input_scale", cfg.data.input_scale);
        detail::read_if(t, "images_per_class", cfg.data.images_per_class);
        detail::read_if(t, "images_path", cfg.data.images_path);
        detail::read_if(t, "labels_path", cfg.data.labels_path);
    }
    detail::read_if(j, "out_dir", cfg.out_dir);
    detail::read_if(j, "workers", cfg.workers);

    // sanity on documented ranges
    if (e.eta0 <= 0.0 || e.eta_min <= 0.0 || e.eta0 < e.eta_min)
        throw ConfigError("learning rates must satisfy eta0 >= eta_min > 0");
    if (e.epochs_per_task < 1) throw ConfigError("epochs_per_task must be >= 1");
    if (e.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (e.warmup_epochs < 0) throw ConfigError("warmup_epochs must be >= 0");
    if (e.recent_quota < 0 || e.older_quota < 0 || e.recent_quota + e.older_quota > 1.0)
        throw ConfigError("replay quotas must be non-negative and sum to at most 1");
    if (e.n_ab < 0) throw ConfigError("n_ab must be >= 0");
    if (cfg.data.train_frac <= 0.0 || cfg.data.train_frac >= 1.0)
        throw ConfigError("task.train_frac must be in (0, 1)");
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    return parse_config(j);
}

// The engine configuration a given condition actually runs with. C1 keeps a
// constant rate and no transition heuristics.
inline EngineConfig engine_config_for(Condition cond, const RunConfig& cfg) {
    EngineConfig e = cfg.engine;
    e.loss_kind = cfg.loss_kind();
    if (cond == Condition::C1) {
        e.warmup_epochs = 0;
        e.adaptive_weights = false;
        e.schedule = ScheduleKind::constant;
    }
    if (e.search.eval_lr <= 0.0) e.search.eval_lr = e.eta0;
    if (e.search.eval_batch == 0) e.search.eval_batch = e.batch_size;
    return e;
}

}  // namespace morphcl
