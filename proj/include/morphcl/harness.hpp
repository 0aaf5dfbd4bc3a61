#pragma once

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "morphcl/config.hpp"
#include "morphcl/metrics.hpp"

namespace morphcl {

namespace detail {

inline std::string fmt_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string widths_label(const std::vector<int>& w) {
    std::string s;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(w[i]);
    }
    return s;
}

}  // namespace detail

struct RunMetrics {
    double avg = 0.0;
    std::optional<double> bwt, forgetting;
    double fwt = 0.0;  // emitted for table parity; identically zero
};

struct RunResult {
    Condition condition{};
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    RunMetrics metrics{};
    std::vector<std::vector<double>> perf;  // lower-triangular R
    std::vector<MorphEvent> morphs;
    std::vector<std::string> warnings;
    std::vector<int> final_arch;
    double final_h_loss = 0.0;  // mean blended loss over the last window
    // mean hamiltonian loss per epoch, concatenated over tasks (for curves)
    std::vector<double> h_curve;
    std::string log_path, summary_path;
};

struct RunArtifact {
    std::string out_dir;
    std::string metrics_csv, report_csv, svg_path, morph_csv;
    std::vector<RunResult> runs;
    bool any_failed = false;
};

// ---------------------------------------------------------------------------
// Task sequence assembly
// ---------------------------------------------------------------------------

// All conditions for a given seed must see bit-identical task data, splits,
// and initial network; everything here depends only on (cfg, seed).
inline std::vector<Dataset> build_tasks(const RunConfig& cfg, std::uint64_t seed) {
    const int T = cfg.task_count();
    TaskGenConfig g;
    g.n_samples = cfg.data.n_samples;
    g.amp_lo = cfg.data.amp_lo;
    g.amp_hi = cfg.data.amp_hi;
    g.phase_lo = cfg.data.phase_lo;
    g.phase_hi = cfg.data.phase_hi;
    g.frequency = cfg.data.frequency;
    g.domain_lo = cfg.data.domain_lo;
    g.domain_hi = cfg.data.domain_hi;
    g.noise_base = cfg.data.noise_base;

    std::vector<Dataset> tasks;
    switch (cfg.experiment) {
        case ExperimentKind::sine2:
        case ExperimentKind::sine10:
            tasks = make_task_sequence(TaskSequenceKind::sine, T, seed, g);
            break;
        case ExperimentKind::sine_noisy5:
            tasks = make_task_sequence(TaskSequenceKind::sine_noisy, T, seed, g);
            break;
        case ExperimentKind::sine_shock3: {
            // two gentle tasks, then an abrupt amplitude/phase jump
            const double amps[3] = {1.0, 1.05, 1.7};
            const double phases[3] = {0.0, 0.12, 1.9};
            for (int t = 0; t < 3; ++t) {
                SineTaskSpec spec;
                spec.amplitude = amps[t];
                spec.phase = phases[t];
                spec.frequency = g.frequency;
                spec.n_samples = g.n_samples;
                spec.lo = g.domain_lo;
                spec.hi = g.domain_hi;
                Dataset ds = gen_sine_task(spec, derive_seed(seed, {0x7368636bULL, std::uint64_t(t)}));
                ds.task_id = t;
                tasks.push_back(std::move(ds));
            }
            break;
        }
        case ExperimentKind::image2:
        case ExperimentKind::image10: {
            Dataset source;
            std::string images = cfg.data.images_path, labels = cfg.data.labels_path;
            if (images.empty()) {
                if (const char* env = std::getenv("MORPHCL_DATA")) {
                    namespace fs = std::filesystem;
                    const fs::path dir(env);
                    const fs::path ip = dir / "train-images-idx3-ubyte";
                    const fs::path lp = dir / "train-labels-idx1-ubyte";
                    if (fs::exists(ip) && fs::exists(lp)) {
                        images = ip.string();
                        labels = lp.string();
                    }
                }
            }
            if (!images.empty()) {
                auto [imgs, lbls] = load_idx(images, labels);
                source.x = std::move(imgs);
                source.y = one_hot(lbls, 10);
            } else {
                source = synthetic_digits(cfg.data.images_per_class,
                                          derive_seed(seed, {0x66697874ULL}));
            }
            g.image_source = &source;
            g.rotate_shear = cfg.experiment == ExperimentKind::image10;
            tasks = make_task_sequence(TaskSequenceKind::image_digits, T, seed, g);
            break;
        }
    }
    if (!experiment_is_image(cfg.experiment) && cfg.data.input_scale != 0.0 &&
        cfg.data.input_scale != 1.0) {
        for (auto& t : tasks)
            for (double& v : t.x.data()) v /= cfg.data.input_scale;
    }
    return tasks;
}

// ---------------------------------------------------------------------------
// Single run
// ---------------------------------------------------------------------------

inline nlohmann::json epoch_row_json(const EpochRow& r) {
    nlohmann::json j{{"type", "epoch"}, {"task", r.task},       {"epoch", r.epoch},
                     {"warmup", r.warmup}, {"lr", r.lr},        {"h_loss", r.h_loss},
                     {"cur_loss", r.cur_loss}, {"grad_norm", r.grad_norm}, {"arch", r.arch}};
    if (r.replay_metric) j["replay_metric"] = *r.replay_metric;
    return j;
}

inline RunResult run_single(const RunConfig& cfg, Condition cond, std::uint64_t seed) {
    RunResult res;
    res.condition = cond;
    res.seed = seed;
    namespace fs = std::filesystem;
    const fs::path run_dir = fs::path(cfg.out_dir) / "runs";
    fs::create_directories(run_dir);
    const std::string stem =
        to_string(cfg.experiment) + "_" + to_string(cond) + "_seed" + std::to_string(seed);
    res.log_path = (run_dir / (stem + ".jsonl")).string();
    res.summary_path = (run_dir / (stem + ".summary.json")).string();

    try {
        const EngineConfig ecfg = engine_config_for(cond, cfg);
        const auto tasks = build_tasks(cfg, seed);
        const int T = static_cast<int>(tasks.size());

        std::vector<Dataset> train(T), test(T);
        for (int t = 0; t < T; ++t) {
            auto [tr, te] =
                split(tasks[t], cfg.data.train_frac, derive_seed(seed, {0x73706cULL, std::uint64_t(t)}));
            train[t] = std::move(tr);
            test[t] = std::move(te);
        }

        Network initial = init_network(cfg.architecture(), cfg.engine.activation,
                                       derive_seed(seed, {0x6e657430ULL}));
        ContinualTrainer trainer(cond, ecfg, std::move(initial), seed);
        ReplayBuffer buf(cfg.buffer_capacity, derive_seed(seed, {0x62756635ULL}));

        const bool classify = cfg.loss_kind() == LossKind::cross_entropy_with_logits;
        PerfMatrix R(T, classify ? MetricPolarity::accuracy : MetricPolarity::error);

        std::ofstream log(res.log_path);
        if (!log) throw std::runtime_error("cannot write " + res.log_path);

        Dataset eval_union;
        std::vector<double> divergences;
        for (int t = 0; t < T; ++t) {
            eval_union = concat(eval_union, test[t]);
            if (t > 0) divergences.push_back(task_divergence(tasks[t - 1], tasks[t]));
            TaskLog tl = trainer.train_task(train[t], buf, t, &eval_union);
            for (const auto& row : tl.rows) log << epoch_row_json(row).dump() << "\n";
            for (const auto& ev : tl.search_trace) {
                log << nlohmann::json{{"type", "search"},     {"task", t},
                                      {"round", ev.round},    {"candidate", ev.candidate},
                                      {"loss", ev.loss},      {"accepted", ev.accepted}}
                           .dump()
                    << "\n";
            }
            if (tl.morph) {
                const auto& m = *tl.morph;
                log << nlohmann::json{{"type", "morph"},        {"task", m.task},
                                      {"psi_old", m.psi_old},   {"psi_new", m.psi_new},
                                      {"pre_loss", m.pre_loss}, {"post_loss", m.post_loss},
                                      {"awb_norm", m.awb_norm}, {"n_ab", m.n_ab},
                                      {"transferred", m.transferred}}
                           .dump()
                    << "\n";
                res.morphs.push_back(m);
            }
            if (tl.warning) res.warnings.push_back(*tl.warning);

            // score every task seen so far on its test split
            for (int i = 0; i <= t; ++i) {
                const Matrix pred = forward(trainer.net(), test[i].x);
                const double v = classify ? accuracy(pred, test[i].y)
                                          : loss(pred, test[i].y, LossKind::mse);
                R.set(t, i, v);
            }

            double tail = 0.0;
            int n_tail = 0;
            for (auto it = tl.rows.rbegin(); it != tl.rows.rend() && n_tail < ecfg.loss_window; ++it) {
                if (it->warmup) break;
                tail += it->h_loss;
                ++n_tail;
            }
            res.final_h_loss = n_tail ? tail / n_tail : 0.0;
            for (const auto& row : tl.rows)
                if (!row.warmup) res.h_curve.push_back(row.h_loss);
        }

        res.metrics.avg = avg_perf(R);
        res.metrics.bwt = bwt(R);
        res.metrics.forgetting = forgetting(R);
        res.final_arch = trainer.arch().widths;
        res.perf.assign(T, {});
        for (int j = 0; j < T; ++j)
            for (int i = 0; i <= j; ++i) res.perf[j].push_back(R.at(j, i));

        nlohmann::json summary{
            {"experiment", to_string(cfg.experiment)},
            {"condition", to_string(cond)},
            {"seed", seed},
            {"perf_matrix", res.perf},
            {"metrics",
             {{"avg", res.metrics.avg},
              {"bwt", res.metrics.bwt ? nlohmann::json(*res.metrics.bwt) : nlohmann::json()},
              {"fwt", res.metrics.fwt},
              {"forgetting",
               res.metrics.forgetting ? nlohmann::json(*res.metrics.forgetting) : nlohmann::json()}}},
            {"final_arch", res.final_arch},
            {"final_h_loss", res.final_h_loss},
            {"task_divergence", divergences},
            {"warnings", res.warnings},
        };
        summary["morphs"] = nlohmann::json::array();
        for (const auto& m : res.morphs)
            summary["morphs"].push_back({{"task", m.task},
                                         {"psi_old", m.psi_old},
                                         {"psi_new", m.psi_new},
                                         {"pre_loss", m.pre_loss},
                                         {"post_loss", m.post_loss},
                                         {"awb_norm", m.awb_norm},
                                         {"n_ab", m.n_ab},
                                         {"transferred", m.transferred}});
        std::ofstream sum(res.summary_path);
        sum << summary.dump(2) << "\n";
    } catch (const std::exception& e) {
        res.failed = true;
        res.error = e.what();
    }
    return res;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline void write_metrics_csv(const std::vector<RunResult>& runs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "condition,seed,avg,bwt,fwt,forgetting\n";
    for (const auto& r : runs) {
        if (r.failed) continue;
        out << to_string(r.condition) << "," << r.seed << "," << detail::fmt_double(r.metrics.avg)
            << "," << (r.metrics.bwt ? detail::fmt_double(*r.metrics.bwt) : "") << ","
            << detail::fmt_double(r.metrics.fwt) << ","
            << (r.metrics.forgetting ? detail::fmt_double(*r.metrics.forgetting) : "") << "\n";
    }
}

inline void write_report_csv(const std::vector<RunResult>& runs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "condition,avg_mean,avg_std,bwt_mean,bwt_std,fwt_mean,fwt_std,forgetting_mean,"
           "forgetting_std\n";
    std::map<std::string, std::vector<const RunResult*>> by_cond;
    for (const auto& r : runs)
        if (!r.failed) by_cond[to_string(r.condition)].push_back(&r);
    auto mean_std = [](const std::vector<double>& v) -> std::pair<double, double> {
        if (v.empty()) return {0.0, 0.0};
        double m = 0.0;
        for (double x : v) m += x;
        m /= static_cast<double>(v.size());
        double s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        return {m, std::sqrt(s / static_cast<double>(v.size()))};
    };
    for (const auto& [cond, rs] : by_cond) {
        std::vector<double> avg, bwt_v, fwt_v, fg;
        for (const auto* r : rs) {
            avg.push_back(r->metrics.avg);
            fwt_v.push_back(r->metrics.fwt);
            if (r->metrics.bwt) bwt_v.push_back(*r->metrics.bwt);
            if (r->metrics.forgetting) fg.push_back(*r->metrics.forgetting);
        }
        const auto [am, as] = mean_std(avg);
        const auto [bm, bs] = mean_std(bwt_v);
        const auto [fm, fs] = mean_std(fwt_v);
        const auto [gm, gs] = mean_std(fg);
        out << cond << "," << detail::fmt_double(am) << "," << detail::fmt_double(as) << ","
            << (bwt_v.empty() ? "" : detail::fmt_double(bm)) << ","
            << (bwt_v.empty() ? "" : detail::fmt_double(bs)) << "," << detail::fmt_double(fm) << ","
            << detail::fmt_double(fs) << "," << (fg.empty() ? "" : detail::fmt_double(gm)) << ","
            << (fg.empty() ? "" : detail::fmt_double(gs)) << "\n";
    }
}

inline void write_morph_csv(const std::vector<RunResult>& runs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "condition,seed,task,psi_old,psi_new,transferred,pre_loss,post_loss,awb_norm\n";
    for (const auto& r : runs) {
        for (const auto& m : r.morphs) {
            out << to_string(r.condition) << "," << r.seed << "," << m.task << ","
                << detail::widths_label(m.psi_old) << "," << detail::widths_label(m.psi_new) << ","
                << (m.transferred ? "awb" : "reinit") << "," << detail::fmt_double(m.pre_loss)
                << "," << detail::fmt_double(m.post_loss) << "," << detail::fmt_double(m.awb_norm)
                << "\n";
        }
    }
}

// Mean loss curve per condition as hand-rolled SVG polylines (log10 y-axis).
inline void write_loss_svg(const std::vector<RunResult>& runs, const std::string& path) {
    std::map<std::string, std::vector<const RunResult*>> by_cond;
    for (const auto& r : runs)
        if (!r.failed && !r.h_curve.empty()) by_cond[to_string(r.condition)].push_back(&r);
    const int W = 900, H = 480, ML = 70, MR = 20, MT = 30, MB = 50;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
    out << "<rect width='" << W << "' height='" << H << "' fill='white'/>\n";
    if (by_cond.empty()) {
        out << "<text x='20' y='30'>no runs</text>\n</svg>\n";
        return;
    }
    std::map<std::string, std::vector<double>> curves;
    std::size_t max_len = 0;
    double lo = 1e300, hi = -1e300;
    for (const auto& [cond, rs] : by_cond) {
        std::size_t len = 0;
        for (const auto* r : rs) len = std::max(len, r->h_curve.size());
        std::vector<double> mean(len, 0.0);
        std::vector<int> cnt(len, 0);
        for (const auto* r : rs)
            for (std::size_t i = 0; i < r->h_curve.size(); ++i) {
                mean[i] += r->h_curve[i];
                cnt[i] += 1;
            }
        for (std::size_t i = 0; i < len; ++i) mean[i] /= std::max(1, cnt[i]);
        for (double v : mean)
            if (v > 0.0) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        max_len = std::max(max_len, len);
        curves[cond] = std::move(mean);
    }
    if (lo >= hi) {
        lo = hi / 2 + 1e-12;
    }
    const double llo = std::log10(lo), lhi = std::log10(hi);
    auto xpix = [&](std::size_t i) {
        return ML + (W - ML - MR) * static_cast<double>(i) /
                   static_cast<double>(std::max<std::size_t>(1, max_len - 1));
    };
    auto ypix = [&](double v) {
        const double f = (std::log10(std::max(v, lo)) - llo) / std::max(1e-12, lhi - llo);
        return MT + (H - MT - MB) * (1.0 - f);
    };
    out << "<line x1='" << ML << "' y1='" << H - MB << "' x2='" << W - MR << "' y2='" << H - MB
        << "' stroke='black'/>\n";
    out << "<line x1='" << ML << "' y1='" << MT << "' x2='" << ML << "' y2='" << H - MB
        << "' stroke='black'/>\n";
    out << "<text x='" << (W / 2 - 20) << "' y='" << (H - 12) << "' font-size='13'>epoch</text>\n";
    out << "<text x='12' y='" << (H / 2) << "' font-size='13' transform='rotate(-90 12 " << (H / 2)
        << ")'>blended loss</text>\n";
    const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"};
    int ci = 0;
    for (const auto& [cond, curve] : curves) {
        std::ostringstream pts;
        for (std::size_t i = 0; i < curve.size(); ++i)
            pts << xpix(i) << "," << ypix(curve[i]) << " ";
        out << "<polyline fill='none' stroke='" << colors[ci % 5] << "' stroke-width='1.2' points='"
            << pts.str() << "'/>\n";
        out << "<text x='" << (W - MR - 60) << "' y='" << (MT + 16 * (ci + 1)) << "' fill='"
            << colors[ci % 5] << "' font-size='13'>" << cond << "</text>\n";
        ++ci;
    }
    out << "</svg>\n";
}

inline void emit_reports(std::vector<RunResult>& runs, const std::string& out_dir,
                         RunArtifact& art) {
    namespace fs = std::filesystem;
    std::sort(runs.begin(), runs.end(), [](const RunResult& a, const RunResult& b) {
        return std::pair(to_string(a.condition), a.seed) < std::pair(to_string(b.condition), b.seed);
    });
    art.metrics_csv = (fs::path(out_dir) / "metrics.csv").string();
    art.report_csv = (fs::path(out_dir) / "report.csv").string();
    art.svg_path = (fs::path(out_dir) / "loss_curves.svg").string();
    art.morph_csv = (fs::path(out_dir) / "morph_events.csv").string();
    write_metrics_csv(runs, art.metrics_csv);
    write_report_csv(runs, art.report_csv);
    write_loss_svg(runs, art.svg_path);
    write_morph_csv(runs, art.morph_csv);
}

// ---------------------------------------------------------------------------
// Sweep driver
// ---------------------------------------------------------------------------

// Executes every (condition, seed) pair on a small worker pool. A failing run
// is recorded and the remaining runs still execute.
inline RunArtifact run_experiment(const RunConfig& cfg) {
    namespace fs = std::filesystem;
    RunArtifact art;
    art.out_dir = cfg.out_dir;
    fs::create_directories(cfg.out_dir);

    struct Job {
        Condition cond;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (const auto c : cfg.conditions)
        for (const auto s : cfg.seeds) jobs.push_back({c, s});
    art.runs.resize(jobs.size());

    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned n_workers =
        std::min<unsigned>(cfg.workers > 0 ? static_cast<unsigned>(cfg.workers) : hw,
                           static_cast<unsigned>(jobs.size()));
    std::mutex mu;
    std::size_t next = 0;
    auto worker = [&]() {
        for (;;) {
            std::size_t idx;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (next >= jobs.size()) return;
                idx = next++;
            }
            art.runs[idx] = run_single(cfg, jobs[idx].cond, jobs[idx].seed);
        }
    };
    std::vector<std::thread> pool;
    for (unsigned i = 0; i + 1 < n_workers; ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    for (const auto& r : art.runs) art.any_failed = art.any_failed || r.failed;
    emit_reports(art.runs, cfg.out_dir, art);
    return art;
}

// Rebuilds the report files from the summaries already on disk.
inline RunArtifact emit_reports_from_dir(const std::string& in_dir) {
    namespace fs = std::filesystem;
    RunArtifact art;
    art.out_dir = in_dir;
    std::vector<RunResult> runs;
    const fs::path run_dir = fs::path(in_dir) / "runs";
    if (!fs::exists(run_dir)) throw std::runtime_error("no runs directory under " + in_dir);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(run_dir))
        if (entry.path().string().ends_with(".summary.json")) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        std::ifstream in(f);
        nlohmann::json j;
        in >> j;
        RunResult r;
        r.condition = condition_from_string(j.at("condition").get<std::string>());
        r.seed = j.at("seed").get<std::uint64_t>();
        r.metrics.avg = j.at("metrics").at("avg").get<double>();
        if (!j.at("metrics").at("bwt").is_null())
            r.metrics.bwt = j.at("metrics").at("bwt").get<double>();
        if (!j.at("metrics").at("forgetting").is_null())
            r.metrics.forgetting = j.at("metrics").at("forgetting").get<double>();
        r.final_h_loss = j.at("final_h_loss").get<double>();
        for (const auto& m : j.at("morphs")) {
            MorphEvent ev;
            ev.task = m.at("task").get<int>();
            ev.psi_old = m.at("psi_old").get<std::vector<int>>();
            ev.psi_new = m.at("psi_new").get<std::vector<int>>();
            ev.pre_loss = m.at("pre_loss").get<double>();
            ev.post_loss = m.at("post_loss").get<double>();
            ev.awb_norm = m.at("awb_norm").get<double>();
            ev.n_ab = m.at("n_ab").get<int>();
            ev.transferred = m.at("transferred").get<bool>();
            r.morphs.push_back(std::move(ev));
        }
        // loss curves come from the epoch log when present
        const fs::path log = f.parent_path() / (f.filename().string().substr(
                                                    0, f.filename().string().size() -
                                                           std::string(".summary.json").size()) +
                                                ".jsonl");
        if (fs::exists(log)) {
            std::ifstream lg(log);
            std::string line;
            while (std::getline(lg, line)) {
                if (line.empty()) continue;
                const auto row = nlohmann::json::parse(line);
                if (row.at("type") == "epoch" && !row.at("warmup").get<bool>())
                    r.h_curve.push_back(row.at("h_loss").get<double>());
            }
        }
        runs.push_back(std::move(r));
    }
    art.runs = std::move(runs);
    emit_reports(art.runs, in_dir, art);
    return art;
}

}  // namespace morphcl
