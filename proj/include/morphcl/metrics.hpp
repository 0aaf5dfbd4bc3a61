#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "morphcl/dataset.hpp"

namespace morphcl {

enum class MetricPolarity { error, accuracy };

// R[j][i]: performance on task i after training task j (lower triangle).
class PerfMatrix {
  public:
    explicit PerfMatrix(std::size_t T, MetricPolarity pol = MetricPolarity::error)
        : T_(T), pol_(pol), r_(T, std::vector<double>(T, std::numeric_limits<double>::quiet_NaN())) {}

    std::size_t task_count() const { return T_; }
    MetricPolarity polarity() const { return pol_; }

    void set(std::size_t after_task, std::size_t on_task, double value) {
        detail::require(on_task <= after_task && after_task < T_, "perf matrix: index out of range");
        r_[after_task][on_task] = value;
    }

    double at(std::size_t after_task, std::size_t on_task) const { return r_[after_task][on_task]; }

    bool defined(std::size_t after_task, std::size_t on_task) const {
        return on_task <= after_task && after_task < T_ && !std::isnan(r_[after_task][on_task]);
    }

  private:
    std::size_t T_;
    MetricPolarity pol_;
    std::vector<std::vector<double>> r_;
};

// Mean final-row performance.
inline double avg_perf(const PerfMatrix& R) {
    const std::size_t T = R.task_count();
    double s = 0.0;
    for (std::size_t i = 0; i < T; ++i) {
        detail::require(R.defined(T - 1, i), "avg_perf: final row incomplete");
        s += R.at(T - 1, i);
    }
    return s / static_cast<double>(T);
}

// Mean change on earlier tasks between their own training round and the end
// of the sequence. For error metrics a positive value is an improvement.
inline std::optional<double> bwt(const PerfMatrix& R) {
    const std::size_t T = R.task_count();
    if (T < 2) return std::nullopt;
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < T; ++i) {
        detail::require(R.defined(i, i) && R.defined(T - 1, i), "bwt: matrix incomplete");
        s += R.at(i, i) - R.at(T - 1, i);
    }
    return s / static_cast<double>(T - 1);
}

// Mean regression from each task's best-ever performance. For accuracy
// polarity "best" is the maximum and the regression is the drop from it.
inline std::optional<double> forgetting(const PerfMatrix& R) {
    const std::size_t T = R.task_count();
    if (T < 2) return std::nullopt;
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < T; ++i) {
        double best = R.polarity() == MetricPolarity::error
                          ? std::numeric_limits<double>::infinity()
                          : -std::numeric_limits<double>::infinity();
        for (std::size_t j = i; j < T; ++j) {
            detail::require(R.defined(j, i), "forgetting: matrix incomplete");
            best = R.polarity() == MetricPolarity::error ? std::min(best, R.at(j, i))
                                                         : std::max(best, R.at(j, i));
        }
        const double final_v = R.at(T - 1, i);
        const double regress = R.polarity() == MetricPolarity::error ? final_v - best
                                                                     : best - final_v;
        s += std::max(0.0, regress);
    }
    return s / static_cast<double>(T - 1);
}

// Total-variation-style distance between two datasets, estimated from a
// joint histogram over inputs and targets with n_bins per dimension.
// Symmetric, in [0, 1]; 0 for identical datasets, 1 for disjoint supports.
inline double task_divergence(const Dataset& a, const Dataset& b, int n_bins = 16) {
    detail::require(!a.empty() && !b.empty(), "task_divergence: empty dataset");
    detail::require(a.x.cols() == b.x.cols() && a.y.cols() == b.y.cols(),
                    "task_divergence: dimension mismatch");
    detail::require(n_bins >= 1, "task_divergence: n_bins must be >= 1");
    const std::size_t dims = a.x.cols() + a.y.cols();

    auto coord = [&](const Dataset& ds, std::size_t row, std::size_t d) {
        return d < ds.x.cols() ? ds.x(row, d) : ds.y(row, d - ds.x.cols());
    };

    std::vector<double> lo(dims, std::numeric_limits<double>::infinity());
    std::vector<double> hi(dims, -std::numeric_limits<double>::infinity());
    for (const Dataset* ds : {&a, &b}) {
        for (std::size_t r = 0; r < ds->size(); ++r) {
            for (std::size_t d = 0; d < dims; ++d) {
                lo[d] = std::min(lo[d], coord(*ds, r, d));
                hi[d] = std::max(hi[d], coord(*ds, r, d));
            }
        }
    }

    auto bin_index = [&](const Dataset& ds, std::size_t row) {
        std::size_t idx = 0;
        for (std::size_t d = 0; d < dims; ++d) {
            int b_ = 0;
            if (hi[d] > lo[d]) {
                const double f = (coord(ds, row, d) - lo[d]) / (hi[d] - lo[d]);
                b_ = std::min(n_bins - 1, static_cast<int>(f * n_bins));
            }
            idx = idx * static_cast<std::size_t>(n_bins) + static_cast<std::size_t>(b_);
        }
        return idx;
    };

    std::size_t cells = 1;
    for (std::size_t d = 0; d < dims; ++d) {
        detail::require(cells <= std::size_t(1) << 24, "task_divergence: too many histogram cells");
        cells *= static_cast<std::size_t>(n_bins);
    }
    std::vector<double> pa(cells, 0.0), pb(cells, 0.0);
    for (std::size_t r = 0; r < a.size(); ++r) pa[bin_index(a, r)] += 1.0 / a.size();
    for (std::size_t r = 0; r < b.size(); ++r) pb[bin_index(b, r)] += 1.0 / b.size();
    double tv = 0.0;
    for (std::size_t i = 0; i < cells; ++i) tv += std::fabs(pa[i] - pb[i]);
    return 0.5 * tv;
}

// Spearman rank correlation with average ranks for ties.
inline double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
    detail::require(xs.size() == ys.size() && xs.size() >= 2, "spearman: need paired samples");
    auto ranks = [](const std::vector<double>& v) {
        const std::size_t n = v.size();
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
        std::vector<double> rank(n);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
            const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
            for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
            i = j + 1;
        }
        return rank;
    };
    const auto rx = ranks(xs), ry = ranks(ys);
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) mx += rx[i], my += ry[i];
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace morphcl
