#pragma once

#include <cstdint>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "morphcl/dataset.hpp"
#include "morphcl/rng.hpp"

namespace morphcl {

class BufferEmptyError : public std::runtime_error {
  public:
    BufferEmptyError() : std::runtime_error("replay buffer is empty") {}
};

// Which quota bucket a sampled row was drawn from.
enum class QuotaBucket { recent, older, random };

struct SampledRef {
    int task_id;
    std::size_t row;  // row within that task's stored block
    QuotaBucket bucket;
};

// Task-tagged sample store. Over capacity, samples are evicted uniformly at
// random starting from the oldest task; a task's last remaining sample is
// spared unless capacity leaves no choice.
class ReplayBuffer {
  public:
    explicit ReplayBuffer(std::size_t capacity, std::uint64_t seed = 0)
        : capacity_(capacity), rng_(derive_seed(seed, {0x627566ULL})) {}

    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return total_; }
    bool empty() const { return total_ == 0; }
    int max_task() const { return static_cast<int>(tasks_.size()) - 1; }
    std::size_t task_count() const {
        std::size_t n = 0;
        for (const auto& t : tasks_)
            if (!t.empty()) ++n;
        return n;
    }
    std::size_t task_size(int task_id) const { return tasks_.at(task_id).size(); }

    void add_task(const Dataset& samples, int task_id) {
        const int expected = static_cast<int>(tasks_.size());
        detail::require(task_id == expected,
                        "add_task: task ids must be consecutive; expected " +
                            std::to_string(expected) + ", got " + std::to_string(task_id));
        tasks_.emplace_back();
        auto& block = tasks_.back();
        block.reserve(samples.size());
        for (std::size_t r = 0; r < samples.size(); ++r) {
            Entry e;
            e.x.assign(samples.x.row(r).begin(), samples.x.row(r).end());
            e.y.assign(samples.y.row(r).begin(), samples.y.row(r).end());
            block.push_back(std::move(e));
        }
        total_ += samples.size();
        x_cols_ = samples.x.cols();
        y_cols_ = samples.y.cols();
        evict_to_capacity();
    }

    // Quota-balanced batch: recent_q from task t-1, older_q from tasks 0..t-2,
    // the remainder uniform over everything. Falls back to uniform sampling
    // while the buffer holds fewer than three task groups.
    Dataset sample_balanced(std::size_t batch, int current_task, std::uint64_t seed,
                            double recent_q = 0.1, double older_q = 0.8) const {
        return materialize(sample_balanced_refs(batch, current_task, seed, recent_q, older_q));
    }

    std::vector<SampledRef> sample_balanced_refs(std::size_t batch, int current_task,
                                                 std::uint64_t seed, double recent_q = 0.1,
                                                 double older_q = 0.8) const {
        if (empty()) throw BufferEmptyError();
        detail::require(batch >= 1, "sample_balanced: batch_size must be >= 1");
        Rng rng(derive_seed(seed, {0x73616d70ULL}));
        std::vector<SampledRef> out;
        out.reserve(batch);

        const int recent_task = current_task - 1;
        const bool has_recent = recent_task >= 0 && recent_task <= max_task() &&
                                !tasks_[recent_task].empty();
        std::size_t older_total = 0;
        for (int t = 0; t < recent_task && t <= max_task(); ++t) older_total += tasks_[t].size();

        if (task_count() < 3 || !has_recent || older_total == 0) {
            for (std::size_t i = 0; i < batch; ++i) out.push_back(draw_uniform(rng, QuotaBucket::random));
            return out;
        }

        const auto n_recent = static_cast<std::size_t>(static_cast<double>(batch) * recent_q);
        const auto n_older = static_cast<std::size_t>(static_cast<double>(batch) * older_q);
        const std::size_t n_random = batch - n_recent - n_older;

        draw_from_task_range(rng, recent_task, recent_task, n_recent, QuotaBucket::recent, out);
        draw_from_task_range(rng, 0, recent_task - 1, n_older, QuotaBucket::older, out);
        for (std::size_t i = 0; i < n_random; ++i) out.push_back(draw_uniform(rng, QuotaBucket::random));
        return out;
    }

    // Plain uniform batch with replacement.
    Dataset sample_uniform(std::size_t batch, std::uint64_t seed) const {
        if (empty()) throw BufferEmptyError();
        Rng rng(derive_seed(seed, {0x756e69ULL}));
        std::vector<SampledRef> refs;
        refs.reserve(batch);
        for (std::size_t i = 0; i < batch; ++i) refs.push_back(draw_uniform(rng, QuotaBucket::random));
        return materialize(refs);
    }

    Dataset materialize(const std::vector<SampledRef>& refs) const {
        Dataset out;
        out.x = Matrix(refs.size(), x_cols_);
        out.y = Matrix(refs.size(), y_cols_);
        for (std::size_t i = 0; i < refs.size(); ++i) {
            const Entry& e = tasks_[refs[i].task_id][refs[i].row];
            for (std::size_t c = 0; c < x_cols_; ++c) out.x(i, c) = e.x[c];
            for (std::size_t c = 0; c < y_cols_; ++c) out.y(i, c) = e.y[c];
        }
        return out;
    }

  private:
    struct Entry {
        std::vector<double> x, y;
    };

    void evict_to_capacity() {
        while (total_ > capacity_) {
            // oldest task that still has spares
            int victim = -1;
            for (std::size_t t = 0; t < tasks_.size(); ++t) {
                if (tasks_[t].size() > 1) {
                    victim = static_cast<int>(t);
                    break;
                }
            }
            if (victim < 0) {
                for (std::size_t t = 0; t < tasks_.size(); ++t) {
                    if (!tasks_[t].empty()) {
                        victim = static_cast<int>(t);
                        break;
                    }
                }
            }
            if (victim < 0) return;
            auto& block = tasks_[victim];
            const std::size_t i = rng_.index(block.size());
            block[i] = std::move(block.back());
            block.pop_back();
            --total_;
        }
    }

    SampledRef draw_uniform(Rng& rng, QuotaBucket bucket) const {
        std::size_t k = rng.index(total_);
        for (std::size_t t = 0; t < tasks_.size(); ++t) {
            if (k < tasks_[t].size()) return {static_cast<int>(t), k, bucket};
            k -= tasks_[t].size();
        }
        throw std::logic_error("draw_uniform: index walked past buffer end");
    }

    // n draws from tasks [lo, hi]. Without replacement when the group is large
    // enough, with replacement otherwise.
    void draw_from_task_range(Rng& rng, int lo, int hi, std::size_t n, QuotaBucket bucket,
                              std::vector<SampledRef>& out) const {
        std::size_t group = 0;
        for (int t = lo; t <= hi; ++t) group += tasks_[t].size();
        if (group == 0 || n == 0) return;
        auto nth = [&](std::size_t k) -> SampledRef {
            for (int t = lo; t <= hi; ++t) {
                if (k < tasks_[t].size()) return {t, k, bucket};
                k -= tasks_[t].size();
            }
            throw std::logic_error("draw_from_task_range: index out of group");
        };
        if (group < n) {
            for (std::size_t i = 0; i < n; ++i) out.push_back(nth(rng.index(group)));
            return;
        }
        // Floyd's algorithm for n distinct indices in [0, group)
        std::unordered_set<std::size_t> chosen;
        for (std::size_t j = group - n; j < group; ++j) {
            const std::size_t k = rng.index(j + 1);
            if (chosen.insert(k).second) {
                out.push_back(nth(k));
            } else {
                chosen.insert(j);
                out.push_back(nth(j));
            }
        }
    }

    std::size_t capacity_;
    std::vector<std::vector<Entry>> tasks_;
    std::size_t total_ = 0;
    std::size_t x_cols_ = 0, y_cols_ = 0;
    Rng rng_;
};

}  // namespace morphcl
