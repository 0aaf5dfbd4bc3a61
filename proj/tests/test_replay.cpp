#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "morphcl/replay.hpp"

using namespace morphcl;

namespace {

// x encodes (task_id, row) so samples can be traced back.
Dataset tagged_samples(int task_id, std::size_t n) {
    Dataset ds;
    ds.task_id = task_id;
    ds.x = Matrix(n, 2);
    ds.y = Matrix(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        ds.x(i, 0) = task_id;
        ds.x(i, 1) = static_cast<double>(i);
        ds.y(i, 0) = task_id * 1000.0 + static_cast<double>(i);
    }
    return ds;
}

}  // namespace

TEST_CASE("buffer growth and eviction", "[replay]") {
    SECTION("adding to an empty buffer keeps every sample") {
        ReplayBuffer buf(1000, 0);
        buf.add_task(tagged_samples(0, 100), 0);
        REQUIRE(buf.size() == 100);
    }
    SECTION("overflow evicts from the oldest task and keeps the newest intact") {
        ReplayBuffer buf(150, 0);
        buf.add_task(tagged_samples(0, 100), 0);
        buf.add_task(tagged_samples(1, 100), 1);
        REQUIRE(buf.size() == 150);
        CHECK(buf.task_size(1) == 100);
        CHECK(buf.task_size(0) == 50);
    }
    SECTION("capacity is never exceeded across many adds") {
        ReplayBuffer buf(97, 1);
        Rng rng(2);
        for (int t = 0; t < 8; ++t) {
            buf.add_task(tagged_samples(t, 20 + rng.index(40)), t);
            REQUIRE(buf.size() <= 97);
        }
        // oldest tasks shrink first but keep one sample while possible
        for (int t = 0; t < 8; ++t) REQUIRE(buf.task_size(t) >= 1);
    }
    SECTION("non-monotone task ids are rejected") {
        ReplayBuffer buf(100, 0);
        CHECK_THROWS_AS(buf.add_task(tagged_samples(1, 5), 1), std::invalid_argument);
        buf.add_task(tagged_samples(0, 5), 0);
        CHECK_THROWS_AS(buf.add_task(tagged_samples(0, 5), 0), std::invalid_argument);
        CHECK_THROWS_AS(buf.add_task(tagged_samples(2, 5), 2), std::invalid_argument);
    }
    SECTION("duplicate points are allowed") {
        ReplayBuffer buf(100, 0);
        Dataset d = tagged_samples(0, 4);
        for (std::size_t i = 0; i < d.size(); ++i) d.x(i, 1) = 7.0;
        buf.add_task(d, 0);
        REQUIRE(buf.size() == 4);
    }
}

TEST_CASE("balanced sampling quotas", "[replay]") {
    SECTION("a single-task buffer collapses to that task") {
        ReplayBuffer buf(1000, 0);
        buf.add_task(tagged_samples(0, 50), 0);
        const Dataset batch = buf.sample_balanced(32, 1, 123);
        REQUIRE(batch.size() == 32);
        for (std::size_t i = 0; i < batch.size(); ++i) REQUIRE(batch.x(i, 0) == 0.0);
    }
    SECTION("fixed seed reproduces the batch exactly") {
        ReplayBuffer buf(1000, 0);
        for (int t = 0; t < 4; ++t) buf.add_task(tagged_samples(t, 60), t);
        const Dataset a = buf.sample_balanced(64, 4, 999);
        const Dataset b = buf.sample_balanced(64, 4, 999);
        REQUIRE(a.x == b.x);
        REQUIRE(a.y == b.y);
    }
    SECTION("three tasks, batch 100: counts match the multinomial oracle within 3 sigma") {
        ReplayBuffer buf(10000, 0);
        for (int t = 0; t < 3; ++t) buf.add_task(tagged_samples(t, 500), t);
        // quota algebra: 10 draws from task 2, 80 from tasks 0-1, 10 uniform.
        // uniform picks each task with probability 1/3.
        const double expect2 = 10.0 + 10.0 / 3.0;
        const double expect01 = 40.0 + 10.0 / 3.0;
        const int draws = 1000;
        double sum2 = 0.0, sum0 = 0.0, sum1 = 0.0;
        for (int d = 0; d < draws; ++d) {
            const auto refs = buf.sample_balanced_refs(100, 3, 10'000 + d);
            REQUIRE(refs.size() == 100);
            int c0 = 0, c1 = 0, c2 = 0;
            for (const auto& r : refs) {
                if (r.task_id == 0) ++c0;
                if (r.task_id == 1) ++c1;
                if (r.task_id == 2) ++c2;
            }
            sum0 += c0;
            sum1 += c1;
            sum2 += c2;
        }
        // task 2 count varies only through the 10 uniform draws (p = 1/3);
        // tasks 0/1 additionally get hypergeometric spread from the 80
        // without-replacement draws out of their 1000-sample union
        const double var_uniform = 10.0 * (1.0 / 3.0) * (2.0 / 3.0);
        const double var_hyper = 80.0 * 0.25 * (1000.0 - 80.0) / (1000.0 - 1.0);
        const double sigma2 = std::sqrt(var_uniform / draws);
        const double sigma01 = std::sqrt((var_uniform + var_hyper) / draws);
        CHECK(std::fabs(sum2 / draws - expect2) <= 3.0 * sigma2);
        CHECK(std::fabs(sum0 / draws - expect01) <= 3.0 * sigma01);
        CHECK(std::fabs(sum1 / draws - expect01) <= 3.0 * sigma01);
    }
    SECTION("empirical quota fractions approach (0.1, 0.8, 0.1)") {
        ReplayBuffer buf(100000, 0);
        for (int t = 0; t < 5; ++t) buf.add_task(tagged_samples(t, 400), t);
        std::map<QuotaBucket, std::size_t> counts;
        std::size_t total = 0;
        for (int d = 0; d < 100; ++d) {
            const auto refs = buf.sample_balanced_refs(100, 5, 555 + d);
            for (const auto& r : refs) ++counts[r.bucket];
            total += refs.size();
        }
        REQUIRE(total >= 10000);
        CHECK(std::fabs(double(counts[QuotaBucket::recent]) / total - 0.1) <= 0.03);
        CHECK(std::fabs(double(counts[QuotaBucket::older]) / total - 0.8) <= 0.03);
        CHECK(std::fabs(double(counts[QuotaBucket::random]) / total - 0.1) <= 0.03);
    }
    SECTION("empty buffer raises a distinct error; undersized buffers sample with replacement") {
        ReplayBuffer buf(100, 0);
        CHECK_THROWS_AS(buf.sample_balanced(8, 1, 0), BufferEmptyError);
        buf.add_task(tagged_samples(0, 3), 0);
        const Dataset batch = buf.sample_balanced(32, 1, 7);
        REQUIRE(batch.size() == 32);  // replacement fills the batch
    }
    SECTION("batch size is honored exactly") {
        ReplayBuffer buf(10000, 0);
        for (int t = 0; t < 4; ++t) buf.add_task(tagged_samples(t, 97), t);
        for (std::size_t bs : {1, 7, 100, 333})
            REQUIRE(buf.sample_balanced(bs, 4, bs).size() == bs);
    }
}
