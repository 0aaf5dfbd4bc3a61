#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "morphcl/backprop.hpp"
#include "morphcl/network.hpp"
#include "morphcl/optim.hpp"

using namespace morphcl;

namespace {

struct ScalarParam {
    std::vector<double> p, g;
    std::vector<std::span<double>> params() { return {{p.data(), p.size()}}; }
    std::vector<std::span<const double>> grads() const { return {{g.data(), g.size()}}; }
};

}  // namespace

TEST_CASE("adamw update follows the recurrence", "[optim]") {
    SECTION("zero gradients with zero decay leave parameters untouched") {
        ScalarParam sp{{1.25, -0.5}, {0.0, 0.0}};
        AdamWConfig cfg;
        cfg.weight_decay = 0.0;
        AdamWState st = AdamWState::init_like(sp.params(), cfg);
        adamw_step(st, sp.params(), sp.grads(), 0.1);
        CHECK(sp.p[0] == 1.25);
        CHECK(sp.p[1] == -0.5);
        CHECK(st.step_count == 1);
        CHECK(st.m[0][0] == 0.0);
        CHECK(st.v[0][0] == 0.0);
    }
    SECTION("first step from fresh state moves by about -lr") {
        // hand evaluation: m=0.1, v=1e-3, bias correction makes mhat=vhat=1,
        // so the step is lr/(1+eps).
        ScalarParam sp{{0.0}, {1.0}};
        AdamWConfig cfg;
        cfg.weight_decay = 0.0;
        AdamWState st = AdamWState::init_like(sp.params(), cfg);
        adamw_step(st, sp.params(), sp.grads(), 0.1);
        REQUIRE(sp.p[0] == Catch::Approx(-0.1).margin(2e-9));
    }
    SECTION("decoupled decay scales the parameter by (1 - lr*wd)") {
        ScalarParam sp{{2.0}, {0.0}};
        AdamWConfig cfg;
        cfg.weight_decay = 0.01;
        AdamWState st = AdamWState::init_like(sp.params(), cfg);
        adamw_step(st, sp.params(), sp.grads(), 0.1);
        REQUIRE(sp.p[0] == Catch::Approx(2.0 * (1.0 - 0.001)).margin(1e-15));
    }
    SECTION("identical inputs give identical updates") {
        auto run = []() {
            Network net = init_network(Architecture({2, 4, 1}), ActivationKind::tanh, 3);
            AdamWState st = AdamWState::init_like(param_views(net));
            Matrix x(4, 2), y(4, 1);
            Rng rng(9);
            for (double& v : x.data()) v = rng.uniform(-1.0, 1.0);
            for (double& v : y.data()) v = rng.uniform(-1.0, 1.0);
            for (int i = 0; i < 5; ++i) {
                const Gradients g = backward(net, x, y, LossKind::mse);
                adamw_step(st, param_views(net), grad_views(g), 1e-3);
            }
            return net;
        };
        REQUIRE(networks_identical(run(), run()));
    }
    SECTION("non-finite gradients are rejected") {
        ScalarParam sp{{0.0}, {std::numeric_limits<double>::quiet_NaN()}};
        AdamWState st = AdamWState::init_like(sp.params());
        CHECK_THROWS_AS(adamw_step(st, sp.params(), sp.grads(), 0.1), std::invalid_argument);
    }
}

TEST_CASE("learning-rate schedules", "[optim]") {
    const Schedule cos = Schedule::cosine_lr(1e-4, 1e-6, 100);
    SECTION("cosine endpoints and midpoint") {
        CHECK(schedule_lr(cos, 0) == Catch::Approx(1e-4).margin(1e-18));
        CHECK(schedule_lr(cos, 100) == Catch::Approx(1e-6).margin(1e-18));
        CHECK(schedule_lr(cos, 50) == Catch::Approx((1e-4 + 1e-6) / 2.0).margin(1e-15));
    }
    SECTION("cosine clamps past the horizon") {
        CHECK(schedule_lr(cos, 150) == 1e-6);
    }
    SECTION("cosine is monotone non-increasing over the horizon") {
        double prev = schedule_lr(cos, 0);
        for (long e = 1; e <= 100; ++e) {
            const double cur = schedule_lr(cos, e);
            REQUIRE(cur <= prev + 1e-18);
            prev = cur;
        }
    }
    SECTION("constant schedule ignores the epoch") {
        const Schedule c = Schedule::constant_lr(3e-4);
        CHECK(schedule_lr(c, 0) == 3e-4);
        CHECK(schedule_lr(c, 9999) == 3e-4);
    }
    SECTION("step, exponential, and linear accept their constants") {
        Schedule st;
        st.kind = ScheduleKind::step;
        st.eta0 = 1.0;
        st.drop_every = 10;
        st.factor = 0.5;
        st.eta_min = 1e-9;
        CHECK(schedule_lr(st, 9) == 1.0);
        CHECK(schedule_lr(st, 10) == 0.5);
        CHECK(schedule_lr(st, 25) == 0.25);
        Schedule ex;
        ex.kind = ScheduleKind::exponential;
        ex.eta0 = 1.0;
        ex.decay = 0.9;
        ex.eta_min = 1e-9;
        CHECK(schedule_lr(ex, 2) == Catch::Approx(0.81).margin(1e-15));
        Schedule li;
        li.kind = ScheduleKind::linear;
        li.eta0 = 1.0;
        li.eta_min = 0.0;
        li.horizon = 10;
        CHECK(schedule_lr(li, 5) == Catch::Approx(0.5).margin(1e-15));
    }
}

TEST_CASE("gradient clipping", "[optim]") {
    SECTION("norm below the cap is untouched") {
        std::vector<double> g{0.3, 0.4};  // norm 0.5
        const std::vector<double> orig = g;
        clip_grad({{g.data(), g.size()}}, 1.0);
        REQUIRE(g == orig);
    }
    SECTION("norm above the cap is rescaled onto it") {
        std::vector<double> g{1.2, 1.6};  // norm 2.0
        const double pre = clip_grad({{g.data(), g.size()}}, 1.0);
        CHECK(pre == Catch::Approx(2.0).margin(1e-12));
        const double post = std::sqrt(g[0] * g[0] + g[1] * g[1]);
        REQUIRE(post == Catch::Approx(1.0).margin(1e-12));
    }
    SECTION("direction is preserved and the recomputed norm never exceeds the cap") {
        Rng rng(41);
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<double> a(8), b(5);
            for (double& v : a) v = rng.uniform(-3.0, 3.0);
            for (double& v : b) v = rng.uniform(-3.0, 3.0);
            std::vector<double> a0 = a, b0 = b;
            clip_grad({{a.data(), a.size()}, {b.data(), b.size()}}, 1.0);
            double norm = 0.0, dot_v = 0.0, n0 = 0.0, n1 = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) {
                norm += a[i] * a[i];
                dot_v += a[i] * a0[i];
                n0 += a0[i] * a0[i];
                n1 += a[i] * a[i];
            }
            for (std::size_t i = 0; i < b.size(); ++i) {
                norm += b[i] * b[i];
                dot_v += b[i] * b0[i];
                n0 += b0[i] * b0[i];
                n1 += b[i] * b[i];
            }
            REQUIRE(std::sqrt(norm) <= 1.0 + 1e-12);
            REQUIRE(dot_v / std::sqrt(n0 * n1) == Catch::Approx(1.0).margin(1e-12));
        }
    }
    SECTION("clipping is idempotent") {
        std::vector<double> g{5.0, -2.0, 1.0};
        clip_grad({{g.data(), g.size()}}, 1.0);
        const std::vector<double> once = g;
        clip_grad({{g.data(), g.size()}}, 1.0);
        REQUIRE(g == once);
    }
}
