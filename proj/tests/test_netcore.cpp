#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "morphcl/backprop.hpp"
#include "morphcl/network.hpp"
#include "morphcl/serialize.hpp"

using namespace morphcl;

namespace {

const ActivationKind kAllActivations[] = {
    ActivationKind::relu,    ActivationKind::elu,     ActivationKind::softsign,
    ActivationKind::isrlu,   ActivationKind::isru,    ActivationKind::sigmoid,
    ActivationKind::tanh,    ActivationKind::identity};

Matrix matrix_from(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(rows.size(), rows.begin()->size());
    std::size_t r = 0;
    for (const auto& row : rows) {
        std::size_t c = 0;
        for (double v : row) m(r, c++) = v;
        ++r;
    }
    return m;
}

// Draws a small net + batch whose pre-activations stay clear of the
// activation kinks, so finite differences are trustworthy.
struct SmoothCase {
    Network net;
    Matrix x, y;
};

SmoothCase smooth_case(ActivationKind act, LossKind kind, std::uint64_t seed) {
    Rng rng(seed);
    for (int attempt = 0; attempt < 200; ++attempt) {
        const int h1 = 2 + static_cast<int>(rng.index(7));
        const int h2 = 2 + static_cast<int>(rng.index(7));
        const int out = kind == LossKind::mse ? 1 + static_cast<int>(rng.index(3)) : 3;
        Architecture arch({3, h1, h2, out});
        Network net = init_network(arch, act, rng.next_u64());
        for (auto& view : param_views(net))
            for (double& v : view) v += rng.uniform(-0.3, 0.3);
        const std::size_t batch = 4;
        Matrix x(batch, 3), y(batch, out);
        for (double& v : x.data()) v = rng.uniform(-2.0, 2.0);
        if (kind == LossKind::mse) {
            for (double& v : y.data()) v = rng.uniform(-1.0, 1.0);
        } else {
            for (std::size_t r = 0; r < batch; ++r) y(r, rng.index(out)) = 1.0;
        }
        ForwardTrace trace;
        forward(net, x, &trace);
        bool clear = true;
        for (const auto& pre : trace.pre)
            for (double v : pre.data()) clear = clear && std::fabs(v) >= 1e-3;
        if (clear) return {std::move(net), std::move(x), std::move(y)};
    }
    FAIL("could not build a kink-free case");
    return {};
}

}  // namespace

TEST_CASE("glorot init respects bounds and is deterministic", "[netcore]") {
    SECTION("1x1 weight lands inside the forced bound") {
        for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 12345ULL}) {
            const Network net = init_network(Architecture({1, 1}), ActivationKind::relu, seed);
            REQUIRE(net.layers.size() == 1);
            REQUIRE(net.layers[0].w.rows() == 1);
            REQUIRE(std::fabs(net.layers[0].w(0, 0)) < std::sqrt(3.0));
            REQUIRE(net.layers[0].b[0] == 0.0);
        }
    }
    SECTION("layer shapes follow the width vector") {
        const Network net =
            init_network(Architecture({64, 128, 128, 10}), ActivationKind::relu, 7);
        REQUIRE(net.layers.size() == 3);
        CHECK(net.layers[0].w.rows() == 128);
        CHECK(net.layers[0].w.cols() == 64);
        CHECK(net.layers[1].w.rows() == 128);
        CHECK(net.layers[1].w.cols() == 128);
        CHECK(net.layers[2].w.rows() == 10);
        CHECK(net.layers[2].w.cols() == 128);
        CHECK(net.layers[2].act == ActivationKind::identity);
    }
    SECTION("same (arch, seed) twice gives bit-identical networks") {
        const Architecture arch({4, 8, 8, 2});
        const Network a = init_network(arch, ActivationKind::tanh, 99);
        const Network b = init_network(arch, ActivationKind::tanh, 99);
        REQUIRE(networks_identical(a, b));
    }
    SECTION("bounds hold for random architectures") {
        Rng rng(3);
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<int> widths{1 + static_cast<int>(rng.index(16))};
            const int depth = 1 + static_cast<int>(rng.index(3));
            for (int i = 0; i < depth; ++i) widths.push_back(1 + static_cast<int>(rng.index(16)));
            const Network net = init_network(Architecture(widths), ActivationKind::elu, rng.next_u64());
            for (std::size_t li = 0; li < net.layers.size(); ++li) {
                const double bound = glorot_bound(widths[li], widths[li + 1]);
                for (double v : net.layers[li].w.data()) REQUIRE(std::fabs(v) <= bound);
            }
        }
    }
    SECTION("invalid architectures are rejected") {
        CHECK_THROWS_AS(init_network(Architecture({5}), ActivationKind::relu, 0),
                        std::invalid_argument);
        CHECK_THROWS_AS(init_network(Architecture({3, 0, 2}), ActivationKind::relu, 0),
                        std::invalid_argument);
        CHECK_THROWS_AS(init_network(Architecture({3, 2}, 4), ActivationKind::relu, 0),
                        std::invalid_argument);
    }
}

TEST_CASE("forward composes affine layers and activations", "[netcore]") {
    SECTION("all-zero parameters map anything to zero") {
        Network net = init_network(Architecture({3, 4, 2}), ActivationKind::relu, 0);
        for (auto& view : param_views(net))
            for (double& v : view) v = 0.0;
        Matrix x(5, 3);
        for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = static_cast<double>(i) - 7.0;
        const Matrix out = forward(net, x);
        for (double v : out.data()) REQUIRE(v == 0.0);
    }
    SECTION("identity stack is the identity map") {
        Network net = init_network(Architecture({3, 3, 3}), ActivationKind::identity, 0);
        for (auto& l : net.layers) {
            l.w = Matrix::identity(3);
            l.b.assign(3, 0.0);
        }
        Matrix x(4, 3);
        Rng rng(11);
        for (double& v : x.data()) v = rng.uniform(-5.0, 5.0);
        REQUIRE(forward(net, x) == x);
    }
    SECTION("hand-set one-hidden-unit relu net matches by-hand composition") {
        Network net = init_network(Architecture({1, 1, 1}), ActivationKind::relu, 0);
        net.layers[0].w(0, 0) = 2.0;
        net.layers[0].b[0] = -0.5;
        net.layers[1].w(0, 0) = 3.0;
        net.layers[1].b[0] = 0.25;
        Matrix x(1, 1);
        x(0, 0) = 1.0;
        // relu(2*1 - 0.5) = 1.5; 3*1.5 + 0.25 = 4.75
        REQUIRE(forward(net, x)(0, 0) == Catch::Approx(4.75).epsilon(1e-15));
        // negative side of the kink
        x(0, 0) = -1.0;
        REQUIRE(forward(net, x)(0, 0) == Catch::Approx(0.25).epsilon(1e-15));
    }
    SECTION("dimension mismatch names the offending layer") {
        const Network net = init_network(Architecture({3, 4, 2}), ActivationKind::relu, 0);
        Matrix bad(2, 5);
        CHECK_THROWS_WITH(forward(net, bad), Catch::Matchers::ContainsSubstring("layer 0"));
    }
}

TEST_CASE("loss values match independent oracles", "[netcore]") {
    SECTION("mse of identical matrices is zero") {
        Matrix a = matrix_from({{1.0, -2.0}, {0.5, 3.0}});
        REQUIRE(loss(a, a, LossKind::mse) == 0.0);
    }
    SECTION("uniform logits vs class 0 give ln 2") {
        Matrix pred = matrix_from({{0.0, 0.0}});
        Matrix target = matrix_from({{1.0, 0.0}});
        REQUIRE(loss(pred, target, LossKind::cross_entropy_with_logits) ==
                Catch::Approx(std::log(2.0)).margin(1e-15));
    }
    SECTION("random batch agrees with a naive per-element loop") {
        Rng rng(17);
        Matrix pred(4, 3), target(4, 3);
        for (double& v : pred.data()) v = rng.uniform(-2.0, 2.0);
        for (double& v : target.data()) v = rng.uniform(-2.0, 2.0);
        double acc = 0.0;
        for (std::size_t r = 0; r < 4; ++r)
            for (std::size_t c = 0; c < 3; ++c)
                acc += (pred(r, c) - target(r, c)) * (pred(r, c) - target(r, c));
        REQUIRE(loss(pred, target, LossKind::mse) == Catch::Approx(acc / 12.0).margin(1e-12));

        Matrix onehot(4, 3);
        std::size_t classes[4] = {0, 2, 1, 2};
        for (std::size_t r = 0; r < 4; ++r) onehot(r, classes[r]) = 1.0;
        double ce = 0.0;
        for (std::size_t r = 0; r < 4; ++r) {
            double denom = 0.0;
            for (std::size_t c = 0; c < 3; ++c) denom += std::exp(pred(r, c));
            ce += -std::log(std::exp(pred(r, classes[r])) / denom);
        }
        REQUIRE(loss(pred, onehot, LossKind::cross_entropy_with_logits) ==
                Catch::Approx(ce / 4.0).margin(1e-12));
    }
    SECTION("cross-entropy equals log-sum-exp minus the true logit") {
        Rng rng(23);
        for (int trial = 0; trial < 10; ++trial) {
            Matrix pred(1, 5);
            for (double& v : pred.data()) v = rng.uniform(-30.0, 30.0);
            const std::size_t cls = rng.index(5);
            Matrix target(1, 5);
            target(0, cls) = 1.0;
            double m = pred(0, 0);
            for (std::size_t c = 0; c < 5; ++c) m = std::max(m, pred(0, c));
            double lse = 0.0;
            for (std::size_t c = 0; c < 5; ++c) lse += std::exp(pred(0, c) - m);
            lse = m + std::log(lse);
            REQUIRE(loss(pred, target, LossKind::cross_entropy_with_logits) ==
                    Catch::Approx(lse - pred(0, cls)).margin(1e-12));
        }
    }
    SECTION("mse is invariant under simultaneous row permutation") {
        Rng rng(29);
        Matrix pred(6, 2), target(6, 2);
        for (double& v : pred.data()) v = rng.uniform(-1.0, 1.0);
        for (double& v : target.data()) v = rng.uniform(-1.0, 1.0);
        const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
        Matrix pred_p(6, 2), target_p(6, 2);
        for (std::size_t r = 0; r < 6; ++r)
            for (std::size_t c = 0; c < 2; ++c) {
                pred_p(r, c) = pred(perm[r], c);
                target_p(r, c) = target(perm[r], c);
            }
        REQUIRE(loss(pred, target, LossKind::mse) ==
                Catch::Approx(loss(pred_p, target_p, LossKind::mse)).margin(1e-15));
    }
    SECTION("shape mismatch and non-finite inputs are rejected") {
        Matrix a(2, 2), b(2, 3);
        CHECK_THROWS_AS(loss(a, b, LossKind::mse), std::invalid_argument);
        Matrix c(1, 1), d(1, 1);
        c(0, 0) = std::numeric_limits<double>::infinity();
        CHECK_THROWS_AS(loss(c, d, LossKind::mse), std::invalid_argument);
    }
}

TEST_CASE("backward produces exact gradients", "[netcore]") {
    SECTION("zero residual means zero gradients") {
        Network net = init_network(Architecture({2, 3, 2}), ActivationKind::tanh, 5);
        Matrix x(3, 2);
        Rng rng(31);
        for (double& v : x.data()) v = rng.uniform(-1.0, 1.0);
        const Matrix y = forward(net, x);
        const Gradients g = backward(net, x, y, LossKind::mse);
        for (const auto& m : g.w)
            for (double v : m.data()) REQUIRE(v == 0.0);
        for (const auto& b : g.b)
            for (double v : b) REQUIRE(v == 0.0);
    }
    SECTION("linear 1x1 net matches the closed form 2(wx-y)x") {
        Network net = init_network(Architecture({1, 1}), ActivationKind::identity, 0);
        net.layers[0].w(0, 0) = 1.7;
        net.layers[0].b[0] = 0.3;
        Matrix x(1, 1), y(1, 1);
        x(0, 0) = 2.5;
        y(0, 0) = -1.0;
        const Gradients g = backward(net, x, y, LossKind::mse);
        const double resid = 1.7 * 2.5 + 0.3 - (-1.0);
        REQUIRE(g.w[0](0, 0) == Catch::Approx(2.0 * resid * 2.5).margin(1e-12));
        REQUIRE(g.b[0][0] == Catch::Approx(2.0 * resid).margin(1e-12));
    }
    SECTION("matches central finite differences for every activation kind") {
        std::uint64_t seed = 1000;
        for (ActivationKind act : kAllActivations) {
            for (LossKind kind : {LossKind::mse, LossKind::cross_entropy_with_logits}) {
                SmoothCase c = smooth_case(act, kind, seed++);
                const double err = grad_check(c.net, c.x, c.y, kind, 1e-6);
                INFO("activation " << to_string(act) << " loss " << to_string(kind));
                REQUIRE(err < 1e-5);
            }
        }
    }
}

TEST_CASE("grad_check calibration", "[netcore]") {
    SECTION("linear nets are exact up to roundoff") {
        Network net = init_network(Architecture({2, 3, 1}), ActivationKind::identity, 2);
        Matrix x(4, 2), y(4, 1);
        Rng rng(37);
        for (double& v : x.data()) v = rng.uniform(-1.0, 1.0);
        for (double& v : y.data()) v = rng.uniform(-1.0, 1.0);
        REQUIRE(grad_check(net, x, y, LossKind::mse, 1e-4) < 1e-8);
    }
    SECTION("tanh net stays below the documented tolerance") {
        const SmoothCase c = smooth_case(ActivationKind::tanh, LossKind::mse, 555);
        REQUIRE(grad_check(c.net, c.x, c.y, LossKind::mse, 1e-6) < 1e-5);
    }
    SECTION("relu net evaluated away from kinks stays below tolerance") {
        const SmoothCase c = smooth_case(ActivationKind::relu, LossKind::mse, 556);
        REQUIRE(grad_check(c.net, c.x, c.y, LossKind::mse, 1e-6) < 1e-5);
    }
    SECTION("step size outside (0, 1e-3] is rejected") {
        const SmoothCase c = smooth_case(ActivationKind::tanh, LossKind::mse, 557);
        CHECK_THROWS_AS(grad_check(c.net, c.x, c.y, LossKind::mse, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(grad_check(c.net, c.x, c.y, LossKind::mse, 1e-2), std::invalid_argument);
    }
}

TEST_CASE("network json round-trips bit-exactly", "[netcore]") {
    const Network net = init_network(Architecture({3, 5, 2}), ActivationKind::softsign, 77);
    const nlohmann::json j = network_to_json(net);
    CHECK(j.at("arch") == std::vector<int>({3, 5, 2}));
    CHECK(j.at("filter_size").is_null());
    CHECK(j.at("activation") == "softsign");
    CHECK(j.at("layers").size() == 2);
    const Network back = network_from_json(j);
    REQUIRE(networks_identical(net, back));

    Network with_filter = net;
    with_filter.arch.filter_size = 3;
    const nlohmann::json j2 = network_to_json(with_filter);
    CHECK(j2.at("filter_size") == 3);
    REQUIRE(network_from_json(j2).arch.filter_size == 3);
}
