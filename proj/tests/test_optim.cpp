#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "nn_fixtures.hpp"
#include "signflow/errors.hpp"
#include "signflow/optim.hpp"

using namespace signflow;
using namespace signflow::testing;

namespace {

// Agreement to `digits` significant digits.
bool same_digits(double a, double b, int digits) {
    return std::abs(a - b) <= 0.5 * std::pow(10.0, 1 - digits) * std::abs(b);
}

struct Scalar {
    std::vector<double> theta{1.0}, m{0.0}, u{0.0};
    std::uint64_t t = 0;

    void step(double g, const AdamaxHyper& h = {}) {
        const std::vector<double> grad{g};
        adamax_update(theta, grad, m, u, ++t, h);
    }
};

}  // namespace

TEST_CASE("scalar update from a fresh state") {
    Scalar s;
    s.step(1.0);
    CHECK(s.m[0] == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(s.u[0] == 1.0);
    // 1 - 0.001 / (1 + 1e-7), evaluated in 40-digit decimal arithmetic.
    CHECK(same_digits(s.theta[0], 0.99900000009999999, 12));
}

TEST_CASE("second consecutive step with unit gradient") {
    Scalar s;
    s.step(1.0);
    s.step(1.0);
    CHECK(s.m[0] == doctest::Approx(0.19).epsilon(1e-15));
    CHECK(s.u[0] == 1.0);  // max(0.999, 1)
    CHECK(same_digits(s.theta[0], 0.99800000019999998, 12));
}

TEST_CASE("zero gradient leaves parameters unchanged") {
    Scalar s;
    for (int i = 0; i < 50; ++i) s.step(0.0);
    CHECK(s.theta[0] == 1.0);
    CHECK(s.m[0] == 0.0);
    CHECK(s.u[0] == 0.0);

    ModelParams p = init_params(tiny_spec(), 1);
    ModelParams before = p;
    ModelParams g = ModelParams::zeros(tiny_spec());
    AdamaxState st = AdamaxState::for_params(p);
    for (int i = 0; i < 5; ++i) adamax_step(p, g, st, {});
    CHECK(st.t == 5);
    auto a = p.tensors();
    auto b = before.tensors();
    for (std::size_t k = 0; k < a.size(); ++k)
        for (std::size_t i = 0; i < a[k].values.size(); ++i) REQUIRE(a[k].values[i] == b[k].values[i]);
}

TEST_CASE("infinity-norm accumulator bounds") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n(0.0, 2.0);
    const AdamaxHyper h;
    std::vector<double> theta(64, 0.5), m(64, 0.0), u(64, 0.0), g(64);
    for (std::uint64_t t = 1; t <= 200; ++t) {
        for (auto& v : g) v = n(rng) * (t % 7 == 0 ? 0.0 : 1.0);
        const auto u_prev = u;
        adamax_update(theta, g, m, u, t, h);
        for (std::size_t i = 0; i < u.size(); ++i) {
            REQUIRE(u[i] >= h.beta2 * u_prev[i]);
            REQUIRE(u[i] >= std::abs(g[i]));
            REQUIRE(u[i] >= 0.0);
        }
    }
}

TEST_CASE("first step magnitude is invariant to gradient scale") {
    AdamaxHyper h;
    h.eps = 0.0;  // exact scale invariance needs the guard removed
    for (double g0 : {-3.0, -0.25, 1e-3, 0.7, 42.0}) {
        for (double c : {1e-4, 0.5, 3.0, 1e6}) {
            std::vector<double> t1{0.0}, m1{0.0}, u1{0.0}, t2{0.0}, m2{0.0}, u2{0.0};
            const std::vector<double> g1{g0}, g2{g0 * c};
            adamax_update(t1, g1, m1, u1, 1, h);
            adamax_update(t2, g2, m2, u2, 1, h);
            CHECK(std::abs(t1[0]) == doctest::Approx(std::abs(t2[0])).epsilon(1e-14));
            CHECK(std::abs(t1[0]) == doctest::Approx(h.lr).epsilon(1e-14));
        }
    }
}

TEST_CASE("non-finite gradient is rejected and names the tensor") {
    ModelParams p = init_params(tiny_spec(), 2);
    const ModelParams before = p;
    ModelParams g = ModelParams::zeros(tiny_spec());
    g.lstm[1].wh(2, 1) = std::nan("");
    AdamaxState st = AdamaxState::for_params(p);
    try {
        adamax_step(p, g, st, {});
        FAIL("expected OptimizerError");
    } catch (const OptimizerError& e) {
        CHECK(std::string(e.what()).find("lstm1.wh") != std::string::npos);
    }
    CHECK(st.t == 0);
    CHECK(p.lstm[0].wx == before.lstm[0].wx);

    g.lstm[1].wh(2, 1) = 0.0;
    g.dense[0].b(0) = INFINITY;
    CHECK_THROWS_AS(adamax_step(p, g, st, {}), OptimizerError);
}

TEST_CASE("shape mismatch is rejected") {
    ModelParams p = init_params(tiny_spec(), 3);
    ModelParams g = ModelParams::zeros(ModelSpec::stacked(5, 8, {4, 6, 4}, {4, 2}, 3));
    AdamaxState st = AdamaxState::for_params(p);
    CHECK_THROWS_AS(adamax_step(p, g, st, {}), OptimizerError);

    ModelParams g2 = ModelParams::zeros(tiny_spec());
    st.m[0].pop_back();
    CHECK_THROWS_AS(adamax_step(p, g2, st, {}), OptimizerError);
}

TEST_CASE("hyperparameter validation") {
    AdamaxHyper h;
    CHECK_NOTHROW(h.validate());
    h.lr = 0.0;
    CHECK_THROWS_AS(h.validate(), OptimizerError);
    h = {};
    h.beta1 = 1.0;
    CHECK_THROWS_AS(h.validate(), OptimizerError);
    h = {};
    h.beta2 = -0.1;
    CHECK_THROWS_AS(h.validate(), OptimizerError);
    h = {};
    h.eps = 0.0;
    CHECK_THROWS_AS(h.validate(), OptimizerError);
}

TEST_CASE("updates are deterministic") {
    auto run = [] {
        ModelParams p = init_params(tiny_spec(), 5);
        AdamaxState st = AdamaxState::for_params(p);
        for (std::uint64_t s = 0; s < 10; ++s) {
            ModelParams g = ModelParams::zeros(tiny_spec());
            std::mt19937_64 rng(100 + s);
            std::uniform_real_distribution<double> d(-1.0, 1.0);
            for (auto& t : g.tensors())
                for (auto& v : t.values) v = d(rng);
            adamax_step(p, g, st, {});
        }
        return p;
    };
    ModelParams a = run(), b = run();
    auto ta = a.tensors(), tb = b.tensors();
    for (std::size_t k = 0; k < ta.size(); ++k)
        CHECK(std::memcmp(ta[k].values.data(), tb[k].values.data(), ta[k].values.size() * sizeof(double)) == 0);
}
