#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "graminspect/numerics.hpp"

using namespace graminspect;

TEST_CASE("log_sum_exp basics") {
    CHECK(log_sum_exp({0.0, 0.0}) == Catch::Approx(std::log(2.0)).epsilon(1e-12));
    // Max-shift keeps huge inputs finite.
    CHECK(log_sum_exp({1000.0, 1000.0}) ==
          Catch::Approx(1000.0 + std::log(2.0)).epsilon(1e-12));
    CHECK_THROWS_AS(log_sum_exp({}), std::invalid_argument);
}

TEST_CASE("log_sum_exp matches the naive formula at small magnitudes") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v(7);
        for (double& x : v) x = rng.uniform(-3.0, 3.0);
        double naive = 0.0;
        for (double x : v) naive += std::exp(x);
        naive = std::log(naive);
        CHECK(std::abs(log_sum_exp(v) - naive) < 1e-12);
    }
}

TEST_CASE("log_sum_exp shift invariance") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v(5), shifted(5);
        const double c = rng.uniform(-40.0, 40.0);
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = rng.uniform(-5.0, 5.0);
            shifted[i] = v[i] + c;
        }
        CHECK(std::abs(log_sum_exp(shifted) - (log_sum_exp(v) + c)) < 1e-12);
    }
}

TEST_CASE("masked_softmax") {
    SECTION("uniform logits give 1/k on kept entries") {
        const auto p = masked_softmax({2.0, 2.0, 2.0, 2.0}, {true, true, false, true});
        CHECK(p[0] == Catch::Approx(1.0 / 3).epsilon(1e-12));
        CHECK(p[2] == 0.0);
        CHECK(p[0] + p[1] + p[3] == Catch::Approx(1.0).epsilon(1e-12));
    }
    SECTION("single kept entry is exactly 1") {
        const auto p = masked_softmax({-55.0, 3.0}, {true, false});
        CHECK(p[0] == 1.0);
        CHECK(p[1] == 0.0);
    }
    SECTION("direct formula") {
        const auto p = masked_softmax({1.0, 2.0, 3.0}, {true, false, true});
        const double z = std::exp(1.0) + std::exp(3.0);
        CHECK(p[0] == Catch::Approx(std::exp(1.0) / z).epsilon(1e-12));
        CHECK(p[1] == 0.0);
        CHECK(p[2] == Catch::Approx(std::exp(3.0) / z).epsilon(1e-12));
    }
    SECTION("invariant to adding a constant to kept logits") {
        Rng rng(3);
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<double> l(6);
            std::vector<bool> m(6);
            bool any = false;
            for (std::size_t i = 0; i < l.size(); ++i) {
                l[i] = rng.uniform(-4.0, 4.0);
                m[i] = rng.uniform() < 0.5;
                any = any || m[i];
            }
            if (!any) m[0] = true;
            std::vector<double> shifted = l;
            for (double& x : shifted) x += 17.5;
            const auto a = masked_softmax(l, m);
            const auto b = masked_softmax(shifted, m);
            for (std::size_t i = 0; i < l.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-12);
        }
    }
    SECTION("all-false mask is rejected") {
        CHECK_THROWS_AS(masked_softmax({1.0, 2.0}, {false, false}), std::invalid_argument);
    }
}

TEST_CASE("leaky_relu") {
    CHECK(leaky_relu(5.0, 0.2) == 5.0);
    CHECK(leaky_relu(-5.0, 0.2) == -1.0);
    CHECK(leaky_relu(0.0, 0.2) == 0.0);
}

TEST_CASE("finite_diff_check on a quadratic") {
    const auto f = [](const std::vector<double>& w) { return w[0] * w[0]; };
    const auto ok = finite_diff_check(f, {3.0}, {6.0}, 1e-5, 1e-4);
    CHECK(ok.pass);
    CHECK(ok.max_rel_error < 1e-8);

    // Negative control: a gradient off by 2x must be flagged with its coordinate.
    const auto bad = finite_diff_check(f, {3.0}, {12.0}, 1e-5, 1e-4);
    CHECK_FALSE(bad.pass);
    CHECK(bad.worst_index == 0);
    CHECK(bad.describe().find("coordinate 0") != std::string::npos);
}

TEST_CASE("finite_diff_check rejects non-finite objectives") {
    const auto f = [](const std::vector<double>& w) { return std::log(w[0]); };
    CHECK_THROWS_AS(finite_diff_check(f, {0.0}, {1.0}), NumericError);
}

TEST_CASE("adam_step") {
    AdamHyper hp;
    hp.lr = 0.1;
    SECTION("zero gradient leaves parameters unchanged") {
        Tensor p = Tensor::zeros({3});
        p[0] = 1.0; p[1] = -2.0; p[2] = 0.5;
        const Tensor before = p;
        Tensor g = Tensor::zeros({3});
        AdamSlot slot;
        adam_step(p, g, slot, hp, 1);
        for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i] == before[i]);
    }
    SECTION("first step moves by about lr against the gradient sign") {
        Tensor p = Tensor::zeros({2});
        Tensor g = Tensor::zeros({2});
        g[0] = 0.37; g[1] = -12.0;
        AdamSlot slot;
        adam_step(p, g, slot, hp, 1);
        CHECK(p[0] == Catch::Approx(-hp.lr).margin(1e-6));
        CHECK(p[1] == Catch::Approx(hp.lr).margin(1e-6));
    }
    SECTION("100 steps minimize (w-3)^2 from w=0") {
        Tensor w = Tensor::zeros({1});
        AdamSlot slot;
        for (int step = 1; step <= 100; ++step) {
            Tensor g = Tensor::zeros({1});
            g[0] = 2.0 * (w[0] - 3.0);
            adam_step(w, g, slot, hp, step);
        }
        CHECK(std::abs(w[0] - 3.0) < 0.01);
    }
    SECTION("shape mismatch is rejected") {
        Tensor p = Tensor::zeros({2});
        Tensor g = Tensor::zeros({3});
        AdamSlot slot;
        CHECK_THROWS_AS(adam_step(p, g, slot, AdamHyper{}, 1), std::invalid_argument);
    }
}

TEST_CASE("rng determinism and stream splitting") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng base(42);
    Rng s1 = base.split(1);
    Rng s2 = base.split(2);
    Rng s1_again = Rng(42).split(1);
    CHECK(s1.next_u64() == s1_again.next_u64());
    CHECK(s1.next_u64() != s2.next_u64());

    Rng u(9);
    for (int i = 0; i < 1000; ++i) {
        const double x = u.uniform();
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
        CHECK(u.below(7) < 7);
    }
}

TEST_CASE("tensor shape bookkeeping") {
    Tensor t({2, 3});
    CHECK(t.size() == 6);
    t(1, 2) = 4.5;
    CHECK(t[5] == 4.5);
    Tensor other({3, 2});
    CHECK_THROWS_AS(t.add_scaled(other, 1.0), std::invalid_argument);
}
