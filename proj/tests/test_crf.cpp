#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "graminspect/crf.hpp"
#include "graminspect/numerics.hpp"

using namespace graminspect;

namespace {

// Test-side oracle: score a path by direct term-by-term summation,
// independent of crf_score.
double oracle_path_score(const Tensor& v, const std::vector<int>& y, const Tensor& a) {
    const int k = static_cast<int>(v.cols());
    double s = a(k, y.front());                      // START -> y1
    for (std::size_t i = 0; i + 1 < y.size(); ++i) s += a(y[i], y[i + 1]);
    s += a(y.back(), k + 1);                         // yN -> END
    for (std::size_t i = 0; i < y.size(); ++i) s += v(i, y[i]);
    return s;
}

// Enumerate all K^N paths.
template <typename Fn>
void for_each_path(int k, int n, Fn&& fn) {
    std::vector<int> y(n, 0);
    while (true) {
        fn(y);
        int i = n - 1;
        while (i >= 0 && y[i] == k - 1) y[i--] = 0;
        if (i < 0) break;
        ++y[i];
    }
}

double oracle_log_partition(const Tensor& v, const Tensor& a) {
    std::vector<double> scores;
    for_each_path(static_cast<int>(v.cols()), static_cast<int>(v.rows()),
                  [&](const std::vector<int>& y) { scores.push_back(oracle_path_score(v, y, a)); });
    return log_sum_exp(scores);
}

std::vector<int> oracle_viterbi(const Tensor& v, const Tensor& a) {
    std::vector<int> best;
    double best_score = -1e300;
    for_each_path(static_cast<int>(v.cols()), static_cast<int>(v.rows()),
                  [&](const std::vector<int>& y) {
                      const double s = oracle_path_score(v, y, a);
                      if (s > best_score) {
                          best_score = s;
                          best = y;
                      }
                  });
    return best;
}

Tensor random_emissions(Rng& rng, int n, int k) {
    Tensor v({static_cast<std::size_t>(n), static_cast<std::size_t>(k)});
    for (double& x : v.data()) x = rng.uniform(-2.0, 2.0);
    return v;
}

Tensor random_transitions(Rng& rng, int k) {
    Tensor a({static_cast<std::size_t>(k + 2), static_cast<std::size_t>(k + 2)});
    for (double& x : a.data()) x = rng.uniform(-1.5, 1.5);
    return a;
}

}  // namespace

TEST_CASE("crf_score") {
    SECTION("all zeros scores zero for every path") {
        const Tensor v({3, 2});
        const Tensor a({4, 4});
        CHECK(crf_score(v, {0, 1, 0}, a) == 0.0);
        CHECK(crf_score(v, {1, 1, 1}, a) == 0.0);
    }
    SECTION("N=1 uses START and END transitions") {
        Rng rng(5);
        Tensor v = random_emissions(rng, 1, 3);
        Tensor a = random_transitions(rng, 3);
        for (int y = 0; y < 3; ++y)
            CHECK(crf_score(v, {y}, a) ==
                  Catch::Approx(a(3, y) + v(0, y) + a(y, 4)).epsilon(1e-14));
    }
    SECTION("random instance matches the term-by-term oracle") {
        Rng rng(6);
        const Tensor v = random_emissions(rng, 4, 3);
        const Tensor a = random_transitions(rng, 3);
        for_each_path(3, 4, [&](const std::vector<int>& y) {
            CHECK(std::abs(crf_score(v, y, a) - oracle_path_score(v, y, a)) < 1e-12);
        });
    }
    SECTION("length mismatch is rejected") {
        const Tensor v({3, 2});
        const Tensor a({4, 4});
        CHECK_THROWS_AS(crf_score(v, {0, 1}, a), std::invalid_argument);
    }
}

TEST_CASE("crf_log_partition") {
    SECTION("uniform zero scores count the paths") {
        const Tensor v({2, 2});
        const Tensor a({4, 4});
        CHECK(crf_log_partition(v, a) == Catch::Approx(std::log(4.0)).epsilon(1e-12));
    }
    SECTION("matches exhaustive enumeration") {
        Rng rng(7);
        const Tensor v = random_emissions(rng, 5, 3);
        const Tensor a = random_transitions(rng, 3);
        CHECK(std::abs(crf_log_partition(v, a) - oracle_log_partition(v, a)) < 1e-10);
    }
    SECTION("dominates every single path score") {
        Rng rng(8);
        const Tensor v = random_emissions(rng, 4, 3);
        const Tensor a = random_transitions(rng, 3);
        const double log_z = crf_log_partition(v, a);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<int> y(4);
            for (int& x : y) x = static_cast<int>(rng.below(3));
            CHECK(log_z >= crf_score(v, y, a));
        }
    }
}

TEST_CASE("path probabilities sum to one") {
    Rng rng(9);
    for (const auto& [k, n] : std::vector<std::pair<int, int>>{{2, 4}, {3, 6}, {3, 3}}) {
        const Tensor v = random_emissions(rng, n, k);
        const Tensor a = random_transitions(rng, k);
        const double log_z = crf_log_partition(v, a);
        double total = 0.0;
        for_each_path(k, n, [&](const std::vector<int>& y) {
            total += std::exp(crf_score(v, y, a) - log_z);
        });
        CHECK(total == Catch::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("crf_nll") {
    SECTION("uniform two-label single position") {
        const Tensor v({1, 2});
        const Tensor a({4, 4});
        CrfGradients g;
        const double loss = crf_nll(v, {0}, a, &g);
        CHECK(loss == Catch::Approx(std::log(2.0)).epsilon(1e-12));
        CHECK(g.d_emissions(0, 0) == Catch::Approx(0.5 - 1.0).epsilon(1e-12));
        CHECK(g.d_emissions(0, 1) == Catch::Approx(0.5).epsilon(1e-12));
    }
    SECTION("loss is a negative log-probability") {
        Rng rng(10);
        const Tensor v = random_emissions(rng, 5, 3);
        const Tensor a = random_transitions(rng, 3);
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<int> y(5);
            for (int& x : y) x = static_cast<int>(rng.below(3));
            CHECK(crf_nll(v, y, a) >= 0.0);
        }
    }
    SECTION("gradients pass the finite-difference oracle") {
        Rng rng(11);
        const int n = 6, k = 4;
        const Tensor v0 = random_emissions(rng, n, k);
        const Tensor a0 = random_transitions(rng, k);
        std::vector<int> y(n);
        for (int& x : y) x = static_cast<int>(rng.below(k));

        // Flatten (V, A) into one parameter vector.
        std::vector<double> params(v0.data());
        params.insert(params.end(), a0.data().begin(), a0.data().end());
        const auto f = [&](const std::vector<double>& p) {
            Tensor v = v0, a = a0;
            std::copy(p.begin(), p.begin() + v.size(), v.data().begin());
            std::copy(p.begin() + v.size(), p.end(), a.data().begin());
            return crf_nll(v, y, a);
        };
        CrfGradients g;
        crf_nll(v0, y, a0, &g);
        std::vector<double> analytic(g.d_emissions.data());
        analytic.insert(analytic.end(), g.d_transitions.data().begin(),
                        g.d_transitions.data().end());
        const FiniteDiffReport report = finite_diff_check(f, params, analytic, 1e-5, 1e-4);
        INFO(report.describe());
        CHECK(report.pass);
    }
    SECTION("per-position emission shift cancels in the loss") {
        Rng rng(12);
        const Tensor v = random_emissions(rng, 4, 3);
        const Tensor a = random_transitions(rng, 3);
        std::vector<int> y = {2, 0, 1, 1};
        const double base_score = crf_score(v, y, a);
        const double base_log_z = crf_log_partition(v, a);
        const double base_loss = crf_nll(v, y, a);
        Tensor shifted = v;
        const double c = 3.7;
        for (int lab = 0; lab < 3; ++lab) shifted(2, lab) += c;
        CHECK(std::abs(crf_score(shifted, y, a) - (base_score + c)) < 1e-10);
        CHECK(std::abs(crf_log_partition(shifted, a) - (base_log_z + c)) < 1e-10);
        CHECK(std::abs(crf_nll(shifted, y, a) - base_loss) < 1e-10);
    }
}

TEST_CASE("viterbi_decode") {
    SECTION("separable argmax with zero transitions") {
        Tensor v({4, 3});
        for (std::size_t i = 0; i < 4; ++i) v(i, 2) = 5.0;
        const Tensor a({5, 5});
        CHECK(viterbi_decode(v, a) == std::vector<int>({2, 2, 2, 2}));
    }
    SECTION("all ties break to label 0") {
        const Tensor v({3, 4});
        const Tensor a({6, 6});
        CHECK(viterbi_decode(v, a) == std::vector<int>({0, 0, 0}));
    }
    SECTION("matches brute-force argmax on random instances") {
        Rng rng(13);
        for (int trial = 0; trial < 30; ++trial) {
            const int k = 2 + static_cast<int>(rng.below(2));
            const int n = 1 + static_cast<int>(rng.below(5));
            const Tensor v = random_emissions(rng, n, k);
            const Tensor a = random_transitions(rng, k);
            CHECK(viterbi_decode(v, a) == oracle_viterbi(v, a));
        }
    }
    SECTION("a strongly negative transition diverts the path") {
        // Emissions favor label 0 then label 1, but that bigram is forbidden.
        Tensor v({2, 3});
        v(0, 0) = 4.0;
        v(0, 2) = 3.5;
        v(1, 1) = 4.0;
        Tensor a({5, 5});
        a(0, 1) = -100.0;
        const std::vector<int> path = viterbi_decode(v, a);
        CHECK(path == oracle_viterbi(v, a));
        CHECK(path == std::vector<int>({2, 1}));
    }
    SECTION("beats 1000 random paths at enumeration-hostile sizes") {
        Rng rng(14);
        const int n = 40, k = 9;
        const Tensor v = random_emissions(rng, n, k);
        const Tensor a = random_transitions(rng, k);
        const double decoded = crf_score(v, viterbi_decode(v, a), a);
        for (int trial = 0; trial < 1000; ++trial) {
            std::vector<int> y(n);
            for (int& x : y) x = static_cast<int>(rng.below(k));
            CHECK(decoded >= crf_score(v, y, a));
        }
    }
}
