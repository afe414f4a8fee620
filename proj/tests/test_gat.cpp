#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "graminspect/gat.hpp"
#include "graminspect/numerics.hpp"

using namespace graminspect;

namespace {

CharGraph ring_graph(int n) {
    CharGraph g(n);
    for (int i = 0; i < n; ++i) g.add_edge(i, (i + 1) % n, kEdgeChain);
    g.finalize();
    return g;
}

CharGraph random_graph(Rng& rng, int n) {
    CharGraph g(n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (rng.uniform() < 0.4) g.add_edge(i, j, kEdgeChain);
    g.finalize();
    return g;
}

Tensor random_features(Rng& rng, int n, int d) {
    Tensor f({static_cast<std::size_t>(n), static_cast<std::size_t>(d)});
    for (double& x : f.data()) x = rng.uniform(-1.0, 1.0);
    return f;
}

GatLayerParams random_layer(Rng& rng, int heads, int in_dim, int out_dim, GatMode mode,
                            GatActivation act = GatActivation::Elu) {
    GatLayerParams p;
    p.heads = heads;
    p.in_dim = in_dim;
    p.out_dim = out_dim;
    p.mode = mode;
    p.activation = act;
    p.init(rng);
    return p;
}

// Flatten all layer parameters (and optionally the input features) for
// finite-difference checks.
std::vector<double> flatten_layer(const GatLayerParams& p) {
    std::vector<double> out;
    for (const Param& w : p.w) out.insert(out.end(), w.value.data().begin(), w.value.data().end());
    for (const Param& a : p.a) out.insert(out.end(), a.value.data().begin(), a.value.data().end());
    return out;
}

void unflatten_layer(GatLayerParams& p, const std::vector<double>& flat) {
    std::size_t k = 0;
    for (Param& w : p.w)
        for (double& x : w.value.data()) x = flat[k++];
    for (Param& a : p.a)
        for (double& x : a.value.data()) x = flat[k++];
}

std::vector<double> flatten_layer_grads(const GatLayerParams& p) {
    std::vector<double> out;
    for (const Param& w : p.w) out.insert(out.end(), w.grad.data().begin(), w.grad.data().end());
    for (const Param& a : p.a) out.insert(out.end(), a.grad.data().begin(), a.grad.data().end());
    return out;
}

}  // namespace

TEST_CASE("gat_attention") {
    Rng rng(21);
    SECTION("zero attention vector gives uniform neighborhoods") {
        GatLayerParams p = random_layer(rng, 1, 3, 2, GatMode::Concat);
        p.a[0].value.fill(0.0);
        const CharGraph g = ring_graph(5);
        const Tensor f = random_features(rng, 5, 3);
        const Tensor alpha = gat_attention(f, g, p, 0);
        for (int i = 0; i < 5; ++i)
            for (int j : g.neighbors(i))
                CHECK(alpha(i, j) == Catch::Approx(1.0 / 3).epsilon(1e-12));
    }
    SECTION("a node with only its self-loop attends to itself") {
        GatLayerParams p = random_layer(rng, 1, 3, 2, GatMode::Concat);
        CharGraph g(3);
        g.add_edge(0, 1, kEdgeChain);   // node 2 stays isolated
        g.finalize();
        const Tensor f = random_features(rng, 3, 3);
        const Tensor alpha = gat_attention(f, g, p, 0);
        CHECK(alpha(2, 2) == 1.0);
        CHECK(alpha(2, 0) == 0.0);
        CHECK(alpha(2, 1) == 0.0);
    }
    SECTION("two identical connected nodes split attention evenly") {
        GatLayerParams p = random_layer(rng, 1, 3, 2, GatMode::Concat);
        CharGraph g(2);
        g.add_edge(0, 1, kEdgeChain);
        g.finalize();
        Tensor f({2, 3});
        for (std::size_t j = 0; j < 3; ++j) f(0, j) = f(1, j) = 0.3 * (j + 1);
        const Tensor alpha = gat_attention(f, g, p, 0);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                CHECK(alpha(i, j) == Catch::Approx(0.5).epsilon(1e-12));
    }
    SECTION("rows sum to one over the neighborhood and vanish outside") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            Rng r(900 + seed);
            const int n = 2 + static_cast<int>(r.below(6));
            const CharGraph g = random_graph(r, n);
            GatLayerParams p = random_layer(r, 2, 4, 3, GatMode::Concat);
            const Tensor f = random_features(r, n, 4);
            for (int m = 0; m < 2; ++m) {
                const Tensor alpha = gat_attention(f, g, p, m);
                for (int i = 0; i < n; ++i) {
                    double row = 0.0;
                    for (int j = 0; j < n; ++j) {
                        if (!g.has_edge(i, j)) CHECK(alpha(i, j) == 0.0);
                        row += alpha(i, j);
                    }
                    CHECK(row == Catch::Approx(1.0).margin(1e-10));
                }
            }
        }
    }
}

TEST_CASE("gat_forward") {
    Rng rng(22);
    SECTION("single self-looped node with identity activation is W f") {
        GatLayerParams p = random_layer(rng, 1, 3, 2, GatMode::Concat,
                                        GatActivation::Identity);
        CharGraph g(1);
        g.finalize();
        const Tensor f = random_features(rng, 1, 3);
        const Tensor out = gat_forward(f, g, p);
        for (std::size_t o = 0; o < 2; ++o) {
            double expect = 0.0;
            for (std::size_t c = 0; c < 3; ++c) expect += p.w[0].value(o, c) * f(0, c);
            CHECK(out(0, o) == Catch::Approx(expect).epsilon(1e-12));
        }
    }
    SECTION("two identical heads concatenate the same block twice") {
        GatLayerParams p = random_layer(rng, 2, 3, 2, GatMode::Concat);
        p.w[1].value = p.w[0].value;
        p.a[1].value = p.a[0].value;
        const CharGraph g = ring_graph(4);
        const Tensor f = random_features(rng, 4, 3);
        const Tensor out = gat_forward(f, g, p);
        REQUIRE(out.cols() == 4);
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t o = 0; o < 2; ++o)
                CHECK(out(i, o) == Catch::Approx(out(i, 2 + o)).epsilon(1e-14));
    }
    SECTION("average mode matches a direct dense evaluation") {
        Rng r(23);
        const int n = 5, in = 4, out_dim = 3, heads = 2;
        const CharGraph g = random_graph(r, n);
        GatLayerParams p = random_layer(r, heads, in, out_dim, GatMode::Average);
        const Tensor f = random_features(r, n, in);
        const Tensor got = gat_forward(f, g, p);

        // Dense oracle straight from the averaging formula.
        for (int i = 0; i < n; ++i) {
            std::vector<double> mean(out_dim, 0.0);
            for (int m = 0; m < heads; ++m) {
                // projections
                Tensor gm({static_cast<std::size_t>(n), static_cast<std::size_t>(out_dim)});
                for (int j = 0; j < n; ++j)
                    for (int o = 0; o < out_dim; ++o) {
                        double s = 0.0;
                        for (int c = 0; c < in; ++c) s += p.w[m].value(o, c) * f(j, c);
                        gm(j, o) = s;
                    }
                // attention row i
                std::vector<double> logits;
                std::vector<int> nbr;
                for (int j = 0; j < n; ++j) {
                    if (!g.has_edge(i, j)) continue;
                    nbr.push_back(j);
                    double s = 0.0;
                    for (int o = 0; o < out_dim; ++o)
                        s += p.a[m].value[o] * gm(i, o) +
                             p.a[m].value[out_dim + o] * gm(j, o);
                    logits.push_back(leaky_relu(s, p.leaky_slope));
                }
                const std::vector<double> alpha =
                    masked_softmax(logits, std::vector<bool>(logits.size(), true));
                for (std::size_t t = 0; t < nbr.size(); ++t)
                    for (int o = 0; o < out_dim; ++o)
                        mean[o] += alpha[t] * gm(nbr[t], o) / heads;
            }
            for (int o = 0; o < out_dim; ++o)
                CHECK(got(i, o) == Catch::Approx(elu(mean[o])).margin(1e-12));
        }
    }
    SECTION("permutation equivariance") {
        Rng r(24);
        for (int trial = 0; trial < 20; ++trial) {
            const int n = 3 + static_cast<int>(r.below(5));
            const CharGraph g = random_graph(r, n);
            GatLayerParams p = random_layer(r, 2, 3, 2,
                                            trial % 2 ? GatMode::Average : GatMode::Concat);
            const Tensor f = random_features(r, n, 3);
            std::vector<int> perm(n);
            for (int i = 0; i < n; ++i) perm[i] = i;
            r.shuffle(perm);

            CharGraph pg(n);
            for (const auto& [edge, tags] : g.edges())
                pg.add_edge(perm[edge.first], perm[edge.second], tags);
            pg.finalize();
            Tensor pf({static_cast<std::size_t>(n), 3});
            for (int i = 0; i < n; ++i)
                for (std::size_t c = 0; c < 3; ++c) pf(perm[i], c) = f(i, c);

            const Tensor out = gat_forward(f, g, p);
            const Tensor pout = gat_forward(pf, pg, p);
            for (int i = 0; i < n; ++i)
                for (std::size_t o = 0; o < out.cols(); ++o)
                    CHECK(pout(perm[i], o) == Catch::Approx(out(i, o)).margin(1e-12));
        }
    }
    SECTION("row-wise logit shift leaves attention unchanged") {
        Rng r(25);
        const int n = 4;
        const CharGraph g = random_graph(r, n);
        GatLayerParams p = random_layer(r, 1, 3, 2, GatMode::Concat);
        const Tensor f = random_features(r, n, 3);
        GatTrace tr;
        gat_forward(f, g, p, &tr);
        for (int i = 0; i < n; ++i) {
            const auto& nb = tr.nbrs[i];
            std::vector<double> row, shifted;
            for (int j : nb) {
                const double e = leaky_relu(tr.logits[0](i, j), p.leaky_slope);
                row.push_back(e);
                shifted.push_back(e + 11.25);
            }
            const auto a1 = masked_softmax(row, std::vector<bool>(nb.size(), true));
            const auto a2 = masked_softmax(shifted, std::vector<bool>(nb.size(), true));
            for (std::size_t t = 0; t < nb.size(); ++t) {
                CHECK(std::abs(a1[t] - a2[t]) < 1e-12);
                CHECK(a1[t] == Catch::Approx(tr.attention[0](i, nb[t])).margin(1e-12));
            }
        }
    }
}

TEST_CASE("gat_backward") {
    SECTION("passes finite-difference checks over 20 seeds") {
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            Rng r(3000 + seed);
            const int n = 4, in = 3, out_dim = 2, heads = 2;
            const CharGraph g = random_graph(r, n);
            const GatMode mode = seed % 2 ? GatMode::Concat : GatMode::Average;
            GatLayerParams p = random_layer(r, heads, in, out_dim, mode);
            const Tensor f0 = random_features(r, n, in);
            Tensor upstream({static_cast<std::size_t>(n),
                             static_cast<std::size_t>(p.output_width())});
            for (double& x : upstream.data()) x = r.uniform(-1.0, 1.0);

            // Objective: sum(upstream .* forward(params, features)).
            std::vector<double> params = flatten_layer(p);
            params.insert(params.end(), f0.data().begin(), f0.data().end());
            const auto objective = [&](const std::vector<double>& flat) {
                GatLayerParams q = p;
                std::vector<double> layer_part(flat.begin(),
                                               flat.end() - f0.size());
                unflatten_layer(q, layer_part);
                Tensor f = f0;
                std::copy(flat.end() - f0.size(), flat.end(), f.data().begin());
                const Tensor out = gat_forward(f, g, q);
                double s = 0.0;
                for (std::size_t i = 0; i < out.size(); ++i) s += upstream[i] * out[i];
                return s;
            };

            GatTrace tr;
            gat_forward(f0, g, p, &tr);
            p.zero_grad();
            const Tensor df = gat_backward(tr, p, upstream);
            std::vector<double> analytic = flatten_layer_grads(p);
            analytic.insert(analytic.end(), df.data().begin(), df.data().end());

            const FiniteDiffReport report =
                finite_diff_check(objective, params, analytic, 1e-5, 1e-4);
            INFO("seed " << seed << ": " << report.describe());
            CHECK(report.pass);
        }
    }
    SECTION("zero upstream gradient produces zero parameter gradients") {
        Rng r(26);
        const CharGraph g = ring_graph(4);
        GatLayerParams p = random_layer(r, 2, 3, 2, GatMode::Concat);
        const Tensor f = random_features(r, 4, 3);
        GatTrace tr;
        gat_forward(f, g, p, &tr);
        p.zero_grad();
        const Tensor upstream({4, 4});
        const Tensor df = gat_backward(tr, p, upstream);
        for (double x : flatten_layer_grads(p)) CHECK(x == 0.0);
        for (double x : df.data()) CHECK(x == 0.0);
    }
    SECTION("an isolated node's feature gradient ignores other rows") {
        Rng r(27);
        CharGraph g(4);
        g.add_edge(0, 1, kEdgeChain);
        g.add_edge(1, 2, kEdgeChain);   // node 3 isolated
        g.finalize();
        GatLayerParams p = random_layer(r, 1, 3, 2, GatMode::Concat);
        const Tensor f = random_features(r, 4, 3);
        GatTrace tr;
        gat_forward(f, g, p, &tr);

        Tensor u1({4, 2}), u2({4, 2});
        for (std::size_t j = 0; j < 2; ++j) u1(3, j) = u2(3, j) = 0.7 * (j + 1);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 2; ++j) u2(i, j) = r.uniform(-1.0, 1.0);

        p.zero_grad();
        const Tensor d1 = gat_backward(tr, p, u1);
        p.zero_grad();
        const Tensor d2 = gat_backward(tr, p, u2);
        for (std::size_t c = 0; c < 3; ++c)
            CHECK(d1(3, c) == Catch::Approx(d2(3, c)).margin(1e-12));
    }
    SECTION("stale trace is rejected") {
        Rng r(28);
        const CharGraph g = ring_graph(3);
        GatLayerParams p = random_layer(r, 1, 3, 2, GatMode::Concat);
        GatTrace tr;
        gat_forward(random_features(r, 3, 3), g, p, &tr);
        GatLayerParams other = random_layer(r, 2, 3, 2, GatMode::Concat);
        const Tensor upstream({3, 4});
        CHECK_THROWS_AS(gat_backward(tr, other, upstream), std::invalid_argument);
    }
}

TEST_CASE("gat stack wiring") {
    Rng rng(29);
    GatStack stack = make_gat_stack(4, 3, 2, 5, 2);
    stack.init(rng);
    CHECK(stack.layers[0].mode == GatMode::Concat);
    CHECK(stack.layers[0].activation == GatActivation::Elu);
    CHECK(stack.layers[1].mode == GatMode::Average);
    CHECK(stack.layers[1].activation == GatActivation::Identity);
    CHECK(stack.layers[1].in_dim == 6);
    CHECK(stack.output_width() == 5);

    const CharGraph g = ring_graph(4);
    const Tensor f = random_features(rng, 4, 4);
    GatStackTrace tr;
    const Tensor out = gat_stack_forward(f, g, stack, &tr);
    CHECK(out.rows() == 4);
    CHECK(out.cols() == 5);
    CHECK(tr.traces.size() == 2);
}
