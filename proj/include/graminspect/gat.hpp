#ifndef GRAMINSPECT_GAT_HPP
#define GRAMINSPECT_GAT_HPP

#include <cmath>
#include <string>
#include <vector>

#include "graminspect/graphs.hpp"
#include "graminspect/numerics.hpp"

namespace graminspect {

// Multi-head graph attention layer.
//
// Per head m, with g_j = W^m f_j and a split as [a_self | a_nbr]:
//   s_ij   = a_self . g_i + a_nbr . g_j              (j in N_i)
//   alpha  = softmax over N_i of LeakyReLU(s_ij)
//   z_i    = sum_{j in N_i} alpha_ij g_j
// Interior layers concatenate sigma(z^m) across heads; the last layer
// averages z^m over heads before sigma.

enum class GatMode { Concat, Average };
enum class GatActivation { Elu, Identity };

struct GatLayerParams {
    int heads = 1;
    int in_dim = 0;
    int out_dim = 0;
    GatMode mode = GatMode::Concat;
    GatActivation activation = GatActivation::Elu;
    double leaky_slope = 0.2;

    std::vector<Param> w;   // per head, out_dim x in_dim
    std::vector<Param> a;   // per head, 2 * out_dim

    int output_width() const { return mode == GatMode::Concat ? heads * out_dim : out_dim; }

    void init(Rng& rng) {
        w.assign(heads, {});
        a.assign(heads, {});
        const double r = std::sqrt(6.0 / (in_dim + out_dim));
        for (int m = 0; m < heads; ++m) {
            w[m].init_shape({static_cast<std::size_t>(out_dim),
                             static_cast<std::size_t>(in_dim)});
            a[m].init_shape({static_cast<std::size_t>(2 * out_dim)});
            for (double& x : w[m].value.data()) x = rng.uniform(-r, r);
            for (double& x : a[m].value.data()) x = rng.uniform(-r, r);
        }
    }

    void zero_grad() {
        for (Param& p : w) p.zero_grad();
        for (Param& p : a) p.zero_grad();
    }

    double activate(double x) const {
        return activation == GatActivation::Elu ? elu(x) : x;
    }
    double activate_grad(double x) const {
        return activation == GatActivation::Elu ? elu_grad(x) : 1.0;
    }
};

struct GatTrace {
    std::size_t n = 0;
    std::vector<std::vector<int>> nbrs;      // self-contained copy of N_i
    Tensor features;                          // N x in_dim
    std::vector<Tensor> projected;            // per head, N x out_dim (g)
    std::vector<Tensor> logits;               // per head, N x N (s, pre-LeakyReLU)
    std::vector<Tensor> attention;            // per head, N x N (alpha, 0 off N_i)
    std::vector<Tensor> head_sum;             // per head, N x out_dim (z)
    Tensor mean_sum;                          // N x out_dim (average mode only)
};

namespace detail {

inline void gat_check(const Tensor& features, const CharGraph& graph,
                      const GatLayerParams& params) {
    if (features.rank() != 2 || features.cols() != static_cast<std::size_t>(params.in_dim))
        throw std::invalid_argument("gat: feature width != in_dim");
    if (features.rows() != graph.node_count())
        throw std::invalid_argument("gat: feature rows != graph node count");
    if (params.w.size() != static_cast<std::size_t>(params.heads))
        throw std::invalid_argument("gat: params not initialized");
}

// g = features . W^T for one head.
inline Tensor gat_project(const Tensor& features, const GatLayerParams& params, int m) {
    const std::size_t n = features.rows();
    const std::size_t in = params.in_dim, out = params.out_dim;
    const Tensor& w = params.w[m].value;
    Tensor g({n, out});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t o = 0; o < out; ++o) {
            double s = 0.0;
            for (std::size_t c = 0; c < in; ++c) s += w(o, c) * features(i, c);
            g(i, o) = s;
        }
    return g;
}

}  // namespace detail

// Attention matrix of head m: row i is a masked softmax over N_i; entries
// outside N_i are exactly zero. Exposed for tests and diagnostics.
inline Tensor gat_attention(const Tensor& features, const CharGraph& graph,
                            const GatLayerParams& params, int m,
                            Tensor* logits_out = nullptr, Tensor* projected_out = nullptr) {
    detail::gat_check(features, graph, params);
    const std::size_t n = graph.node_count();
    const std::size_t out = params.out_dim;
    const Tensor g = detail::gat_project(features, params, m);
    const Tensor& a = params.a[m].value;

    Tensor alpha({n, n});
    Tensor logits({n, n});
    std::vector<double> self_part(n);
    std::vector<double> nbr_part(n);
    for (std::size_t i = 0; i < n; ++i) {
        double si = 0.0, ni = 0.0;
        for (std::size_t o = 0; o < out; ++o) {
            si += a[o] * g(i, o);
            ni += a[out + o] * g(i, o);
        }
        self_part[i] = si;
        nbr_part[i] = ni;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const std::vector<int>& nb = graph.neighbors(static_cast<int>(i));
        std::vector<double> row(nb.size());
        for (std::size_t t = 0; t < nb.size(); ++t) {
            const double s = self_part[i] + nbr_part[nb[t]];
            logits(i, nb[t]) = s;
            row[t] = leaky_relu(s, params.leaky_slope);
        }
        const std::vector<double> soft =
            masked_softmax(row, std::vector<bool>(nb.size(), true));
        for (std::size_t t = 0; t < nb.size(); ++t) alpha(i, nb[t]) = soft[t];
    }
    if (logits_out) *logits_out = logits;
    if (projected_out) *projected_out = g;
    return alpha;
}

inline Tensor gat_forward(const Tensor& features, const CharGraph& graph,
                          const GatLayerParams& params, GatTrace* trace = nullptr) {
    detail::gat_check(features, graph, params);
    const std::size_t n = graph.node_count();
    const std::size_t out = params.out_dim;
    const int heads = params.heads;

    GatTrace local;
    GatTrace& tr = trace ? *trace : local;
    tr.n = n;
    tr.nbrs.resize(n);
    for (std::size_t i = 0; i < n; ++i) tr.nbrs[i] = graph.neighbors(static_cast<int>(i));
    tr.features = features;
    tr.projected.resize(heads);
    tr.logits.resize(heads);
    tr.attention.resize(heads);
    tr.head_sum.resize(heads);

    for (int m = 0; m < heads; ++m) {
        tr.attention[m] =
            gat_attention(features, graph, params, m, &tr.logits[m], &tr.projected[m]);
        Tensor z({n, out});
        const Tensor& alpha = tr.attention[m];
        const Tensor& g = tr.projected[m];
        for (std::size_t i = 0; i < n; ++i) {
            for (int j : tr.nbrs[i]) {
                const double aij = alpha(i, j);
                for (std::size_t o = 0; o < out; ++o) z(i, o) += aij * g(j, o);
            }
        }
        tr.head_sum[m] = std::move(z);
    }

    if (params.mode == GatMode::Concat) {
        Tensor result({n, static_cast<std::size_t>(heads) * out});
        for (int m = 0; m < heads; ++m)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t o = 0; o < out; ++o)
                    result(i, m * out + o) = params.activate(tr.head_sum[m](i, o));
        return result;
    }
    Tensor mean({n, out});
    for (int m = 0; m < heads; ++m)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t o = 0; o < out; ++o)
                mean(i, o) += tr.head_sum[m](i, o) / heads;
    tr.mean_sum = mean;
    Tensor result({n, out});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t o = 0; o < out; ++o)
            result(i, o) = params.activate(mean(i, o));
    return result;
}

// Exact gradients of gat_forward. Parameter gradients accumulate into
// params.w[m].grad / params.a[m].grad; the return value is d(features).
inline Tensor gat_backward(const GatTrace& trace, GatLayerParams& params,
                           const Tensor& d_out) {
    const std::size_t n = trace.n;
    const std::size_t out = params.out_dim;
    const std::size_t in = params.in_dim;
    const int heads = params.heads;
    if (trace.projected.size() != static_cast<std::size_t>(heads) ||
        (trace.projected.size() > 0 && trace.projected[0].rows() != n) ||
        trace.features.cols() != in)
        throw std::invalid_argument("gat_backward: trace does not match params");
    if (d_out.rows() != n ||
        d_out.cols() != static_cast<std::size_t>(params.output_width()))
        throw std::invalid_argument("gat_backward: upstream gradient shape mismatch");

    Tensor d_features({n, in});

    // Average mode shares one sigma'(mean) factor across heads.
    Tensor d_mean;
    if (params.mode == GatMode::Average) {
        d_mean = Tensor({n, out});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t o = 0; o < out; ++o)
                d_mean(i, o) = d_out(i, o) * params.activate_grad(trace.mean_sum(i, o));
    }

    for (int m = 0; m < heads; ++m) {
        const Tensor& g = trace.projected[m];
        const Tensor& alpha = trace.attention[m];
        const Tensor& z = trace.head_sum[m];
        const Tensor& a = params.a[m].value;

        Tensor dz({n, out});
        if (params.mode == GatMode::Concat) {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t o = 0; o < out; ++o)
                    dz(i, o) = d_out(i, m * out + o) * params.activate_grad(z(i, o));
        } else {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t o = 0; o < out; ++o)
                    dz(i, o) = d_mean(i, o) / heads;
        }

        Tensor dg({n, out});
        Tensor& da = params.a[m].grad;

        for (std::size_t i = 0; i < n; ++i) {
            const std::vector<int>& nb = trace.nbrs[i];
            // d(alpha_ij) and the aggregation term of dg.
            std::vector<double> dalpha(nb.size());
            for (std::size_t t = 0; t < nb.size(); ++t) {
                const int j = nb[t];
                double dot = 0.0;
                for (std::size_t o = 0; o < out; ++o) dot += dz(i, o) * g(j, o);
                dalpha[t] = dot;
                const double aij = alpha(i, j);
                for (std::size_t o = 0; o < out; ++o) dg(j, o) += aij * dz(i, o);
            }
            // Softmax backward over the row, then the LeakyReLU kink.
            double inner = 0.0;
            for (std::size_t t = 0; t < nb.size(); ++t)
                inner += alpha(i, nb[t]) * dalpha[t];
            for (std::size_t t = 0; t < nb.size(); ++t) {
                const int j = nb[t];
                const double de = alpha(i, j) * (dalpha[t] - inner);
                const double ds =
                    de * leaky_relu_grad(trace.logits[m](i, j), params.leaky_slope);
                // s_ij = a_self . g_i + a_nbr . g_j
                for (std::size_t o = 0; o < out; ++o) {
                    da[o] += ds * g(i, o);
                    da[out + o] += ds * g(j, o);
                    dg(i, o) += ds * a[o];
                    dg(j, o) += ds * a[out + o];
                }
            }
        }

        // g = features . W^T
        Tensor& dw = params.w[m].grad;
        const Tensor& w = params.w[m].value;
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t o = 0; o < out; ++o) {
                const double d = dg(j, o);
                if (d == 0.0) continue;
                for (std::size_t c = 0; c < in; ++c) {
                    dw(o, c) += d * trace.features(j, c);
                    d_features(j, c) += d * w(o, c);
                }
            }
        }
    }
    return d_features;
}

// ---------------------------------------------------------------------------
// The two-layer stack used by the taggers: an interior concat layer followed
// by a head-averaging output layer.

struct GatStack {
    std::vector<GatLayerParams> layers;

    int output_width() const {
        return layers.empty() ? 0 : layers.back().output_width();
    }

    void init(Rng& rng) {
        for (GatLayerParams& l : layers) l.init(rng);
    }
    void zero_grad() {
        for (GatLayerParams& l : layers) l.zero_grad();
    }
};

// Default structure: hidden concat layer (ELU) then average layer feeding the
// concatenation hand-off with identity activation.
inline GatStack make_gat_stack(int in_dim, int hidden_dim, int hidden_heads,
                               int out_dim, int out_heads) {
    GatStack stack;
    GatLayerParams l1;
    l1.heads = hidden_heads;
    l1.in_dim = in_dim;
    l1.out_dim = hidden_dim;
    l1.mode = GatMode::Concat;
    l1.activation = GatActivation::Elu;
    GatLayerParams l2;
    l2.heads = out_heads;
    l2.in_dim = hidden_dim * hidden_heads;
    l2.out_dim = out_dim;
    l2.mode = GatMode::Average;
    l2.activation = GatActivation::Identity;
    stack.layers = {l1, l2};
    return stack;
}

struct GatStackTrace {
    std::vector<GatTrace> traces;
};

inline Tensor gat_stack_forward(const Tensor& features, const CharGraph& graph,
                                GatStack& stack, GatStackTrace* trace) {
    Tensor h = features;
    if (trace) trace->traces.resize(stack.layers.size());
    for (std::size_t l = 0; l < stack.layers.size(); ++l)
        h = gat_forward(h, graph, stack.layers[l], trace ? &trace->traces[l] : nullptr);
    return h;
}

inline Tensor gat_stack_backward(const GatStackTrace& trace, GatStack& stack,
                                 const Tensor& d_out) {
    Tensor d = d_out;
    for (std::size_t l = stack.layers.size(); l-- > 0;)
        d = gat_backward(trace.traces[l], stack.layers[l], d);
    return d;
}

}  // namespace graminspect

#endif  // GRAMINSPECT_GAT_HPP
