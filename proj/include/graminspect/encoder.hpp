#ifndef GRAMINSPECT_ENCODER_HPP
#define GRAMINSPECT_ENCODER_HPP

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "graminspect/corpus.hpp"
#include "graminspect/numerics.hpp"

namespace graminspect {

// Character vocabulary with a reserved UNK slot at index 0. Built from the
// training corpus; iteration order is by codepoint so construction is
// deterministic.
struct Vocabulary {
    static constexpr int kUnk = 0;
    std::map<char32_t, int> index;

    int size() const { return static_cast<int>(index.size()) + 1; }

    int lookup(char32_t c) const {
        auto it = index.find(c);
        return it == index.end() ? kUnk : it->second;
    }

    static Vocabulary build(const std::vector<Sentence>& sentences) {
        Vocabulary v;
        std::map<char32_t, int>& idx = v.index;
        for (const Sentence& s : sentences)
            for (char32_t c : s.chars) idx.emplace(c, 0);
        int next = 1;
        for (auto& [c, i] : idx) i = next++;
        return v;
    }
};

enum class EncoderKind { Embedding, Transformer };

struct EncoderConfig {
    EncoderKind kind = EncoderKind::Embedding;
    int embed_dim = 128;
    int max_len = 128;      // stream length cap
    int tf_layers = 2;
    int tf_heads = 2;
    int tf_ff = 0;          // 0 -> 4 * embed_dim

    int ff_dim() const { return tf_ff > 0 ? tf_ff : 4 * embed_dim; }
};

struct TransformerLayerParams {
    Param wq, bq, wk, bk, wv, bv, wo, bo;        // attention, D x D / D
    Param w1, b1, w2, b2;                        // feed-forward
    Param ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;

    void init(Rng& rng, int d, int ff) {
        const auto mat = [&](Param& p, int r, int c) {
            p.init_shape({static_cast<std::size_t>(r), static_cast<std::size_t>(c)});
            const double lim = std::sqrt(6.0 / (r + c));
            for (double& x : p.value.data()) x = rng.uniform(-lim, lim);
        };
        const auto vec = [&](Param& p, int nvals, double v) {
            p.init_shape({static_cast<std::size_t>(nvals)});
            for (double& x : p.value.data()) x = v;
        };
        mat(wq, d, d); vec(bq, d, 0.0);
        mat(wk, d, d); vec(bk, d, 0.0);
        mat(wv, d, d); vec(bv, d, 0.0);
        mat(wo, d, d); vec(bo, d, 0.0);
        mat(w1, ff, d); vec(b1, ff, 0.0);
        mat(w2, d, ff); vec(b2, d, 0.0);
        vec(ln1_gamma, d, 1.0); vec(ln1_beta, d, 0.0);
        vec(ln2_gamma, d, 1.0); vec(ln2_beta, d, 0.0);
    }
};

struct EncoderParams {
    EncoderConfig config;
    Param embed;                                  // V x D
    Param pos;                                    // max_len x D (transformer only)
    std::vector<TransformerLayerParams> layers;

    void init(Rng& rng, int vocab_size) {
        embed.init_shape({static_cast<std::size_t>(vocab_size),
                          static_cast<std::size_t>(config.embed_dim)});
        for (double& x : embed.value.data()) x = 0.1 * rng.normal();
        if (config.kind == EncoderKind::Transformer) {
            pos.init_shape({static_cast<std::size_t>(config.max_len),
                            static_cast<std::size_t>(config.embed_dim)});
            for (double& x : pos.value.data()) x = 0.1 * rng.normal();
            layers.resize(config.tf_layers);
            for (auto& l : layers) l.init(rng, config.embed_dim, config.ff_dim());
        }
    }
};

namespace detail {

constexpr double kLnEps = 1e-5;

struct LayerNormTrace {
    Tensor normalized;             // x-hat
    std::vector<double> inv_std;   // per row
};

inline Tensor layer_norm_forward(const Tensor& x, const Param& gamma, const Param& beta,
                                 LayerNormTrace& tr) {
    const std::size_t n = x.rows(), d = x.cols();
    Tensor out({n, d});
    tr.normalized = Tensor({n, d});
    tr.inv_std.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < d; ++j) mean += x(i, j);
        mean /= d;
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double c = x(i, j) - mean;
            var += c * c;
        }
        var /= d;
        const double inv = 1.0 / std::sqrt(var + kLnEps);
        tr.inv_std[i] = inv;
        for (std::size_t j = 0; j < d; ++j) {
            const double nh = (x(i, j) - mean) * inv;
            tr.normalized(i, j) = nh;
            out(i, j) = gamma.value[j] * nh + beta.value[j];
        }
    }
    return out;
}

inline Tensor layer_norm_backward(const LayerNormTrace& tr, Param& gamma, Param& beta,
                                  const Tensor& d_out) {
    const std::size_t n = d_out.rows(), d = d_out.cols();
    Tensor dx({n, d});
    for (std::size_t i = 0; i < n; ++i) {
        double sum_dg = 0.0, sum_dg_nh = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double g = d_out(i, j) * gamma.value[j];
            sum_dg += g;
            sum_dg_nh += g * tr.normalized(i, j);
            gamma.grad[j] += d_out(i, j) * tr.normalized(i, j);
            beta.grad[j] += d_out(i, j);
        }
        const double m1 = sum_dg / d, m2 = sum_dg_nh / d;
        for (std::size_t j = 0; j < d; ++j) {
            const double g = d_out(i, j) * gamma.value[j];
            dx(i, j) = tr.inv_std[i] * (g - m1 - tr.normalized(i, j) * m2);
        }
    }
    return dx;
}

// y = x . W^T + b (row-wise affine)
inline Tensor affine_forward(const Tensor& x, const Param& w, const Param& b) {
    const std::size_t n = x.rows(), in = x.cols(), out = w.value.rows();
    Tensor y({n, out});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t o = 0; o < out; ++o) {
            double s = b.value[o];
            for (std::size_t c = 0; c < in; ++c) s += w.value(o, c) * x(i, c);
            y(i, o) = s;
        }
    return y;
}

inline Tensor affine_backward(const Tensor& x, Param& w, Param& b, const Tensor& d_y) {
    const std::size_t n = x.rows(), in = x.cols(), out = w.value.rows();
    Tensor dx({n, in});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t o = 0; o < out; ++o) {
            const double d = d_y(i, o);
            if (d == 0.0) continue;
            b.grad[o] += d;
            for (std::size_t c = 0; c < in; ++c) {
                w.grad(o, c) += d * x(i, c);
                dx(i, c) += d * w.value(o, c);
            }
        }
    return dx;
}

struct TransformerLayerTrace {
    Tensor input;                 // x
    Tensor q, k, v;               // N x D
    std::vector<Tensor> attn;     // per head, N x N
    Tensor ctx;                   // N x D
    Tensor attn_out;
    LayerNormTrace ln1;
    Tensor x1;                    // post-LN1
    Tensor ffn_pre;               // N x FF (pre-ReLU)
    Tensor ffn_hidden;            // N x FF (post-ReLU)
    LayerNormTrace ln2;
};

inline Tensor transformer_layer_forward(const Tensor& x, TransformerLayerParams& p,
                                        int heads, TransformerLayerTrace& tr) {
    const std::size_t n = x.rows(), d = x.cols();
    const std::size_t dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    tr.input = x;
    tr.q = affine_forward(x, p.wq, p.bq);
    tr.k = affine_forward(x, p.wk, p.bk);
    tr.v = affine_forward(x, p.wv, p.bv);
    tr.attn.assign(heads, Tensor({n, n}));
    tr.ctx = Tensor({n, d});
    for (int h = 0; h < heads; ++h) {
        const std::size_t base = h * dh;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> logits(n);
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t c = 0; c < dh; ++c) s += tr.q(i, base + c) * tr.k(j, base + c);
                logits[j] = s * scale;
            }
            const std::vector<double> a =
                masked_softmax(logits, std::vector<bool>(n, true));
            for (std::size_t j = 0; j < n; ++j) {
                tr.attn[h](i, j) = a[j];
                for (std::size_t c = 0; c < dh; ++c)
                    tr.ctx(i, base + c) += a[j] * tr.v(j, base + c);
            }
        }
    }
    tr.attn_out = affine_forward(tr.ctx, p.wo, p.bo);
    Tensor sum1({n, d});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) sum1(i, j) = x(i, j) + tr.attn_out(i, j);
    tr.x1 = layer_norm_forward(sum1, p.ln1_gamma, p.ln1_beta, tr.ln1);

    tr.ffn_pre = affine_forward(tr.x1, p.w1, p.b1);
    tr.ffn_hidden = tr.ffn_pre;
    for (double& vv : tr.ffn_hidden.data()) vv = vv > 0.0 ? vv : 0.0;
    const Tensor ffn_out = affine_forward(tr.ffn_hidden, p.w2, p.b2);
    Tensor sum2({n, d});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) sum2(i, j) = tr.x1(i, j) + ffn_out(i, j);
    return layer_norm_forward(sum2, p.ln2_gamma, p.ln2_beta, tr.ln2);
}

inline Tensor transformer_layer_backward(TransformerLayerTrace& tr,
                                         TransformerLayerParams& p, int heads,
                                         const Tensor& d_out) {
    const std::size_t n = tr.input.rows(), d = tr.input.cols();
    const std::size_t dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    const Tensor d_sum2 = layer_norm_backward(tr.ln2, p.ln2_gamma, p.ln2_beta, d_out);
    // d_sum2 flows to both x1 and the FFN branch.
    Tensor d_ffn_hidden = affine_backward(tr.ffn_hidden, p.w2, p.b2, d_sum2);
    for (std::size_t i = 0; i < d_ffn_hidden.size(); ++i)
        if (tr.ffn_pre[i] <= 0.0) d_ffn_hidden[i] = 0.0;
    Tensor d_x1 = affine_backward(tr.x1, p.w1, p.b1, d_ffn_hidden);
    d_x1.add_scaled(d_sum2, 1.0);

    const Tensor d_sum1 = layer_norm_backward(tr.ln1, p.ln1_gamma, p.ln1_beta, d_x1);
    Tensor d_ctx = affine_backward(tr.ctx, p.wo, p.bo, d_sum1);

    Tensor dq({n, d}), dk({n, d}), dv({n, d});
    for (int h = 0; h < heads; ++h) {
        const std::size_t base = h * dh;
        const Tensor& a = tr.attn[h];
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> d_a(n);
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t c = 0; c < dh; ++c) {
                    s += d_ctx(i, base + c) * tr.v(j, base + c);
                    dv(j, base + c) += a(i, j) * d_ctx(i, base + c);
                }
                d_a[j] = s;
            }
            double inner = 0.0;
            for (std::size_t j = 0; j < n; ++j) inner += a(i, j) * d_a[j];
            for (std::size_t j = 0; j < n; ++j) {
                const double d_logit = a(i, j) * (d_a[j] - inner) * scale;
                for (std::size_t c = 0; c < dh; ++c) {
                    dq(i, base + c) += d_logit * tr.k(j, base + c);
                    dk(j, base + c) += d_logit * tr.q(i, base + c);
                }
            }
        }
    }
    Tensor dx = affine_backward(tr.input, p.wq, p.bq, dq);
    dx.add_scaled(affine_backward(tr.input, p.wk, p.bk, dk), 1.0);
    dx.add_scaled(affine_backward(tr.input, p.wv, p.bv, dv), 1.0);
    dx.add_scaled(d_sum1, 1.0);   // residual
    return dx;
}

}  // namespace detail

struct EncoderTrace {
    std::vector<int> char_indices;
    std::vector<detail::TransformerLayerTrace> layers;
};

inline Tensor encoder_forward(const std::vector<int>& char_indices, EncoderParams& params,
                              EncoderTrace* trace = nullptr) {
    const std::size_t n = char_indices.size();
    const std::size_t d = params.config.embed_dim;
    if (n == 0) throw std::invalid_argument("encoder_forward: empty input");
    if (params.config.kind == EncoderKind::Transformer &&
        n > static_cast<std::size_t>(params.config.max_len))
        throw ParseError("sentence longer than the encoder stream length (" +
                         std::to_string(params.config.max_len) + ")");
    Tensor h({n, d});
    for (std::size_t t = 0; t < n; ++t) {
        const int idx = char_indices[t];
        for (std::size_t j = 0; j < d; ++j) {
            h(t, j) = params.embed.value(idx, j);
            if (params.config.kind == EncoderKind::Transformer)
                h(t, j) += params.pos.value(t, j);
        }
    }
    if (trace) trace->char_indices = char_indices;
    if (params.config.kind == EncoderKind::Transformer) {
        if (trace) trace->layers.resize(params.layers.size());
        detail::TransformerLayerTrace scratch;
        for (std::size_t l = 0; l < params.layers.size(); ++l) {
            detail::TransformerLayerTrace& tl = trace ? trace->layers[l] : scratch;
            h = detail::transformer_layer_forward(h, params.layers[l],
                                                  params.config.tf_heads, tl);
        }
    }
    return h;
}

inline void encoder_backward(EncoderTrace& trace, EncoderParams& params,
                             const Tensor& d_out) {
    Tensor d = d_out;
    if (params.config.kind == EncoderKind::Transformer) {
        for (std::size_t l = params.layers.size(); l-- > 0;)
            d = detail::transformer_layer_backward(trace.layers[l], params.layers[l],
                                                   params.config.tf_heads, d);
    }
    const std::size_t dcols = d.cols();
    for (std::size_t t = 0; t < trace.char_indices.size(); ++t) {
        const int idx = trace.char_indices[t];
        for (std::size_t j = 0; j < dcols; ++j) {
            params.embed.grad(idx, j) += d(t, j);
            if (params.config.kind == EncoderKind::Transformer)
                params.pos.grad(t, j) += d(t, j);
        }
    }
}

}  // namespace graminspect

#endif  // GRAMINSPECT_ENCODER_HPP
