#ifndef GRAMINSPECT_LSTM_HPP
#define GRAMINSPECT_LSTM_HPP

#include <cmath>
#include <vector>

#include "graminspect/numerics.hpp"

namespace graminspect {

// Single-layer BiLSTM with the standard gate equations. Output row t is the
// concatenation of the left-to-right and right-to-left hidden states.

struct LstmDirection {
    Param wx;   // 4H x D, gate rows ordered [input, forget, cell, output]
    Param wh;   // 4H x H
    Param b;    // 4H

    void init_shapes(int in_dim, int hidden) {
        wx.init_shape({static_cast<std::size_t>(4 * hidden), static_cast<std::size_t>(in_dim)});
        wh.init_shape({static_cast<std::size_t>(4 * hidden), static_cast<std::size_t>(hidden)});
        b.init_shape({static_cast<std::size_t>(4 * hidden)});
    }
};

struct BiLstmParams {
    int in_dim = 0;
    int hidden = 0;
    LstmDirection fwd;
    LstmDirection bwd;

    int output_width() const { return 2 * hidden; }

    void init(Rng& rng) {
        fwd.init_shapes(in_dim, hidden);
        bwd.init_shapes(in_dim, hidden);
        const double r = 1.0 / std::sqrt(static_cast<double>(hidden));
        for (LstmDirection* d : {&fwd, &bwd}) {
            for (double& x : d->wx.value.data()) x = rng.uniform(-r, r);
            for (double& x : d->wh.value.data()) x = rng.uniform(-r, r);
            // Forget-gate bias starts at 1 so early training keeps memory.
            for (int g = 0; g < hidden; ++g) d->b.value[hidden + g] = 1.0;
        }
    }

    void zero_grad() {
        for (LstmDirection* d : {&fwd, &bwd}) {
            d->wx.zero_grad();
            d->wh.zero_grad();
            d->b.zero_grad();
        }
    }
};

namespace detail {

struct LstmDirTrace {
    std::vector<std::vector<double>> gates;   // per step, 4H post-activation
    std::vector<std::vector<double>> cell;    // per step, H
    std::vector<std::vector<double>> cell_tanh;
    std::vector<std::vector<double>> hidden;
    std::vector<int> order;                    // positions in processing order
};

// One direction over `order`. Appends h_t into out rows at the original
// positions.
inline void lstm_dir_forward(const Tensor& input, const LstmDirection& dir, int hidden,
                             const std::vector<int>& order, Tensor& out,
                             std::size_t out_col, LstmDirTrace* trace) {
    const std::size_t in_dim = input.cols();
    std::vector<double> h(hidden, 0.0), c(hidden, 0.0);
    if (trace) trace->order = order;
    for (int pos : order) {
        std::vector<double> pre(4 * hidden);
        for (int r = 0; r < 4 * hidden; ++r) {
            double s = dir.b.value[r];
            for (std::size_t d = 0; d < in_dim; ++d) s += dir.wx.value(r, d) * input(pos, d);
            for (int k = 0; k < hidden; ++k) s += dir.wh.value(r, k) * h[k];
            pre[r] = s;
        }
        std::vector<double> gate(4 * hidden);
        std::vector<double> c_new(hidden), ct(hidden), h_new(hidden);
        for (int g = 0; g < hidden; ++g) {
            const double i = sigmoid(pre[g]);
            const double f = sigmoid(pre[hidden + g]);
            const double cand = std::tanh(pre[2 * hidden + g]);
            const double o = sigmoid(pre[3 * hidden + g]);
            gate[g] = i;
            gate[hidden + g] = f;
            gate[2 * hidden + g] = cand;
            gate[3 * hidden + g] = o;
            c_new[g] = f * c[g] + i * cand;
            ct[g] = std::tanh(c_new[g]);
            h_new[g] = o * ct[g];
        }
        if (trace) {
            trace->gates.push_back(gate);
            trace->cell.push_back(c_new);
            trace->cell_tanh.push_back(ct);
            trace->hidden.push_back(h_new);
        }
        c = std::move(c_new);
        h = h_new;
        for (int g = 0; g < hidden; ++g) out(pos, out_col + g) = h_new[g];
    }
}

inline void lstm_dir_backward(const Tensor& input, LstmDirection& dir, int hidden,
                              const LstmDirTrace& trace, const Tensor& d_out,
                              std::size_t out_col, Tensor& d_input) {
    const std::size_t in_dim = input.cols();
    const std::size_t steps = trace.order.size();
    std::vector<double> dh(hidden, 0.0), dc(hidden, 0.0);
    for (std::size_t s = steps; s-- > 0;) {
        const int pos = trace.order[s];
        const std::vector<double>& gate = trace.gates[s];
        const std::vector<double>& ct = trace.cell_tanh[s];
        const std::vector<double>* c_prev = s > 0 ? &trace.cell[s - 1] : nullptr;
        const std::vector<double>* h_prev = s > 0 ? &trace.hidden[s - 1] : nullptr;

        std::vector<double> dpre(4 * hidden);
        for (int g = 0; g < hidden; ++g) {
            const double i = gate[g], f = gate[hidden + g];
            const double cand = gate[2 * hidden + g], o = gate[3 * hidden + g];
            const double dh_total = dh[g] + d_out(pos, out_col + g);
            const double do_ = dh_total * ct[g];
            double dc_total = dc[g] + dh_total * o * (1.0 - ct[g] * ct[g]);
            const double di = dc_total * cand;
            const double df = dc_total * (c_prev ? (*c_prev)[g] : 0.0);
            const double dcand = dc_total * i;
            dpre[g] = di * i * (1.0 - i);
            dpre[hidden + g] = df * f * (1.0 - f);
            dpre[2 * hidden + g] = dcand * (1.0 - cand * cand);
            dpre[3 * hidden + g] = do_ * o * (1.0 - o);
            dc[g] = dc_total * f;
        }
        std::fill(dh.begin(), dh.end(), 0.0);
        for (int r = 0; r < 4 * hidden; ++r) {
            const double d = dpre[r];
            if (d == 0.0) continue;
            dir.b.grad[r] += d;
            for (std::size_t k = 0; k < in_dim; ++k) {
                dir.wx.grad(r, k) += d * input(pos, k);
                d_input(pos, k) += d * dir.wx.value(r, k);
            }
            for (int k = 0; k < hidden; ++k) {
                if (h_prev) {
                    dir.wh.grad(r, k) += d * (*h_prev)[k];
                    dh[k] += d * dir.wh.value(r, k);
                }
            }
        }
    }
}

}  // namespace detail

struct BiLstmTrace {
    Tensor input;
    detail::LstmDirTrace fwd;
    detail::LstmDirTrace bwd;
};

inline Tensor bilstm_forward(const Tensor& input, const BiLstmParams& params,
                             BiLstmTrace* trace = nullptr) {
    if (input.rank() != 2 || input.cols() != static_cast<std::size_t>(params.in_dim))
        throw std::invalid_argument("bilstm_forward: input width mismatch");
    const std::size_t n = input.rows();
    Tensor out({n, static_cast<std::size_t>(params.output_width())});
    std::vector<int> fwd_order(n), bwd_order(n);
    for (std::size_t t = 0; t < n; ++t) {
        fwd_order[t] = static_cast<int>(t);
        bwd_order[t] = static_cast<int>(n - 1 - t);
    }
    if (trace) trace->input = input;
    detail::lstm_dir_forward(input, params.fwd, params.hidden, fwd_order, out, 0,
                             trace ? &trace->fwd : nullptr);
    detail::lstm_dir_forward(input, params.bwd, params.hidden, bwd_order, out,
                             params.hidden, trace ? &trace->bwd : nullptr);
    return out;
}

// Accumulates parameter gradients; returns d(input).
inline Tensor bilstm_backward(const BiLstmTrace& trace, BiLstmParams& params,
                              const Tensor& d_out) {
    const std::size_t n = trace.input.rows();
    if (d_out.rows() != n ||
        d_out.cols() != static_cast<std::size_t>(params.output_width()))
        throw std::invalid_argument("bilstm_backward: upstream gradient shape mismatch");
    Tensor d_input({n, trace.input.cols()});
    detail::lstm_dir_backward(trace.input, params.fwd, params.hidden, trace.fwd, d_out, 0,
                              d_input);
    detail::lstm_dir_backward(trace.input, params.bwd, params.hidden, trace.bwd, d_out,
                              params.hidden, d_input);
    return d_input;
}

}  // namespace graminspect

#endif  // GRAMINSPECT_LSTM_HPP
