#ifndef GRAMINSPECT_CRF_HPP
#define GRAMINSPECT_CRF_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "graminspect/numerics.hpp"

namespace graminspect {

// Linear-chain CRF over K labels with explicit START/END states. The
// transition matrix is (K+2)x(K+2); row/column indices K and K+1 are START
// and END. Entries into START and out of END are never read by any path.
//
//   score(V, y) = A[START][y1] + sum_i A[y_i][y_{i+1}] + A[yN][END]
//               + sum_i V[i][y_i]

inline constexpr int crf_start_state(int k) { return k; }
inline constexpr int crf_end_state(int k) { return k + 1; }

struct CrfGradients {
    Tensor d_emissions;     // N x K
    Tensor d_transitions;   // (K+2) x (K+2); zero on unused entries
};

inline void crf_check_inputs(const Tensor& emissions, const Tensor& transitions) {
    if (emissions.rank() != 2 || emissions.rows() < 1)
        throw std::invalid_argument("crf: emissions must be N x K with N >= 1");
    const std::size_t k = emissions.cols();
    if (transitions.rank() != 2 || transitions.rows() != k + 2 || transitions.cols() != k + 2)
        throw std::invalid_argument("crf: transitions must be (K+2) x (K+2)");
}

inline double crf_score(const Tensor& emissions, const std::vector<int>& labels,
                        const Tensor& transitions) {
    crf_check_inputs(emissions, transitions);
    const std::size_t n = emissions.rows();
    const int k = static_cast<int>(emissions.cols());
    if (labels.size() != n)
        throw std::invalid_argument("crf_score: label/emissions length mismatch");
    for (int y : labels)
        if (y < 0 || y >= k) throw std::invalid_argument("crf_score: label out of range");
    double score = transitions(crf_start_state(k), labels[0]);
    for (std::size_t i = 0; i + 1 < n; ++i)
        score += transitions(labels[i], labels[i + 1]);
    score += transitions(labels[n - 1], crf_end_state(k));
    for (std::size_t i = 0; i < n; ++i) score += emissions(i, labels[i]);
    return score;
}

// log sum over all K^N label sequences of exp(score), via the forward
// algorithm with log-sum-exp recurrences.
inline double crf_log_partition(const Tensor& emissions, const Tensor& transitions) {
    crf_check_inputs(emissions, transitions);
    const std::size_t n = emissions.rows();
    const int k = static_cast<int>(emissions.cols());
    std::vector<double> alpha(k), next(k), buf(k);
    for (int y = 0; y < k; ++y)
        alpha[y] = transitions(crf_start_state(k), y) + emissions(0, y);
    for (std::size_t t = 1; t < n; ++t) {
        for (int y = 0; y < k; ++y) {
            for (int j = 0; j < k; ++j) buf[j] = alpha[j] + transitions(j, y);
            next[y] = log_sum_exp(buf) + emissions(t, y);
        }
        alpha.swap(next);
    }
    for (int y = 0; y < k; ++y) buf[y] = alpha[y] + transitions(y, crf_end_state(k));
    return log_sum_exp(buf);
}

// Negative log-likelihood of `labels` plus exact gradients w.r.t. emissions
// and transitions: (marginal - indicator) expectations from forward-backward.
inline double crf_nll(const Tensor& emissions, const std::vector<int>& labels,
                      const Tensor& transitions, CrfGradients* grads = nullptr) {
    crf_check_inputs(emissions, transitions);
    const std::size_t n = emissions.rows();
    const int k = static_cast<int>(emissions.cols());
    const int start = crf_start_state(k), end = crf_end_state(k);
    if (labels.size() != n)
        throw std::invalid_argument("crf_nll: label/emissions length mismatch");

    // Forward and backward tables in log space.
    Tensor alpha({n, static_cast<std::size_t>(k)});
    Tensor beta({n, static_cast<std::size_t>(k)});
    std::vector<double> buf(k);
    for (int y = 0; y < k; ++y) alpha(0, y) = transitions(start, y) + emissions(0, y);
    for (std::size_t t = 1; t < n; ++t) {
        for (int y = 0; y < k; ++y) {
            for (int j = 0; j < k; ++j) buf[j] = alpha(t - 1, j) + transitions(j, y);
            alpha(t, y) = log_sum_exp(buf) + emissions(t, y);
        }
    }
    for (int y = 0; y < k; ++y) beta(n - 1, y) = transitions(y, end);
    for (std::size_t t = n - 1; t-- > 0;) {
        for (int j = 0; j < k; ++j) {
            for (int y = 0; y < k; ++y)
                buf[y] = transitions(j, y) + emissions(t + 1, y) + beta(t + 1, y);
            beta(t, j) = log_sum_exp(buf);
        }
    }
    for (int y = 0; y < k; ++y) buf[y] = alpha(n - 1, y) + transitions(y, end);
    const double log_z = log_sum_exp(buf);
    const double gold = crf_score(emissions, labels, transitions);
    const double loss = log_z - gold;

    if (grads) {
        grads->d_emissions = Tensor({n, static_cast<std::size_t>(k)});
        grads->d_transitions = Tensor({static_cast<std::size_t>(k + 2),
                                       static_cast<std::size_t>(k + 2)});
        Tensor& dv = grads->d_emissions;
        Tensor& da = grads->d_transitions;
        // Unary marginals.
        for (std::size_t t = 0; t < n; ++t)
            for (int y = 0; y < k; ++y)
                dv(t, y) = std::exp(alpha(t, y) + beta(t, y) - log_z);
        // Boundary transitions share the unary marginals.
        for (int y = 0; y < k; ++y) {
            da(start, y) = dv(0, y);
            da(y, end) = dv(n - 1, y);
        }
        // Pairwise marginals for interior transitions.
        for (std::size_t t = 0; t + 1 < n; ++t) {
            for (int i = 0; i < k; ++i) {
                for (int j = 0; j < k; ++j) {
                    da(i, j) += std::exp(alpha(t, i) + transitions(i, j) +
                                         emissions(t + 1, j) + beta(t + 1, j) - log_z);
                }
            }
        }
        // Subtract the indicator counts of the gold path.
        for (std::size_t t = 0; t < n; ++t) dv(t, labels[t]) -= 1.0;
        da(start, labels[0]) -= 1.0;
        da(labels[n - 1], end) -= 1.0;
        for (std::size_t t = 0; t + 1 < n; ++t) da(labels[t], labels[t + 1]) -= 1.0;
    }
    return loss;
}

// Argmax label sequence under the CRF score, START/END terms included.
// Ties break toward the smallest label index at every backtrack step, so
// decoding is deterministic across platforms.
inline std::vector<int> viterbi_decode(const Tensor& emissions, const Tensor& transitions) {
    crf_check_inputs(emissions, transitions);
    const std::size_t n = emissions.rows();
    const int k = static_cast<int>(emissions.cols());
    const int start = crf_start_state(k), end = crf_end_state(k);

    Tensor delta({n, static_cast<std::size_t>(k)});
    std::vector<std::vector<int>> back(n, std::vector<int>(k, 0));
    for (int y = 0; y < k; ++y) delta(0, y) = transitions(start, y) + emissions(0, y);
    for (std::size_t t = 1; t < n; ++t) {
        for (int y = 0; y < k; ++y) {
            double best = -std::numeric_limits<double>::infinity();
            int arg = 0;
            for (int j = 0; j < k; ++j) {
                const double cand = delta(t - 1, j) + transitions(j, y);
                if (cand > best) {
                    best = cand;
                    arg = j;
                }
            }
            delta(t, y) = best + emissions(t, y);
            back[t][y] = arg;
        }
    }
    double best = -std::numeric_limits<double>::infinity();
    int arg = 0;
    for (int y = 0; y < k; ++y) {
        const double cand = delta(n - 1, y) + transitions(y, end);
        if (cand > best) {
            best = cand;
            arg = y;
        }
    }
    std::vector<int> path(n);
    path[n - 1] = arg;
    for (std::size_t t = n - 1; t > 0; --t) path[t - 1] = back[t][path[t]];
    return path;
}

}  // namespace graminspect

#endif  // GRAMINSPECT_CRF_HPP
