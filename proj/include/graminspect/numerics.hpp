#ifndef GRAMINSPECT_NUMERICS_HPP
#define GRAMINSPECT_NUMERICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "graminspect/common.hpp"

namespace graminspect {

// ---------------------------------------------------------------------------
// Dense row-major double tensor. All reference math in this project runs in
// double precision.

class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
        std::size_t n = 1;
        for (std::size_t d : shape_) n *= d;
        data_.assign(n, 0.0);
    }
    static Tensor zeros(std::initializer_list<std::size_t> shape) {
        return Tensor(std::vector<std::size_t>(shape));
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t rows() const { return shape_.at(0); }
    std::size_t cols() const { return shape_.at(1); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    void add_scaled(const Tensor& o, double scale) {
        if (!same_shape(o)) throw std::invalid_argument("Tensor::add_scaled shape mismatch");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += scale * o.data_[i];
    }

  private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// A learnable tensor and its gradient accumulator, registered under a stable
// name so optimizer state and checkpoints can key off it.
struct Param {
    Tensor value;
    Tensor grad;

    void init_shape(std::vector<std::size_t> shape) {
        value = Tensor(shape);
        grad = Tensor(std::move(shape));
    }
    void zero_grad() { grad.fill(0.0); }
};

// ---------------------------------------------------------------------------
// Deterministic RNG. Core generator is std::mt19937_64 (bit-exact by the
// standard on every platform); all distributions are hand-rolled so the
// stream never depends on library implementation details. Worker streams are
// derived with splitmix64, never shared.

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller (the sine mate is discarded so the
    // stream position is one draw per call pair, fixed forever).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    // Uniform integer in [0, n) by multiply-shift.
    std::size_t below(std::size_t n) {
        if (n == 0) throw std::invalid_argument("Rng::below(0)");
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

    // Independent child stream; derivation is splitmix64(splitmix64(seed) ^ id).
    Rng split(std::uint64_t stream_id) const {
        return Rng(splitmix64(splitmix64(seed_) ^ stream_id));
    }

    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

  private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;
};

// ---------------------------------------------------------------------------
// Elementary kernels.

inline double log_sum_exp(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("log_sum_exp: empty vector");
    const double m = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(m)) {
        // All -inf collapses to -inf; a NaN or +inf input is a caller bug.
        if (m == -std::numeric_limits<double>::infinity()) return m;
        throw std::invalid_argument("log_sum_exp: non-finite input");
    }
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

// Softmax restricted to the kept entries; masked-out entries are exactly 0.
inline std::vector<double> masked_softmax(const std::vector<double>& logits,
                                          const std::vector<bool>& mask) {
    if (logits.size() != mask.size())
        throw std::invalid_argument("masked_softmax: size mismatch");
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < logits.size(); ++i)
        if (mask[i]) m = std::max(m, logits[i]);
    if (m == -std::numeric_limits<double>::infinity())
        throw std::invalid_argument("masked_softmax: all-false mask");
    std::vector<double> out(logits.size(), 0.0);
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (!mask[i]) continue;
        out[i] = std::exp(logits[i] - m);
        z += out[i];
    }
    for (std::size_t i = 0; i < logits.size(); ++i)
        if (mask[i]) out[i] /= z;
    return out;
}

inline double leaky_relu(double x, double slope) {
    return x >= 0.0 ? x : slope * x;
}

inline double leaky_relu_grad(double x, double slope) {
    return x >= 0.0 ? 1.0 : slope;
}

inline double elu(double x) { return x > 0.0 ? x : std::expm1(x); }

inline double elu_grad(double x) { return x > 0.0 ? 1.0 : std::exp(x); }

inline double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                    : std::exp(x) / (1.0 + std::exp(x));
}

// ---------------------------------------------------------------------------
// Adam with bias correction. One slot per parameter tensor.

struct AdamHyper {
    double lr = 2e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamSlot {
    Tensor m;
    Tensor v;
};

// Single bias-corrected update on one tensor. `step` is the 1-based count of
// updates applied so far including this one.
inline void adam_step(Tensor& params, const Tensor& grads, AdamSlot& slot,
                      const AdamHyper& hp, std::uint64_t step) {
    if (!params.same_shape(grads)) throw std::invalid_argument("adam_step: shape mismatch");
    if (slot.m.size() == 0) {
        slot.m = Tensor(params.shape());
        slot.v = Tensor(params.shape());
    }
    const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        slot.m[i] = hp.beta1 * slot.m[i] + (1.0 - hp.beta1) * g;
        slot.v[i] = hp.beta2 * slot.v[i] + (1.0 - hp.beta2) * g * g;
        const double mhat = slot.m[i] / bc1;
        const double vhat = slot.v[i] / bc2;
        params[i] -= hp.lr * mhat / (std::sqrt(vhat) + hp.eps);
    }
}

// Optimizer over a named parameter list; slot order follows registration
// order, so updates are deterministic.
class AdamOptimizer {
  public:
    explicit AdamOptimizer(AdamHyper hp) : hp_(hp) {}

    void step(std::vector<std::pair<std::string, Param*>>& params) {
        ++step_;
        if (slots_.empty()) slots_.resize(params.size());
        if (slots_.size() != params.size())
            throw std::invalid_argument("AdamOptimizer: parameter count changed");
        for (std::size_t i = 0; i < params.size(); ++i) {
            adam_step(params[i].second->value, params[i].second->grad, slots_[i], hp_, step_);
        }
    }

    std::uint64_t steps() const { return step_; }
    const AdamHyper& hyper() const { return hp_; }

  private:
    AdamHyper hp_;
    std::uint64_t step_ = 0;
    std::vector<AdamSlot> slots_;
};

// ---------------------------------------------------------------------------
// Central finite-difference gradient check; the verification oracle behind
// every hand-derived backward pass.

struct FiniteDiffReport {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    bool pass = false;

    std::string describe() const {
        return "max_rel_error=" + std::to_string(max_rel_error) +
               " at coordinate " + std::to_string(worst_index) +
               " (analytic=" + std::to_string(worst_analytic) +
               ", central-diff=" + std::to_string(worst_numeric) + ")";
    }
};

// f is evaluated at perturbed copies of `params`; `analytic` must hold
// df/dparams at the unperturbed point. Relative error uses a floor so that
// near-zero coordinates are judged on an absolute scale.
inline FiniteDiffReport finite_diff_check(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& params, const std::vector<double>& analytic,
    double h = 1e-5, double tol = 1e-4) {
    if (params.size() != analytic.size())
        throw std::invalid_argument("finite_diff_check: size mismatch");
    FiniteDiffReport report;
    std::vector<double> probe = params;
    for (std::size_t i = 0; i < params.size(); ++i) {
        probe[i] = params[i] + h;
        const double fp = f(probe);
        probe[i] = params[i] - h;
        const double fm = f(probe);
        probe[i] = params[i];
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericError("finite_diff_check: non-finite objective at probe point");
        const double numeric = (fp - fm) / (2.0 * h);
        const double denom = std::max(std::abs(numeric) + std::abs(analytic[i]), 1e-4);
        const double rel = std::abs(numeric - analytic[i]) / denom;
        if (rel > report.max_rel_error) {
            report.max_rel_error = rel;
            report.worst_index = i;
            report.worst_analytic = analytic[i];
            report.worst_numeric = numeric;
        }
    }
    report.pass = report.max_rel_error < tol;
    return report;
}

}  // namespace graminspect

#endif  // GRAMINSPECT_NUMERICS_HPP
