#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "vortexlab/rng.hpp"
#include "vortexlab/tensor.hpp"

namespace vortexlab {

/// Named flat tensors for all trainable weights. Iteration order is the
/// sorted name order, which fixes parameter registration order on the tape.
template <typename T>
struct ParameterStore {
    std::map<std::string, Tensor<T>> params;

    Tensor<T>& at(const std::string& name) {
        auto it = params.find(name);
        if (it == params.end()) throw std::out_of_range("parameter not found: " + name);
        return it->second;
    }
    const Tensor<T>& at(const std::string& name) const {
        auto it = params.find(name);
        if (it == params.end()) throw std::out_of_range("parameter not found: " + name);
        return it->second;
    }
    bool has(const std::string& name) const { return params.count(name) > 0; }

    long total_size() const {
        long n = 0;
        for (const auto& [k, v] : params) n += v.numel();
        return n;
    }

    std::vector<T> flatten() const {
        std::vector<T> out;
        out.reserve(total_size());
        for (const auto& [k, v] : params) out.insert(out.end(), v.data.begin(), v.data.end());
        return out;
    }

    void unflatten(const std::vector<T>& flat) {
        size_t off = 0;
        for (auto& [k, v] : params) {
            std::copy(flat.begin() + off, flat.begin() + off + v.data.size(), v.data.begin());
            off += v.data.size();
        }
        if (off != flat.size()) throw std::invalid_argument("unflatten: size mismatch");
    }

    template <typename U>
    ParameterStore<U> cast() const {
        ParameterStore<U> out;
        for (const auto& [k, v] : params) out.params[k] = v.template cast<U>();
        return out;
    }
};

/// Glorot-uniform init for a weight stored [out, in].
template <typename T>
Tensor<T> glorot_uniform(int out_dim, int in_dim, Rng& rng) {
    const double a = std::sqrt(6.0 / (in_dim + out_dim));
    Tensor<T> w = Tensor<T>::zeros({out_dim, in_dim});
    for (auto& v : w.data) v = static_cast<T>(rng.uniform(-a, a));
    return w;
}

/// First/second moment accumulators plus the shared step counter.
template <typename T>
struct AdamState {
    std::map<std::string, Tensor<T>> m;
    std::map<std::string, Tensor<T>> v;
    long step = 0;
};

/// Bias-corrected Adam update applied in place; one call is one optimizer
/// step over the whole named gradient map.
template <typename T>
void adam_step(ParameterStore<T>& params, const std::map<std::string, Tensor<T>>& grads,
               AdamState<T>& state, double lr, double beta1 = 0.9, double beta2 = 0.999,
               double eps = 1e-8) {
    state.step += 1;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (auto& [name, g] : grads) {
        Tensor<T>& p = params.at(name);
        if (!p.same_shape(g))
            throw std::invalid_argument("adam_step: shape mismatch for " + name);
        auto& m = state.m.try_emplace(name, Tensor<T>::zeros(p.shape)).first->second;
        auto& v = state.v.try_emplace(name, Tensor<T>::zeros(p.shape)).first->second;
        for (long i = 0; i < p.numel(); ++i) {
            const double gi = static_cast<double>(g.data[i]);
            const double mi = beta1 * static_cast<double>(m.data[i]) + (1.0 - beta1) * gi;
            const double vi = beta2 * static_cast<double>(v.data[i]) + (1.0 - beta2) * gi * gi;
            m.data[i] = static_cast<T>(mi);
            v.data[i] = static_cast<T>(vi);
            const double mhat = mi / c1;
            const double vhat = vi / c2;
            p.data[i] = static_cast<T>(static_cast<double>(p.data[i]) -
                                       lr * mhat / (std::sqrt(vhat) + eps));
        }
    }
}

/// lr = 0.5 * lr0 * (1 + cos(pi * step / total_steps))
inline double cosine_lr(long step, long total_steps, double lr0) {
    if (total_steps <= 0) throw std::invalid_argument("cosine_lr: total_steps must be > 0");
    if (step < 0 || step > total_steps) throw std::invalid_argument("cosine_lr: step out of range");
    return 0.5 * lr0 * (1.0 + std::cos(3.14159265358979323846 * static_cast<double>(step) /
                                       static_cast<double>(total_steps)));
}

/// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
/// fn must be deterministic in the point; meant for 64-bit mode.
inline double finite_diff_check(const std::function<double(const std::vector<double>&)>& fn,
                                std::vector<double> point, const std::vector<double>& analytic,
                                double eps = 1e-6) {
    if (point.size() != analytic.size())
        throw std::invalid_argument("finite_diff_check: size mismatch");
    double worst = 0.0;
    for (size_t i = 0; i < point.size(); ++i) {
        const double keep = point[i];
        point[i] = keep + eps;
        const double fp = fn(point);
        point[i] = keep - eps;
        const double fm = fn(point);
        point[i] = keep;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw std::runtime_error("finite_diff_check: non-finite value encountered");
        const double num = (fp - fm) / (2.0 * eps);
        const double err = std::abs(num - analytic[i]) / std::max(1.0, std::abs(analytic[i]));
        worst = std::max(worst, err);
    }
    return worst;
}

} // namespace vortexlab
