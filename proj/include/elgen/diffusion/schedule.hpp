#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "elgen/core/tensor.hpp"

namespace elgen::diffusion {

enum class ScheduleKind { Linear, Cosine };

// Per-timestep diffusion coefficients. alpha_bar[t] is the cumulative
// product of (1 - beta[s]) for s <= t and decreases strictly when beta > 0.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> beta;
    std::vector<double> alpha_bar;

    double sqrt_ab(int t) const;
    double sqrt_1mab(int t) const;
    void validate() const;
};

NoiseSchedule make_schedule(int T, ScheduleKind kind, double beta_start = 1e-4,
                            double beta_end = 2e-2);

ScheduleKind schedule_kind_from_string(const std::string& s);

// z_t = sqrt(alpha_bar_t) * z0 + sqrt(1 - alpha_bar_t) * eps.
template <class T>
Tensor<T> q_sample(const Tensor<T>& z0, int t, const Tensor<T>& eps,
                   const NoiseSchedule& schedule) {
    if (!z0.same_shape(eps)) throw ParameterError("q_sample: z0/eps shape mismatch");
    if (t < 0 || t >= schedule.T) throw ParameterError("q_sample: t out of range");
    const T a = static_cast<T>(schedule.sqrt_ab(t));
    const T b = static_cast<T>(schedule.sqrt_1mab(t));
    Tensor<T> out(z0.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a * z0[i] + b * eps[i];
    return out;
}

// eps = eps_uncond + scale * (eps_cond - eps_uncond).
template <class T>
Tensor<T> cfg_combine(const Tensor<T>& eps_uncond, const Tensor<T>& eps_cond, double scale) {
    if (!eps_uncond.same_shape(eps_cond))
        throw ParameterError("cfg_combine: shape mismatch");
    Tensor<T> out(eps_uncond.shape);
    const T s = static_cast<T>(scale);
    for (int64_t i = 0; i < out.numel(); ++i)
        out[i] = eps_uncond[i] + s * (eps_cond[i] - eps_uncond[i]);
    return out;
}

// One DDIM update from timestep t to t_prev (t > t_prev >= 0). eta = 0 is
// the deterministic map; noise is required only when eta > 0.
template <class T>
Tensor<T> ddim_step(const Tensor<T>& z_t, const Tensor<T>& eps_hat, int t, int t_prev,
                    const NoiseSchedule& schedule, double eta, const Tensor<T>* noise = nullptr) {
    if (!(t > t_prev && t_prev >= 0)) throw ParameterError("ddim_step: need t > t_prev >= 0");
    if (t >= schedule.T) throw ParameterError("ddim_step: t out of range");
    if (eta < 0.0 || eta > 1.0) throw ParameterError("ddim_step: eta outside [0,1]");
    if (!z_t.same_shape(eps_hat)) throw ParameterError("ddim_step: shape mismatch");

    const double ab_t = schedule.alpha_bar[static_cast<size_t>(t)];
    const double ab_p = schedule.alpha_bar[static_cast<size_t>(t_prev)];
    const double sqrt_ab_t = std::sqrt(ab_t);
    const double sqrt_1m_t = std::sqrt(1.0 - ab_t);
    double sigma = 0.0;
    if (eta > 0.0 && ab_t < ab_p) {
        sigma = eta * std::sqrt((1.0 - ab_p) / (1.0 - ab_t)) * std::sqrt(1.0 - ab_t / ab_p);
    }
    const double dir = std::sqrt(std::max(0.0, 1.0 - ab_p - sigma * sigma));
    const double sqrt_ab_p = std::sqrt(ab_p);

    Tensor<T> out(z_t.shape);
    for (int64_t i = 0; i < out.numel(); ++i) {
        const double x0 = (z_t[i] - sqrt_1m_t * eps_hat[i]) / sqrt_ab_t;
        double v = sqrt_ab_p * x0 + dir * eps_hat[i];
        if (sigma > 0.0 && noise) v += sigma * (*noise)[i];
        out[i] = static_cast<T>(v);
    }
    return out;
}

}  // namespace elgen::diffusion
