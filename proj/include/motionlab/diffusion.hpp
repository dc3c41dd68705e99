#pragma once

// Denoising-diffusion machinery: linear beta schedule, forward noising,
// epsilon-prediction loss and the DDIM sampler family. Everything here
// is model-agnostic; the network enters only through an eps callback.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "motionlab/errors.hpp"
#include "motionlab/rng.hpp"
#include "motionlab/tensor.hpp"

namespace motionlab {

struct NoiseSchedule {
    int steps = 0;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    std::vector<double> beta;       // [T], strictly inside (0, 1)
    std::vector<double> alpha;      // 1 - beta
    std::vector<double> alpha_bar;  // running product, strictly decreasing
    std::vector<double> sigma;      // posterior std; sigma[0] = sqrt(beta[0])

    void check(int t) const {
        require(t >= 0 && t < steps, ErrCat::contract,
                "timestep " + std::to_string(t) + " outside [0, " + std::to_string(steps) + ")");
    }
};

inline NoiseSchedule make_schedule(int steps, double beta_start = 1e-4,
                                          double beta_end = 0.02) {
    require(steps >= 1, ErrCat::config, "schedule needs at least one step");
    require(beta_start > 0 && beta_end < 1 && beta_start <= beta_end, ErrCat::config,
            "betas must satisfy 0 < start <= end < 1");
    NoiseSchedule s;
    s.steps = steps;
    s.beta_start = beta_start;
    s.beta_end = beta_end;
    s.beta.resize(size_t(steps));
    s.alpha.resize(size_t(steps));
    s.alpha_bar.resize(size_t(steps));
    s.sigma.resize(size_t(steps));
    double prod = 1.0;
    for (int t = 0; t < steps; ++t) {
        const double f = steps == 1 ? 0.0 : double(t) / double(steps - 1);
        s.beta[size_t(t)] = beta_start + (beta_end - beta_start) * f;
        s.alpha[size_t(t)] = 1.0 - s.beta[size_t(t)];
        prod *= s.alpha[size_t(t)];
        s.alpha_bar[size_t(t)] = prod;
        if (t == 0) {
            s.sigma[size_t(t)] = std::sqrt(s.beta[0]);
        } else {
            const double prev = s.alpha_bar[size_t(t - 1)];
            s.sigma[size_t(t)] =
                std::sqrt((1.0 - prev) / (1.0 - s.alpha_bar[size_t(t)]) * s.beta[size_t(t)]);
        }
    }
    return s;
}

// z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps. Differentiable through
// both tensor arguments.
template <class S>
Tensor<S> q_sample(const Tensor<S>& z0, int t, const Tensor<S>& eps, const NoiseSchedule& sched) {
    sched.check(t);
    require(z0.shape() == eps.shape(), ErrCat::shape,
            "q_sample noise shape " + shape_str(eps.shape()) + " differs from signal " +
                shape_str(z0.shape()));
    const double ab = sched.alpha_bar[size_t(t)];
    return add(scale(z0, S(std::sqrt(ab))), scale(eps, S(std::sqrt(1.0 - ab))));
}

// Closed-form estimate of the clean signal from z_t and a noise
// prediction; exact when eps_pred is the noise used to build z_t.
template <class S>
Tensor<S> predicted_x0(const Tensor<S>& z_t, int t, const Tensor<S>& eps_pred,
                       const NoiseSchedule& sched) {
    sched.check(t);
    require(z_t.shape() == eps_pred.shape(), ErrCat::shape, "predicted_x0 shape mismatch");
    const double ab = sched.alpha_bar[size_t(t)];
    return scale(sub(z_t, scale(eps_pred, S(std::sqrt(1.0 - ab)))), S(1.0 / std::sqrt(ab)));
}

// Noise scale of the x0 estimate at step t: an eps error of size e
// perturbs predicted_x0 by sqrt((1-abar)/abar) * e. Strictly positive
// for every valid t because abar stays inside (0, 1).
inline double x0_noise_scale(const NoiseSchedule& sched, int t) {
    sched.check(t);
    const double ab = sched.alpha_bar[size_t(t)];
    return std::sqrt((1.0 - ab) / ab);
}

// One DDIM update from t to t_prev (t_prev == -1 targets abar = 1,
// i.e. the clean signal). eta in [0, 1] interpolates deterministic DDIM
// and ancestral-equivalent stochastic sampling; `noise` is required
// only when the stochastic term is active.
template <class S>
Tensor<S> ddim_step(const Tensor<S>& z_t, const Tensor<S>& eps_pred, int t, int t_prev,
                    double eta, const NoiseSchedule& sched, const Tensor<S>* noise = nullptr) {
    sched.check(t);
    require(t_prev < t && t_prev >= -1, ErrCat::contract, "ddim_step must move backward in time");
    require(eta >= 0.0 && eta <= 1.0, ErrCat::config, "eta must lie in [0, 1]");
    require(z_t.shape() == eps_pred.shape(), ErrCat::shape, "ddim_step shape mismatch");
    const double ab_t = sched.alpha_bar[size_t(t)];
    const double ab_prev = t_prev < 0 ? 1.0 : sched.alpha_bar[size_t(t_prev)];
    const double sigma =
        eta * std::sqrt((1.0 - ab_prev) / (1.0 - ab_t)) * std::sqrt(1.0 - ab_t / ab_prev);
    const double dir = std::sqrt(std::max(1.0 - ab_prev - sigma * sigma, 0.0));
    Tensor<S> x0 = predicted_x0(z_t, t, eps_pred, sched);
    Tensor<S> out = add(scale(x0, S(std::sqrt(ab_prev))), scale(eps_pred, S(dir)));
    if (sigma > 0.0) {
        require(noise != nullptr, ErrCat::contract, "stochastic ddim_step needs a noise tensor");
        require(noise->shape() == z_t.shape(), ErrCat::shape, "ddim_step noise shape mismatch");
        out = add(out, scale(*noise, S(sigma)));
    }
    return out;
}

// Descending timestep ladder with `steps` evenly spaced entries ending
// near 0; the sampler finishes with a final hop to abar = 1.
inline std::vector<int> ddim_timesteps(int total, int steps) {
    require(steps >= 1 && steps <= total, ErrCat::config,
            "sampler steps must lie in [1, " + std::to_string(total) + "]");
    std::vector<int> ts(static_cast<size_t>(steps));
    for (int i = 0; i < steps; ++i)
        ts[size_t(steps - 1 - i)] = int(int64_t(i + 1) * total / steps) - 1;
    return ts;
}

// Runs the full reverse process from seeded Gaussian noise. eps_fn is
// called as eps_fn(z, t) and must return a finite tensor of the same
// shape; a non-finite prediction aborts with the failing step index.
template <class S, class EpsFn>
Tensor<S> ddim_generate(const NoiseSchedule& sched, const Shape& shape, int steps, double eta,
                        uint64_t seed, EpsFn&& eps_fn) {
    require(eta >= 0.0 && eta <= 1.0, ErrCat::config, "eta must lie in [0, 1]");
    Rng rng(seed);
    Tensor<S> z = randn<S>(shape, rng);
    const std::vector<int> ladder = ddim_timesteps(sched.steps, steps);
    for (size_t i = 0; i < ladder.size(); ++i) {
        const int t = ladder[i];
        const int t_prev = i + 1 < ladder.size() ? ladder[i + 1] : -1;
        Tensor<S> eps = eps_fn(z, t);
        require(eps.shape() == shape, ErrCat::contract, "eps prediction shape mismatch");
        require(eps.finite(), ErrCat::sampling,
                "non-finite eps prediction at sampler step " + std::to_string(i) + " (t=" +
                    std::to_string(t) + ")");
        const double ab_t = sched.alpha_bar[size_t(t)];
        const double ab_prev = t_prev < 0 ? 1.0 : sched.alpha_bar[size_t(t_prev)];
        const double sigma =
            eta * std::sqrt((1.0 - ab_prev) / (1.0 - ab_t)) * std::sqrt(1.0 - ab_t / ab_prev);
        if (sigma > 0.0) {
            Tensor<S> noise = randn<S>(shape, rng);
            z = ddim_step(z, eps, t, t_prev, eta, sched, &noise);
        } else {
            z = ddim_step(z, eps, t, t_prev, eta, sched);
        }
        require(z.finite(), ErrCat::sampling,
                "non-finite latent after sampler step " + std::to_string(i));
    }
    return z;
}

}  // namespace motionlab
