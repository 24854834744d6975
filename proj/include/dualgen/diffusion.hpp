#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "dualgen/image.hpp"
#include "dualgen/rng.hpp"

namespace dualgen {

// Channels x height x width tensor of reals; carries clean images, noised
// images and noise predictions.
struct ImageTensor {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;

    ImageTensor() = default;
    ImageTensor(int c, int h, int w, double fill = 0.0)
        : channels(c), height(h), width(w),
          data(static_cast<size_t>(c) * h * w, fill) {
        if (c <= 0 || h <= 0 || w <= 0)
            throw std::invalid_argument("ImageTensor: dimensions must be positive");
    }

    size_t size() const { return data.size(); }
    size_t plane() const { return static_cast<size_t>(height) * width; }

    double& at(int c, int y, int x) { return data[(static_cast<size_t>(c) * height + y) * width + x]; }
    double at(int c, int y, int x) const { return data[(static_cast<size_t>(c) * height + y) * width + x]; }

    bool same_shape(const ImageTensor& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }

    void validate() const {
        if (data.size() != static_cast<size_t>(channels) * height * width)
            throw std::invalid_argument("ImageTensor: data length mismatch");
        for (double v : data)
            if (!std::isfinite(v))
                throw std::invalid_argument("ImageTensor: non-finite value");
    }
};

enum class SigmaKind { Beta, Posterior };

// Diffusion-time bookkeeping: beta_t, alpha_t = 1 - beta_t, the running
// product alpha_bar_t, and the reverse-step noise scale sigma_t. Arrays are
// 0-indexed; step t in [1, T] reads index t-1.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;
    std::vector<double> posterior_sigma;
    SigmaKind sigma_kind = SigmaKind::Beta;

    double beta_at(int t) const { return beta[t - 1]; }
    double alpha_at(int t) const { return alpha[t - 1]; }
    double alpha_bar_at(int t) const { return alpha_bar[t - 1]; }
    double sigma_at(int t) const { return posterior_sigma[t - 1]; }
};

// Linearly interpolated beta from beta_start to beta_end inclusive.
// sigma_t = sqrt(beta_t) by default; the posterior variant uses
// sqrt((1 - alpha_bar_{t-1}) / (1 - alpha_bar_t) * beta_t).
inline NoiseSchedule linear_schedule(int T, double beta_start, double beta_end,
                                     SigmaKind sigma_kind = SigmaKind::Beta) {
    if (T < 1) throw std::invalid_argument("linear_schedule: T must be >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw std::invalid_argument("linear_schedule: need 0 < beta_start <= beta_end < 1");
    NoiseSchedule s;
    s.T = T;
    s.sigma_kind = sigma_kind;
    s.beta.resize(T);
    s.alpha.resize(T);
    s.alpha_bar.resize(T);
    s.posterior_sigma.resize(T);
    double running = 1.0;
    for (int i = 0; i < T; ++i) {
        const double frac = (T == 1) ? 0.0 : static_cast<double>(i) / (T - 1);
        s.beta[i] = beta_start + (beta_end - beta_start) * frac;
        s.alpha[i] = 1.0 - s.beta[i];
        const double alpha_bar_prev = running;
        running *= s.alpha[i];
        s.alpha_bar[i] = running;
        if (sigma_kind == SigmaKind::Beta) {
            s.posterior_sigma[i] = std::sqrt(s.beta[i]);
        } else {
            s.posterior_sigma[i] =
                std::sqrt((1.0 - alpha_bar_prev) / (1.0 - s.alpha_bar[i]) * s.beta[i]);
        }
    }
    return s;
}

// Closed-form forward corruption:
//   x_t = sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps
inline ImageTensor forward_sample(const ImageTensor& x0, int t, const ImageTensor& eps,
                                  const NoiseSchedule& sched) {
    if (t < 1 || t > sched.T) throw std::out_of_range("forward_sample: t outside [1,T]");
    if (!x0.same_shape(eps))
        throw std::invalid_argument("forward_sample: eps shape differs from x0");
    const double ab = sched.alpha_bar_at(t);
    const double signal = std::sqrt(ab);
    const double noise = std::sqrt(1.0 - ab);
    ImageTensor out = x0;
    for (size_t i = 0; i < out.size(); ++i)
        out.data[i] = signal * x0.data[i] + noise * eps.data[i];
    return out;
}

// One reverse step:
//   x_{t-1} = (x_t - beta_t / sqrt(1 - alpha_bar_t) * eps_hat) / sqrt(alpha_t)
//             + sigma_t * z
// The caller supplies z = 0 at t = 1.
inline ImageTensor ancestral_step(const ImageTensor& x_t, int t, const ImageTensor& eps_hat,
                                  const ImageTensor& z, const NoiseSchedule& sched) {
    if (t < 1 || t > sched.T) throw std::out_of_range("ancestral_step: t outside [1,T]");
    if (!x_t.same_shape(eps_hat) || !x_t.same_shape(z))
        throw std::invalid_argument("ancestral_step: shape mismatch");
    const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alpha_at(t));
    const double eps_coef = sched.beta_at(t) / std::sqrt(1.0 - sched.alpha_bar_at(t));
    const double sigma = sched.sigma_at(t);
    ImageTensor out = x_t;
    for (size_t i = 0; i < out.size(); ++i)
        out.data[i] = inv_sqrt_alpha * (x_t.data[i] - eps_coef * eps_hat.data[i]) +
                      sigma * z.data[i];
    return out;
}

using NoisePredictor = std::function<ImageTensor(const ImageTensor&, int)>;

inline ImageTensor gaussian_tensor(int c, int h, int w, Rng& rng) {
    ImageTensor t(c, h, w);
    for (double& v : t.data) v = rng.normal();
    return t;
}

// Ancestral sampling chain: start from seeded N(0, I), denoise t = T..1,
// clamp into [0,1] only after the final step.
inline ImageTensor generate(const NoisePredictor& denoiser, const NoiseSchedule& sched,
                            int channels, int height, int width, uint64_t seed) {
    Rng rng(seed);
    ImageTensor x = gaussian_tensor(channels, height, width, rng);
    ImageTensor zero(channels, height, width, 0.0);
    for (int t = sched.T; t >= 1; --t) {
        ImageTensor eps_hat = denoiser(x, t);
        if (!eps_hat.same_shape(x))
            throw std::runtime_error("generate: denoiser returned wrong shape");
        if (t > 1) {
            ImageTensor z = gaussian_tensor(channels, height, width, rng);
            x = ancestral_step(x, t, eps_hat, z, sched);
        } else {
            x = ancestral_step(x, t, eps_hat, zero, sched);
        }
    }
    for (double& v : x.data) v = clamp01(v);
    return x;
}

inline ImageTensor tensor_from_rgb(const RgbImage& img) {
    ImageTensor t(3, img.height(), img.width());
    std::copy(img.r.data.begin(), img.r.data.end(), t.data.begin());
    std::copy(img.g.data.begin(), img.g.data.end(), t.data.begin() + t.plane());
    std::copy(img.b.data.begin(), img.b.data.end(), t.data.begin() + 2 * t.plane());
    return t;
}

// Values are clamped into [0,1]; callers hand over tensors that already
// went through the final-step clamp.
inline RgbImage rgb_from_tensor(const ImageTensor& t) {
    if (t.channels != 3)
        throw std::invalid_argument("rgb_from_tensor: need 3 channels");
    RgbImage img(t.width, t.height);
    for (size_t i = 0; i < t.plane(); ++i) {
        img.r.data[i] = clamp01(t.data[i]);
        img.g.data[i] = clamp01(t.data[i + t.plane()]);
        img.b.data[i] = clamp01(t.data[i + 2 * t.plane()]);
    }
    return img;
}

} // namespace dualgen
