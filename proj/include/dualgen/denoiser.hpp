#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dualgen/diffusion.hpp"
#include "dualgen/encoding.hpp"
#include "dualgen/parallel.hpp"
#include "dualgen/rng.hpp"

namespace dualgen {

// Miniature U-Net shaped noise predictor:
//
//   x (3,H,W) -> conv1 -> +tbias(t) -> silu -> h1 (C,H,W)
//   h1 -> avgpool 2x2 -> conv2 -> +tbias(t) -> silu -> h2 (C,H/2,W/2)
//   h2 -> conv3 -> +tbias(t) -> silu -> h3 (C,H/2,W/2)
//   h3 -> nearest-upsample 2x -> (+ h1 skip) -> conv4 -> out (3,H,W)
//
// All convolutions are 3x3, stride 1, zero padded. The activation is
// exact SiLU: f(x) = x / (1 + exp(-x)). Time conditioning is a per-channel
// additive bias derived from a fixed sinusoidal embedding of the step
// index through a learned linear map; conv1..3 carry no bias of their own.
// Weights are stored as 32-bit floats (the checkpoint unit) while all
// arithmetic runs in double.

struct ArchSpec {
    int in_channels = 3;
    int hidden_channels = 32;
    int time_embed_dim = 32;

    bool operator==(const ArchSpec&) const = default;
};

enum ParamArrayId {
    A_W1 = 0, // conv1 weights   [C][3][3][3]
    A_TW1,    // time proj 1     [C][E]
    A_TB1,    // time proj 1 b   [C]
    A_W2,     // conv2 weights   [C][C][3][3]
    A_TW2,
    A_TB2,
    A_W3, // conv3 weights   [C][C][3][3]
    A_TW3,
    A_TB3,
    A_W4, // conv4 weights   [3][C][3][3]
    A_B4, // conv4 bias      [3]
    kNumParamArrays
};

inline const char* param_array_name(int id) {
    static const char* names[kNumParamArrays] = {
        "conv1.w", "temb1.w", "temb1.b", "conv2.w", "temb2.w", "temb2.b",
        "conv3.w", "temb3.w", "temb3.b", "conv4.w", "conv4.b"};
    return names[id];
}

inline std::array<size_t, kNumParamArrays> param_array_sizes(const ArchSpec& a) {
    const size_t C = a.hidden_channels, E = a.time_embed_dim, I = a.in_channels;
    return {C * I * 9, C * E, C, C * C * 9, C * E, C,
            C * C * 9, C * E, C, I * C * 9, I};
}

struct DenoiserParams {
    ArchSpec arch;
    std::array<std::vector<float>, kNumParamArrays> arrays;

    static DenoiserParams zeros(const ArchSpec& arch = {}) {
        DenoiserParams p;
        p.arch = arch;
        const auto sizes = param_array_sizes(arch);
        for (int i = 0; i < kNumParamArrays; ++i) p.arrays[i].assign(sizes[i], 0.0f);
        return p;
    }

    // Training start: He-normal hidden convs, small time projections,
    // zero-initialized output conv so the predictor starts at zero.
    static DenoiserParams training_init(const ArchSpec& arch, uint64_t seed) {
        DenoiserParams p = zeros(arch);
        Rng rng(Rng::derive_seed(seed, 0, 0));
        const double c_in_std = std::sqrt(2.0 / (arch.in_channels * 9.0));
        const double c_hid_std = std::sqrt(2.0 / (arch.hidden_channels * 9.0));
        for (auto& v : p.arrays[A_W1]) v = static_cast<float>(rng.normal() * c_in_std);
        for (auto& v : p.arrays[A_W2]) v = static_cast<float>(rng.normal() * c_hid_std);
        for (auto& v : p.arrays[A_W3]) v = static_cast<float>(rng.normal() * c_hid_std);
        for (int s : {A_TW1, A_TW2, A_TW3})
            for (auto& v : p.arrays[s]) v = static_cast<float>(rng.normal() * 0.01);
        return p;
    }

    // Every array non-zero; used by gradient checks so no path is dead.
    static DenoiserParams random_init(const ArchSpec& arch, uint64_t seed) {
        DenoiserParams p = training_init(arch, seed);
        Rng rng(Rng::derive_seed(seed, 0, 1));
        const double c_hid_std = std::sqrt(2.0 / (arch.hidden_channels * 9.0));
        for (auto& v : p.arrays[A_W4]) v = static_cast<float>(rng.normal() * c_hid_std);
        for (auto& v : p.arrays[A_B4]) v = static_cast<float>(rng.normal() * 0.01);
        for (int s : {A_TB1, A_TB2, A_TB3})
            for (auto& v : p.arrays[s]) v = static_cast<float>(rng.normal() * 0.01);
        return p;
    }

    size_t total_parameters() const {
        size_t n = 0;
        for (const auto& a : arrays) n += a.size();
        return n;
    }

    void validate() const {
        const auto sizes = param_array_sizes(arch);
        for (int i = 0; i < kNumParamArrays; ++i) {
            if (arrays[i].size() != sizes[i])
                throw std::invalid_argument(std::string("DenoiserParams: bad shape for ") +
                                            param_array_name(i));
            for (float v : arrays[i])
                if (!std::isfinite(v))
                    throw std::invalid_argument("DenoiserParams: non-finite weight");
        }
    }
};

using DenoiserGrads = std::array<std::vector<double>, kNumParamArrays>;

inline DenoiserGrads make_grads(const ArchSpec& arch) {
    DenoiserGrads g;
    const auto sizes = param_array_sizes(arch);
    for (int i = 0; i < kNumParamArrays; ++i) g[i].assign(sizes[i], 0.0);
    return g;
}

inline void zero_grads(DenoiserGrads& g) {
    for (auto& a : g) std::fill(a.begin(), a.end(), 0.0);
}

// Sinusoidal step embedding: pairs (sin(t*f_i), cos(t*f_i)) with
// f_i = 10000^(-i/(E/2)), i = 0..E/2-1.
inline std::vector<double> time_embedding(int t, int dim) {
    std::vector<double> emb(dim);
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / half);
        emb[2 * i] = std::sin(t * freq);
        emb[2 * i + 1] = std::cos(t * freq);
    }
    return emb;
}

namespace nn {

inline double silu(double x) { return x / (1.0 + std::exp(-x)); }

inline double silu_grad(double x) {
    const double s = 1.0 / (1.0 + std::exp(-x));
    return s * (1.0 + x * (1.0 - s));
}

// 3x3 stride-1 zero-padded convolution; the output must be pre-filled
// with the per-channel bias.
inline void conv3x3_forward(const double* in, int in_ch, int H, int W, const float* w,
                            int out_ch, double* out) {
    const size_t plane = static_cast<size_t>(H) * W;
    for (int oc = 0; oc < out_ch; ++oc) {
        double* op = out + oc * plane;
        for (int ic = 0; ic < in_ch; ++ic) {
            const double* ip = in + ic * plane;
            const float* k = w + (static_cast<size_t>(oc) * in_ch + ic) * 9;
            const double k00 = k[0], k01 = k[1], k02 = k[2];
            const double k10 = k[3], k11 = k[4], k12 = k[5];
            const double k20 = k[6], k21 = k[7], k22 = k[8];
            for (int y = 0; y < H; ++y) {
                const double* r0 = (y > 0) ? ip + (y - 1) * W : nullptr;
                const double* r1 = ip + static_cast<size_t>(y) * W;
                const double* r2 = (y < H - 1) ? ip + (y + 1) * W : nullptr;
                double* orow = op + static_cast<size_t>(y) * W;
                // x = 0 column
                {
                    double acc = k11 * r1[0];
                    if (W > 1) acc += k12 * r1[1];
                    if (r0) {
                        acc += k01 * r0[0];
                        if (W > 1) acc += k02 * r0[1];
                    }
                    if (r2) {
                        acc += k21 * r2[0];
                        if (W > 1) acc += k22 * r2[1];
                    }
                    orow[0] += acc;
                }
                if (r0 && r2) {
                    for (int x = 1; x < W - 1; ++x) {
                        orow[x] += k00 * r0[x - 1] + k01 * r0[x] + k02 * r0[x + 1] +
                                   k10 * r1[x - 1] + k11 * r1[x] + k12 * r1[x + 1] +
                                   k20 * r2[x - 1] + k21 * r2[x] + k22 * r2[x + 1];
                    }
                } else if (r0) {
                    for (int x = 1; x < W - 1; ++x) {
                        orow[x] += k00 * r0[x - 1] + k01 * r0[x] + k02 * r0[x + 1] +
                                   k10 * r1[x - 1] + k11 * r1[x] + k12 * r1[x + 1];
                    }
                } else if (r2) {
                    for (int x = 1; x < W - 1; ++x) {
                        orow[x] += k10 * r1[x - 1] + k11 * r1[x] + k12 * r1[x + 1] +
                                   k20 * r2[x - 1] + k21 * r2[x] + k22 * r2[x + 1];
                    }
                } else {
                    for (int x = 1; x < W - 1; ++x)
                        orow[x] += k10 * r1[x - 1] + k11 * r1[x] + k12 * r1[x + 1];
                }
                // x = W-1 column
                if (W > 1) {
                    const int x = W - 1;
                    double acc = k10 * r1[x - 1] + k11 * r1[x];
                    if (r0) acc += k00 * r0[x - 1] + k01 * r0[x];
                    if (r2) acc += k20 * r2[x - 1] + k21 * r2[x];
                    orow[x] += acc;
                }
            }
        }
    }
}

// Gradient w.r.t. the convolution input: correlate the output gradient
// with the 180-degree rotated kernels, channels transposed.
inline void conv3x3_backward_input(const double* g_out, int out_ch, int H, int W,
                                   const float* w, int in_ch, double* g_in) {
    const size_t plane = static_cast<size_t>(H) * W;
    std::vector<float> wt(static_cast<size_t>(in_ch) * out_ch * 9);
    for (int oc = 0; oc < out_ch; ++oc)
        for (int ic = 0; ic < in_ch; ++ic) {
            const float* src = w + (static_cast<size_t>(oc) * in_ch + ic) * 9;
            float* dst = wt.data() + (static_cast<size_t>(ic) * out_ch + oc) * 9;
            for (int j = 0; j < 9; ++j) dst[j] = src[8 - j];
        }
    std::fill(g_in, g_in + static_cast<size_t>(in_ch) * plane, 0.0);
    conv3x3_forward(g_out, out_ch, H, W, wt.data(), in_ch, g_in);
}

inline void conv3x3_backward_weights(const double* g_out, int out_ch, const double* in,
                                     int in_ch, int H, int W, double* g_w) {
    const size_t plane = static_cast<size_t>(H) * W;
    for (int oc = 0; oc < out_ch; ++oc) {
        const double* gp = g_out + oc * plane;
        for (int ic = 0; ic < in_ch; ++ic) {
            const double* ip = in + ic * plane;
            double* gw = g_w + (static_cast<size_t>(oc) * in_ch + ic) * 9;
            for (int ky = -1; ky <= 1; ++ky) {
                const int y0 = std::max(0, -ky);
                const int y1 = std::min(H, H - ky);
                for (int kx = -1; kx <= 1; ++kx) {
                    const int x0 = std::max(0, -kx);
                    const int x1 = std::min(W, W - kx);
                    double acc = 0.0;
                    for (int y = y0; y < y1; ++y) {
                        const double* grow = gp + static_cast<size_t>(y) * W;
                        const double* irow = ip + static_cast<size_t>(y + ky) * W + kx;
                        for (int x = x0; x < x1; ++x) acc += grow[x] * irow[x];
                    }
                    gw[(ky + 1) * 3 + (kx + 1)] += acc;
                }
            }
        }
    }
}

inline void avgpool2_forward(const double* in, int ch, int H, int W, double* out) {
    const int h2 = H / 2, w2 = W / 2;
    for (int c = 0; c < ch; ++c) {
        const double* ip = in + static_cast<size_t>(c) * H * W;
        double* op = out + static_cast<size_t>(c) * h2 * w2;
        for (int y = 0; y < h2; ++y)
            for (int x = 0; x < w2; ++x) {
                const double* p = ip + static_cast<size_t>(2 * y) * W + 2 * x;
                op[static_cast<size_t>(y) * w2 + x] =
                    0.25 * (p[0] + p[1] + p[W] + p[W + 1]);
            }
    }
}

inline void avgpool2_backward(const double* g_out, int ch, int H, int W, double* g_in) {
    const int h2 = H / 2, w2 = W / 2;
    for (int c = 0; c < ch; ++c) {
        const double* gp = g_out + static_cast<size_t>(c) * h2 * w2;
        double* gi = g_in + static_cast<size_t>(c) * H * W;
        for (int y = 0; y < h2; ++y)
            for (int x = 0; x < w2; ++x) {
                const double g = 0.25 * gp[static_cast<size_t>(y) * w2 + x];
                double* p = gi + static_cast<size_t>(2 * y) * W + 2 * x;
                p[0] += g;
                p[1] += g;
                p[W] += g;
                p[W + 1] += g;
            }
    }
}

inline void upsample2_forward(const double* in, int ch, int h2, int w2, double* out) {
    const int H = h2 * 2, W = w2 * 2;
    for (int c = 0; c < ch; ++c) {
        const double* ip = in + static_cast<size_t>(c) * h2 * w2;
        double* op = out + static_cast<size_t>(c) * H * W;
        for (int y = 0; y < H; ++y) {
            const double* irow = ip + static_cast<size_t>(y / 2) * w2;
            double* orow = op + static_cast<size_t>(y) * W;
            for (int x = 0; x < W; ++x) orow[x] = irow[x / 2];
        }
    }
}

inline void upsample2_backward(const double* g_out, int ch, int h2, int w2, double* g_in) {
    const int W = w2 * 2;
    for (int c = 0; c < ch; ++c) {
        double* gi = g_in + static_cast<size_t>(c) * h2 * w2;
        const double* gp = g_out + static_cast<size_t>(c) * (h2 * 2) * W;
        for (int y = 0; y < h2; ++y)
            for (int x = 0; x < w2; ++x) {
                const double* p = gp + static_cast<size_t>(2 * y) * W + 2 * x;
                gi[static_cast<size_t>(y) * w2 + x] = p[0] + p[1] + p[W] + p[W + 1];
            }
    }
}

} // namespace nn

// Intermediate activations kept for backpropagation. Reusable across calls
// of the same spatial size.
struct DenoiserWorkspace {
    ImageTensor z1, h1, p, z2, h2, z3, h3, u, s, out;
    std::vector<double> emb;
    int t = 0;

    void resize(const ArchSpec& arch, int H, int W) {
        const int C = arch.hidden_channels;
        auto need = [](ImageTensor& t, int c, int h, int w) {
            if (t.channels != c || t.height != h || t.width != w) t = ImageTensor(c, h, w);
        };
        need(z1, C, H, W);
        need(h1, C, H, W);
        need(p, C, H / 2, W / 2);
        need(z2, C, H / 2, W / 2);
        need(h2, C, H / 2, W / 2);
        need(z3, C, H / 2, W / 2);
        need(h3, C, H / 2, W / 2);
        need(u, C, H, W);
        need(s, C, H, W);
        need(out, arch.in_channels, H, W);
    }
};

namespace detail {

inline void add_time_bias(ImageTensor& z, const std::vector<float>& tw,
                          const std::vector<float>& tb, const std::vector<double>& emb) {
    const int C = z.channels;
    const int E = static_cast<int>(emb.size());
    for (int c = 0; c < C; ++c) {
        double bias = tb[c];
        const float* row = tw.data() + static_cast<size_t>(c) * E;
        for (int e = 0; e < E; ++e) bias += row[e] * emb[e];
        double* plane = z.data.data() + static_cast<size_t>(c) * z.plane();
        for (size_t i = 0; i < z.plane(); ++i) plane[i] += bias;
    }
}

inline void silu_inplace(const ImageTensor& z, ImageTensor& h) {
    for (size_t i = 0; i < z.size(); ++i) h.data[i] = nn::silu(z.data[i]);
}

} // namespace detail

// Full forward pass with cached activations; returns ws.out.
inline const ImageTensor& denoiser_forward(const DenoiserParams& params,
                                           const ImageTensor& x, int t,
                                           DenoiserWorkspace& ws) {
    if (x.channels != params.arch.in_channels)
        throw std::invalid_argument("denoiser_forward: wrong channel count");
    if (x.height % 2 != 0 || x.width % 2 != 0)
        throw std::invalid_argument("denoiser_forward: dimensions must be even");
    const ArchSpec& a = params.arch;
    const int C = a.hidden_channels, H = x.height, W = x.width;
    ws.resize(a, H, W);
    ws.t = t;
    ws.emb = time_embedding(t, a.time_embed_dim);

    std::fill(ws.z1.data.begin(), ws.z1.data.end(), 0.0);
    nn::conv3x3_forward(x.data.data(), a.in_channels, H, W, params.arrays[A_W1].data(), C,
                        ws.z1.data.data());
    detail::add_time_bias(ws.z1, params.arrays[A_TW1], params.arrays[A_TB1], ws.emb);
    detail::silu_inplace(ws.z1, ws.h1);

    nn::avgpool2_forward(ws.h1.data.data(), C, H, W, ws.p.data.data());

    std::fill(ws.z2.data.begin(), ws.z2.data.end(), 0.0);
    nn::conv3x3_forward(ws.p.data.data(), C, H / 2, W / 2, params.arrays[A_W2].data(), C,
                        ws.z2.data.data());
    detail::add_time_bias(ws.z2, params.arrays[A_TW2], params.arrays[A_TB2], ws.emb);
    detail::silu_inplace(ws.z2, ws.h2);

    std::fill(ws.z3.data.begin(), ws.z3.data.end(), 0.0);
    nn::conv3x3_forward(ws.h2.data.data(), C, H / 2, W / 2, params.arrays[A_W3].data(), C,
                        ws.z3.data.data());
    detail::add_time_bias(ws.z3, params.arrays[A_TW3], params.arrays[A_TB3], ws.emb);
    detail::silu_inplace(ws.z3, ws.h3);

    nn::upsample2_forward(ws.h3.data.data(), C, H / 2, W / 2, ws.u.data.data());
    for (size_t i = 0; i < ws.s.size(); ++i) ws.s.data[i] = ws.u.data[i] + ws.h1.data[i];

    for (int oc = 0; oc < a.in_channels; ++oc)
        std::fill_n(ws.out.data.begin() + static_cast<size_t>(oc) * ws.out.plane(),
                    ws.out.plane(), static_cast<double>(params.arrays[A_B4][oc]));
    nn::conv3x3_forward(ws.s.data.data(), C, H, W, params.arrays[A_W4].data(),
                        a.in_channels, ws.out.data.data());
    return ws.out;
}

// Backpropagates d(loss)/d(out) through the cached forward pass,
// accumulating parameter gradients. The input gradient is not needed by
// any caller and is not produced.
inline void denoiser_backward(const DenoiserParams& params, const ImageTensor& x,
                              const DenoiserWorkspace& ws, const ImageTensor& g_out,
                              DenoiserGrads& grads) {
    const ArchSpec& a = params.arch;
    const int C = a.hidden_channels, H = x.height, W = x.width;
    const int h2 = H / 2, w2 = W / 2;
    const int E = a.time_embed_dim;

    auto time_bias_grads = [&](const ImageTensor& g_z, int tw_id, int tb_id) {
        for (int c = 0; c < C; ++c) {
            const double* plane = g_z.data.data() + static_cast<size_t>(c) * g_z.plane();
            double sum = 0.0;
            for (size_t i = 0; i < g_z.plane(); ++i) sum += plane[i];
            grads[tb_id][c] += sum;
            double* gw = grads[tw_id].data() + static_cast<size_t>(c) * E;
            for (int e = 0; e < E; ++e) gw[e] += sum * ws.emb[e];
        }
    };

    // conv4
    ImageTensor g_s(C, H, W);
    nn::conv3x3_backward_input(g_out.data.data(), a.in_channels, H, W,
                               params.arrays[A_W4].data(), C, g_s.data.data());
    nn::conv3x3_backward_weights(g_out.data.data(), a.in_channels, ws.s.data.data(), C, H,
                                 W, grads[A_W4].data());
    for (int oc = 0; oc < a.in_channels; ++oc) {
        const double* plane = g_out.data.data() + static_cast<size_t>(oc) * g_out.plane();
        double sum = 0.0;
        for (size_t i = 0; i < g_out.plane(); ++i) sum += plane[i];
        grads[A_B4][oc] += sum;
    }

    // skip: s = u + h1
    ImageTensor g_h3(C, h2, w2);
    nn::upsample2_backward(g_s.data.data(), C, h2, w2, g_h3.data.data());

    // conv3
    ImageTensor g_z3 = g_h3;
    for (size_t i = 0; i < g_z3.size(); ++i) g_z3.data[i] *= nn::silu_grad(ws.z3.data[i]);
    time_bias_grads(g_z3, A_TW3, A_TB3);
    nn::conv3x3_backward_weights(g_z3.data.data(), C, ws.h2.data.data(), C, h2, w2,
                                 grads[A_W3].data());
    ImageTensor g_h2(C, h2, w2);
    nn::conv3x3_backward_input(g_z3.data.data(), C, h2, w2, params.arrays[A_W3].data(), C,
                               g_h2.data.data());

    // conv2
    ImageTensor g_z2 = g_h2;
    for (size_t i = 0; i < g_z2.size(); ++i) g_z2.data[i] *= nn::silu_grad(ws.z2.data[i]);
    time_bias_grads(g_z2, A_TW2, A_TB2);
    nn::conv3x3_backward_weights(g_z2.data.data(), C, ws.p.data.data(), C, h2, w2,
                                 grads[A_W2].data());
    ImageTensor g_p(C, h2, w2);
    nn::conv3x3_backward_input(g_z2.data.data(), C, h2, w2, params.arrays[A_W2].data(), C,
                               g_p.data.data());

    // pool + skip join: g_h1 = g_s + unpool(g_p)
    ImageTensor g_h1 = g_s;
    nn::avgpool2_backward(g_p.data.data(), C, H, W, g_h1.data.data());

    // conv1
    ImageTensor g_z1 = g_h1;
    for (size_t i = 0; i < g_z1.size(); ++i) g_z1.data[i] *= nn::silu_grad(ws.z1.data[i]);
    time_bias_grads(g_z1, A_TW1, A_TB1);
    nn::conv3x3_backward_weights(g_z1.data.data(), C, x.data.data(), a.in_channels, H, W,
                                 grads[A_W1].data());
}

inline ImageTensor predict_noise(const DenoiserParams& params, const ImageTensor& x_t,
                                 int t) {
    DenoiserWorkspace ws;
    return denoiser_forward(params, x_t, t, ws);
}

// --- training -------------------------------------------------------------

struct TrainConfig {
    double learning_rate = 1e-5;
    int batch_size = 16;
    int epochs = 100;
    int image_size = 256;
    uint64_t seed = 0;
    int timesteps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    SigmaKind sigma_kind = SigmaKind::Beta;
    ThirdChannelMode third_channel_mode = ThirdChannelMode::AbsDiff;

    void validate() const {
        // Zero is allowed as an explicit no-update diagnostic mode.
        if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning rate must be >= 0");
        if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
        if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
        if (image_size < 4 || image_size % 4 != 0)
            throw std::invalid_argument("image size must be a positive multiple of 4");
        if (timesteps < 1) throw std::invalid_argument("timesteps must be >= 1");
    }

    NoiseSchedule schedule() const {
        return linear_schedule(timesteps, beta_start, beta_end, sigma_kind);
    }
};

struct AdamState {
    std::array<std::vector<float>, kNumParamArrays> m;
    std::array<std::vector<float>, kNumParamArrays> v;
    int64_t step = 0;

    static AdamState zeros(const ArchSpec& arch) {
        AdamState s;
        const auto sizes = param_array_sizes(arch);
        for (int i = 0; i < kNumParamArrays; ++i) {
            s.m[i].assign(sizes[i], 0.0f);
            s.v[i].assign(sizes[i], 0.0f);
        }
        return s;
    }
};

// Standard Adam with beta1 = 0.9, beta2 = 0.999, eps = 1e-8 and bias
// correction. Moments are held in float32 so checkpoints round-trip the
// optimizer exactly; the update itself runs in double.
inline void adam_step(DenoiserParams& params, const DenoiserGrads& grads, AdamState& state,
                      double lr) {
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    state.step += 1;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
    for (int i = 0; i < kNumParamArrays; ++i) {
        if (grads[i].size() != params.arrays[i].size())
            throw std::invalid_argument("adam_step: gradient shape mismatch");
        auto& w = params.arrays[i];
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (size_t j = 0; j < w.size(); ++j) {
            const double g = grads[i][j];
            const double mj = kBeta1 * m[j] + (1.0 - kBeta1) * g;
            const double vj = kBeta2 * v[j] + (1.0 - kBeta2) * g * g;
            m[j] = static_cast<float>(mj);
            v[j] = static_cast<float>(vj);
            const double mhat = mj / bc1;
            const double vhat = vj / bc2;
            w[j] = static_cast<float>(w[j] - lr * mhat / (std::sqrt(vhat) + kEps));
        }
    }
}

// Epsilon-prediction MSE over one batch: per image draw t ~ U[1,T] and
// eps ~ N(0,I), corrupt with the closed-form forward process, and score
// mean (predict - eps)^2 over batch and pixels. The (t, eps) draws come
// sequentially from the caller's generator before any parallel work, so
// results do not depend on the worker count.
inline double loss_and_gradients(const DenoiserParams& params,
                                 const std::vector<const ImageTensor*>& batch,
                                 const NoiseSchedule& sched, Rng& rng,
                                 DenoiserGrads& grads) {
    if (batch.empty()) throw std::invalid_argument("loss_and_gradients: empty batch");
    const size_t B = batch.size();
    std::vector<int> ts(B);
    std::vector<ImageTensor> eps(B);
    for (size_t i = 0; i < B; ++i) {
        const ImageTensor& x0 = *batch[i];
        ts[i] = static_cast<int>(rng.uniform_int(1, sched.T));
        eps[i] = ImageTensor(x0.channels, x0.height, x0.width);
        for (double& e : eps[i].data) e = rng.normal();
    }

    std::vector<DenoiserGrads> partial(B);
    std::vector<double> losses(B, 0.0);
    const double numel = static_cast<double>(batch[0]->size());
    parallel_for(B, [&](size_t i) {
        const ImageTensor& x0 = *batch[i];
        partial[i] = make_grads(params.arch);
        DenoiserWorkspace ws;
        ImageTensor x_t = forward_sample(x0, ts[i], eps[i], sched);
        const ImageTensor& pred = denoiser_forward(params, x_t, ts[i], ws);
        ImageTensor g_out(x0.channels, x0.height, x0.width);
        double loss = 0.0;
        const double scale = 2.0 / (numel * static_cast<double>(B));
        for (size_t j = 0; j < pred.size(); ++j) {
            const double r = pred.data[j] - eps[i].data[j];
            loss += r * r;
            g_out.data[j] = scale * r;
        }
        losses[i] = loss / numel;
        denoiser_backward(params, x_t, ws, g_out, partial[i]);
    });

    // Fixed-order reduction.
    double total = 0.0;
    for (size_t i = 0; i < B; ++i) {
        total += losses[i];
        for (int a = 0; a < kNumParamArrays; ++a)
            for (size_t j = 0; j < grads[a].size(); ++j) grads[a][j] += partial[i][a][j];
    }
    return total / static_cast<double>(B);
}

struct TrainResult {
    DenoiserParams params;
    AdamState state;
    std::vector<double> epoch_loss;
};

using EpochCallback = std::function<void(int epoch, const DenoiserParams&,
                                         const AdamState&, double mean_loss)>;

// Seeded shuffled mini-batch training. Every epoch derives its own RNG
// stream from (seed, epoch), which makes a resumed run replay the exact
// same draws as an uninterrupted one.
inline TrainResult train(const std::vector<ImageTensor>& dataset, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {},
                         const DenoiserParams* resume_params = nullptr,
                         const AdamState* resume_state = nullptr, int start_epoch = 0) {
    cfg.validate();
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
    for (const auto& img : dataset)
        if (img.channels != 3 || img.height != cfg.image_size || img.width != cfg.image_size)
            throw std::invalid_argument("train: dataset image size mismatch");

    const NoiseSchedule sched = cfg.schedule();
    TrainResult result;
    result.params = resume_params ? *resume_params : DenoiserParams::training_init({}, cfg.seed);
    result.state = resume_state ? *resume_state : AdamState::zeros(result.params.arch);

    const size_t n = dataset.size();
    std::vector<size_t> order(n);
    DenoiserGrads grads = make_grads(result.params.arch);
    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        Rng epoch_rng(Rng::derive_seed(cfg.seed, 1, static_cast<uint64_t>(epoch)));
        for (size_t i = 0; i < n; ++i) order[i] = i;
        for (size_t i = n; i > 1; --i) {
            const size_t j = static_cast<size_t>(epoch_rng.uniform_int(0, static_cast<int64_t>(i) - 1));
            std::swap(order[i - 1], order[j]);
        }
        double loss_sum = 0.0;
        for (size_t begin = 0; begin < n; begin += cfg.batch_size) {
            const size_t end = std::min(n, begin + cfg.batch_size);
            std::vector<const ImageTensor*> batch;
            batch.reserve(end - begin);
            for (size_t i = begin; i < end; ++i) batch.push_back(&dataset[order[i]]);
            zero_grads(grads);
            const double batch_loss =
                loss_and_gradients(result.params, batch, sched, epoch_rng, grads);
            adam_step(result.params, grads, result.state, cfg.learning_rate);
            loss_sum += batch_loss * static_cast<double>(batch.size());
        }
        const double mean_loss = loss_sum / static_cast<double>(n);
        result.epoch_loss.push_back(mean_loss);
        if (on_epoch) on_epoch(epoch + 1, result.params, result.state, mean_loss);
    }
    return result;
}

} // namespace dualgen
