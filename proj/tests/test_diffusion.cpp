#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dualgen/diffusion.hpp"
#include "dualgen/rng.hpp"

#include "regression_constants.hpp"

using namespace dualgen;

namespace {

ImageTensor tensor_of(std::vector<double> v, int c, int h, int w) {
    ImageTensor t(c, h, w);
    t.data = std::move(v);
    return t;
}

ImageTensor random_tensor(int c, int h, int w, uint64_t seed) {
    ImageTensor t(c, h, w);
    Rng rng(seed);
    for (double& v : t.data) v = rng.uniform();
    return t;
}

// Hand-assembled schedule for formula-level tests.
NoiseSchedule manual_schedule(std::vector<double> beta, std::vector<double> alpha_bar,
                              std::vector<double> sigma) {
    NoiseSchedule s;
    s.T = static_cast<int>(beta.size());
    s.beta = std::move(beta);
    s.alpha.resize(s.T);
    for (int i = 0; i < s.T; ++i) s.alpha[i] = 1.0 - s.beta[i];
    s.alpha_bar = std::move(alpha_bar);
    s.posterior_sigma = std::move(sigma);
    return s;
}

} // namespace

TEST_CASE("linear_schedule") {
    SECTION("single step") {
        const auto s = linear_schedule(1, 0.5, 0.5);
        CHECK(s.beta == std::vector<double>{0.5});
        CHECK(s.alpha_bar == std::vector<double>{0.5});
    }

    SECTION("two steps, hand product") {
        const auto s = linear_schedule(2, 0.1, 0.3);
        CHECK(s.beta[0] == Catch::Approx(0.1));
        CHECK(s.beta[1] == Catch::Approx(0.3));
        CHECK(s.alpha_bar[0] == Catch::Approx(0.9));
        CHECK(s.alpha_bar[1] == Catch::Approx(0.63));
    }

    SECTION("thousand-step reference schedule, pinned product") {
        const auto s = linear_schedule(1000, 1e-4, 0.02);
        CHECK(s.alpha_bar.back() < 5e-5);
        CHECK(s.alpha_bar.back() ==
              Catch::Approx(pinned::kAlphaBarT1000).epsilon(1e-12));
    }

    SECTION("desk schedule, pinned product") {
        const auto s = linear_schedule(200, 5e-4, 0.1);
        CHECK(s.alpha_bar.back() ==
              Catch::Approx(pinned::kAlphaBarDesk200).epsilon(1e-12));
    }

    SECTION("invalid ranges throw") {
        CHECK_THROWS_AS(linear_schedule(0, 0.1, 0.2), std::invalid_argument);
        CHECK_THROWS_AS(linear_schedule(10, 0.0, 0.2), std::invalid_argument);
        CHECK_THROWS_AS(linear_schedule(10, 0.3, 0.2), std::invalid_argument);
        CHECK_THROWS_AS(linear_schedule(10, 0.3, 1.0), std::invalid_argument);
    }

    SECTION("alpha_bar identities hold exactly; SNR strictly decreases") {
        const auto s = linear_schedule(200, 5e-4, 0.1);
        double running = 1.0;
        for (int i = 0; i < s.T; ++i) {
            running *= s.alpha[i];
            CHECK(s.alpha_bar[i] == running);
            if (i > 0) {
                CHECK(s.alpha_bar[i] == s.alpha[i] * s.alpha_bar[i - 1]);
                CHECK(s.alpha_bar[i] < s.alpha_bar[i - 1]);
                const double snr_prev =
                    s.alpha_bar[i - 1] / (1.0 - s.alpha_bar[i - 1]);
                const double snr = s.alpha_bar[i] / (1.0 - s.alpha_bar[i]);
                CHECK(snr < snr_prev);
            }
        }
    }

    SECTION("posterior sigma variant") {
        const auto s = linear_schedule(3, 0.1, 0.3, SigmaKind::Posterior);
        CHECK(s.posterior_sigma[0] == 0.0); // (1 - alpha_bar_0) = 0
        for (int t = 2; t <= 3; ++t) {
            const double expect = std::sqrt((1.0 - s.alpha_bar[t - 2]) /
                                            (1.0 - s.alpha_bar[t - 1]) * s.beta[t - 1]);
            CHECK(s.sigma_at(t) == Catch::Approx(expect));
        }
        const auto sb = linear_schedule(3, 0.1, 0.3, SigmaKind::Beta);
        for (int t = 1; t <= 3; ++t)
            CHECK(sb.sigma_at(t) == Catch::Approx(std::sqrt(sb.beta_at(t))));
    }
}

TEST_CASE("forward_sample") {
    SECTION("degenerate alpha_bar = 1 returns x0") {
        const auto s = manual_schedule({1e-300}, {1.0}, {0.0});
        const auto x0 = random_tensor(1, 2, 2, 1);
        const auto eps = random_tensor(1, 2, 2, 2);
        const auto xt = forward_sample(x0, 1, eps, s);
        CHECK(xt.data == x0.data);
    }

    SECTION("zero x0 leaves pure scaled noise") {
        const auto s = linear_schedule(10, 0.05, 0.2);
        const ImageTensor x0(1, 2, 2, 0.0);
        const auto eps = random_tensor(1, 2, 2, 3);
        const int t = 7;
        const auto xt = forward_sample(x0, t, eps, s);
        const double scale = std::sqrt(1.0 - s.alpha_bar_at(t));
        for (size_t i = 0; i < xt.size(); ++i)
            CHECK(xt.data[i] == Catch::Approx(scale * eps.data[i]));
    }

    SECTION("guards") {
        const auto s = linear_schedule(10, 0.05, 0.2);
        const auto x0 = random_tensor(1, 2, 2, 4);
        const auto eps = random_tensor(1, 2, 2, 5);
        CHECK_THROWS_AS(forward_sample(x0, 0, eps, s), std::out_of_range);
        CHECK_THROWS_AS(forward_sample(x0, 11, eps, s), std::out_of_range);
        CHECK_THROWS_AS(forward_sample(x0, 3, random_tensor(1, 2, 3, 6), s),
                        std::invalid_argument);
    }

    SECTION("closed form matches the iterated one-step kernel in moments") {
        // x_t = sqrt(alpha_t) x_{t-1} + sqrt(beta_t) eps_t, iterated from x0,
        // must agree with the closed form in mean and variance.
        const auto s = linear_schedule(3, 0.1, 0.4);
        const double x0 = 0.8;
        const int M = 20000;
        Rng rng(99);
        double sum = 0.0, sum2 = 0.0;
        for (int i = 0; i < M; ++i) {
            double x = x0;
            for (int t = 1; t <= 3; ++t)
                x = std::sqrt(s.alpha_at(t)) * x + std::sqrt(s.beta_at(t)) * rng.normal();
            sum += x;
            sum2 += x * x;
        }
        const double mean = sum / M;
        const double var = sum2 / M - mean * mean;
        const double expect_mean = std::sqrt(s.alpha_bar_at(3)) * x0;
        const double expect_var = 1.0 - s.alpha_bar_at(3);
        const double se_mean = std::sqrt(expect_var / M);
        CHECK(std::abs(mean - expect_mean) <= 4.0 * se_mean);
        CHECK(std::abs(var - expect_var) <= 0.1 * expect_var);
    }
}

TEST_CASE("ancestral_step") {
    SECTION("hand arithmetic on a 1x1x1 tensor") {
        // alpha = 0.9, beta = 0.1, alpha_bar = 0.9, x = 1, eps_hat = 0.5:
        // (1/sqrt(0.9)) * (1 - (0.1/sqrt(0.1)) * 0.5) ~= 0.8874
        const auto s = manual_schedule({0.1}, {0.9}, {0.0});
        const auto out = ancestral_step(tensor_of({1.0}, 1, 1, 1), 1,
                                        tensor_of({0.5}, 1, 1, 1),
                                        tensor_of({0.0}, 1, 1, 1), s);
        const double expect =
            (1.0 - (0.1 / std::sqrt(0.1)) * 0.5) / std::sqrt(0.9);
        CHECK(out.data[0] == Catch::Approx(expect).margin(1e-12));
        CHECK(std::abs(out.data[0] - 0.8874) < 1e-4);
    }

    SECTION("one-step inversion recovers x0 when alpha_bar_prev = 1") {
        const auto s = linear_schedule(5, 0.05, 0.3);
        const auto x0 = random_tensor(2, 4, 4, 11);
        const auto eps = random_tensor(2, 4, 4, 12);
        const auto x1 = forward_sample(x0, 1, eps, s);
        const ImageTensor zero(2, 4, 4, 0.0);
        const auto back = ancestral_step(x1, 1, eps, zero, s);
        for (size_t i = 0; i < x0.size(); ++i)
            CHECK(back.data[i] == Catch::Approx(x0.data[i]).margin(1e-12));
    }

    SECTION("shape mismatch throws") {
        const auto s = linear_schedule(5, 0.05, 0.3);
        CHECK_THROWS_AS(ancestral_step(random_tensor(1, 2, 2, 1), 2,
                                       random_tensor(1, 2, 3, 2),
                                       random_tensor(1, 2, 2, 3), s),
                        std::invalid_argument);
    }
}

TEST_CASE("generate") {
    SECTION("zero denoiser with T = 1 and sigma = 0 collapses to clamp(x_T/sqrt(alpha))") {
        // The posterior sigma choice makes sigma_1 = 0 by construction.
        const auto s = linear_schedule(1, 0.19, 0.19, SigmaKind::Posterior);
        const NoisePredictor zero = [](const ImageTensor& x, int) {
            return ImageTensor(x.channels, x.height, x.width, 0.0);
        };
        const uint64_t seed = 31;
        const auto out = generate(zero, s, 1, 2, 2, seed);
        Rng rng(seed);
        const auto x_T = gaussian_tensor(1, 2, 2, rng);
        for (size_t i = 0; i < out.size(); ++i)
            CHECK(out.data[i] ==
                  Catch::Approx(clamp01(x_T.data[i] / std::sqrt(0.81))).margin(1e-12));
    }

    SECTION("same seed is bit-identical; different seed differs") {
        const auto s = linear_schedule(20, 1e-3, 0.1);
        const NoisePredictor zero = [](const ImageTensor& x, int) {
            return ImageTensor(x.channels, x.height, x.width, 0.0);
        };
        const auto a = generate(zero, s, 3, 4, 4, 5);
        const auto b = generate(zero, s, 3, 4, 4, 5);
        const auto c = generate(zero, s, 3, 4, 4, 6);
        CHECK(a.data == b.data);
        CHECK(a.data != c.data);
    }

    SECTION("analytic oracle denoiser reproduces the target image") {
        // eps_hat = (x_t - sqrt(alpha_bar_t) x0*) / sqrt(1 - alpha_bar_t)
        // with sigma = 0 turns the chain into a contraction onto x0*.
        auto s = linear_schedule(50, 1e-3, 0.15);
        std::fill(s.posterior_sigma.begin(), s.posterior_sigma.end(), 0.0);
        const auto target = random_tensor(1, 8, 8, 77);
        const NoisePredictor ideal = [&](const ImageTensor& x, int t) {
            const double ab = s.alpha_bar_at(t);
            ImageTensor eps(x.channels, x.height, x.width);
            for (size_t i = 0; i < x.size(); ++i)
                eps.data[i] =
                    (x.data[i] - std::sqrt(ab) * target.data[i]) / std::sqrt(1.0 - ab);
            return eps;
        };
        const auto out = generate(ideal, s, 1, 8, 8, 123);
        for (size_t i = 0; i < out.size(); ++i)
            CHECK(out.data[i] == Catch::Approx(target.data[i]).margin(1e-3));
    }

    SECTION("denoiser shape violation is caught") {
        const auto s = linear_schedule(3, 0.05, 0.1);
        const NoisePredictor bad = [](const ImageTensor&, int) {
            return ImageTensor(1, 2, 2, 0.0);
        };
        CHECK_THROWS_AS(generate(bad, s, 3, 4, 4, 1), std::runtime_error);
    }
}

TEST_CASE("tensor/rgb conversions round-trip") {
    const auto t = random_tensor(3, 5, 4, 321);
    const auto rgb = rgb_from_tensor(t);
    const auto back = tensor_from_rgb(rgb);
    CHECK(back.data == t.data);
}
