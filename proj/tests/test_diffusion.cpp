#include "bootsplat/diffusion.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace bootsplat;
using namespace bootsplat::diffusion;

namespace {

    ImageBuffer checkerboard(int n, int cell) {
        ImageBuffer img(n, n);
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x)
                for (int c = 0; c < 3; ++c)
                    img.at(x, y, c) = ((x / cell + y / cell) % 2) ? 0.85 : 0.15;
        return img;
    }

    double sq_norm(const ImageBuffer& a) {
        double s = 0;
        for (double v : a.data)
            s += v * v;
        return s;
    }

    class RandomPredictor final : public NoisePredictor {
    public:
        ImageBuffer predict(const ImageBuffer& x, int, const DiffusionSchedule&) override {
            std::mt19937_64 rng(99);
            return gaussian_noise(x.width, x.height, rng);
        }
    };

} // namespace

TEST(StrengthToStart, WorkedExamples) {
    EXPECT_EQ(strength_to_start(0.1, 1000), 100);
    EXPECT_EQ(strength_to_start(0.0, 1000), 0);
    EXPECT_EQ(strength_to_start(1.0, 1000), 1000);
    EXPECT_EQ(strength_to_start(0.05, 1000), 50);
    EXPECT_EQ(strength_to_start(1.5, 1000), 1000);
    EXPECT_EQ(strength_to_start(-0.2, 1000), 0);
}

TEST(Schedule, LinearBetasAndMonotoneAlphaBar) {
    const auto s = DiffusionSchedule::linear();
    ASSERT_EQ(s.betas.size(), 1000u);
    ASSERT_EQ(s.alpha_bars.size(), 1001u);
    EXPECT_DOUBLE_EQ(s.betas.front(), 1e-4);
    EXPECT_DOUBLE_EQ(s.betas.back(), 2e-2);
    EXPECT_EQ(s.alpha_bar(0), 1.0);
    double prod = 1.0;
    for (int t = 1; t <= 1000; ++t) {
        const double b = s.betas[static_cast<std::size_t>(t - 1)];
        EXPECT_GT(b, 0.0);
        EXPECT_LT(b, 1.0);
        if (t > 1) {
            EXPECT_GT(b, s.betas[static_cast<std::size_t>(t - 2)]);
        }
        prod *= 1.0 - b;
        EXPECT_NEAR(s.alpha_bar(t), prod, 1e-15);
        EXPECT_LT(s.alpha_bar(t), s.alpha_bar(t - 1));
    }
}

TEST(Schedule, TimestepsUseTheSamplerGrid) {
    const auto s = DiffusionSchedule::linear();
    const auto ts = s.timesteps_from(100, 100);
    ASSERT_EQ(ts.size(), 11u);
    for (std::size_t i = 0; i < ts.size(); ++i)
        EXPECT_EQ(ts[i], 100 - 10 * static_cast<int>(i));
    const auto odd = s.timesteps_from(57, 100);
    EXPECT_EQ(odd.front(), 57);
    EXPECT_EQ(odd[1], 50);
    EXPECT_EQ(odd.back(), 0);
    EXPECT_EQ(s.timesteps_from(0, 100), std::vector<int>{0});
}

TEST(ForwardNoise, EndpointsAndZeroNoise) {
    const auto s = DiffusionSchedule::linear();
    std::mt19937_64 rng(1);
    const ImageBuffer x0 = oracle::random_image(6, 5, rng);
    const ImageBuffer eps = gaussian_noise(6, 5, rng);
    EXPECT_EQ(forward_noise(x0, 0, eps, s).data, x0.data);
    const ImageBuffer z = forward_noise(x0, 300, ImageBuffer(6, 5, 0.0), s);
    for (std::size_t i = 0; i < x0.size(); ++i)
        EXPECT_NEAR(z.data[i], std::sqrt(s.alpha_bar(300)) * x0.data[i], 1e-15);
}

TEST(ForwardNoise, VarianceLawMonteCarlo) {
    const auto s = DiffusionSchedule::linear();
    std::mt19937_64 rng(2);
    const ImageBuffer x0 = oracle::random_image(2, 2, rng);
    const int t = 400;
    const int draws = 10000;
    std::vector<double> sum(x0.size(), 0.0), sum2(x0.size(), 0.0);
    for (int d = 0; d < draws; ++d) {
        const ImageBuffer xt = forward_noise(x0, t, gaussian_noise(2, 2, rng), s);
        for (std::size_t i = 0; i < xt.size(); ++i) {
            sum[i] += xt.data[i];
            sum2[i] += xt.data[i] * xt.data[i];
        }
    }
    const double want = 1.0 - s.alpha_bar(t);
    for (std::size_t i = 0; i < x0.size(); ++i) {
        const double mean = sum[i] / draws;
        const double var = sum2[i] / draws - mean * mean;
        // Standard error of a sample variance is about var * sqrt(2/n) = 1.4%.
        EXPECT_NEAR(var, want, 0.06 * want);
        EXPECT_NEAR(mean, std::sqrt(s.alpha_bar(t)) * x0.data[i], 0.05);
    }
}

TEST(Ddim, SingleStepInversion) {
    const auto s = DiffusionSchedule::linear();
    std::mt19937_64 rng(3);
    const ImageBuffer x0 = oracle::random_image(8, 8, rng);
    const ImageBuffer eps = gaussian_noise(8, 8, rng);
    const ImageBuffer xt = forward_noise(x0, 100, eps, s);
    const ImageBuffer back = ddim_step(xt, 100, 0, eps, 0.0, s);
    EXPECT_LT(max_abs_diff(back, x0), 1e-6);
    EXPECT_EQ(ddim_step(xt, 100, 0, eps, 0.0, s).data, back.data);
}

TEST(Ddim, ChainedInversionFromHundred) {
    const auto s = DiffusionSchedule::linear();
    std::mt19937_64 rng(4);
    const ImageBuffer x0 = oracle::random_image(8, 8, rng);
    const ImageBuffer eps = gaussian_noise(8, 8, rng);
    ImageBuffer x = forward_noise(x0, 100, eps, s);
    const auto ts = s.timesteps_from(100, 100);
    for (std::size_t i = 0; i + 1 < ts.size(); ++i)
        x = ddim_step(x, ts[i], ts[i + 1], eps, 0.0, s);
    EXPECT_LT(max_abs_diff(x, x0), 1e-5);
}

TEST(Ddim, StochasticStepIsSeedDeterministic) {
    const auto s = DiffusionSchedule::linear();
    std::mt19937_64 rng(5);
    const ImageBuffer x = gaussian_noise(4, 4, rng);
    const ImageBuffer e = gaussian_noise(4, 4, rng);
    std::mt19937_64 r1(7), r2(7);
    const ImageBuffer a = ddim_step(x, 200, 190, e, 1.0, s, &r1);
    const ImageBuffer b = ddim_step(x, 200, 190, e, 1.0, s, &r2);
    EXPECT_EQ(a.data, b.data);
    EXPECT_GT(max_abs_diff(a, ddim_step(x, 200, 190, e, 0.0, s)), 0.0);
}

TEST(Regenerate, ZeroStrengthIsBitwiseIdentity) {
    const auto s = DiffusionSchedule::linear();
    std::mt19937_64 rng(6);
    RegenRequest req{oracle::random_image(10, 10, rng), 0.0, 100, 3};
    BlurSharpenHeuristic h;
    EXPECT_EQ(regenerate(req, h, s).data, req.image.data);
}

TEST(Regenerate, ExactOracleRecoversInput) {
    const auto s = DiffusionSchedule::linear();
    std::mt19937_64 rng(7);
    for (double sr : {0.01, 0.05, 0.10, 0.15}) {
        RegenRequest req{oracle::random_image(12, 12, rng), sr, 100, 11};
        ExactEpsOracle oracle;
        EXPECT_LT(max_abs_diff(regenerate(req, oracle, s), req.image), 1e-4) << "s_r=" << sr;
    }
}

TEST(Regenerate, HeuristicDenoisesCheckerboard) {
    const auto s = DiffusionSchedule::linear();
    const ImageBuffer clean = checkerboard(32, 4);
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(0.0, 0.08);
    ImageBuffer noisy = clean;
    for (auto& v : noisy.data)
        v = std::clamp(v + n(rng), 0.0, 1.0);
    BlurSharpenHeuristic h;
    const ImageBuffer out = regenerate({noisy, 0.05, 100, 1}, h, s);
    EXPECT_LT(l2_distance(out, clean), l2_distance(noisy, clean));
}

TEST(Regenerate, DeviationGrowsWithStrength) {
    const auto s = DiffusionSchedule::linear();
    const std::vector<double> strengths{0.01, 0.03, 0.05, 0.10, 0.15};
    std::vector<double> mean_dev(strengths.size(), 0.0);
    std::mt19937_64 rng(9);
    for (int i = 0; i < 20; ++i) {
        const ImageBuffer img = oracle::random_image(16, 16, rng);
        for (std::size_t k = 0; k < strengths.size(); ++k) {
            BlurSharpenHeuristic h;
            mean_dev[k] += l2_distance(regenerate({img, strengths[k], 100, static_cast<uint64_t>(i)}, h, s), img) / 20.0;
        }
    }
    for (std::size_t k = 1; k < strengths.size(); ++k)
        EXPECT_GE(mean_dev[k], mean_dev[k - 1]) << strengths[k];
}

TEST(Regenerate, SameSeedSameOutput) {
    const auto s = DiffusionSchedule::linear();
    std::mt19937_64 rng(10);
    const ImageBuffer img = oracle::random_image(12, 9, rng);
    BlurSharpenHeuristic h1, h2;
    EXPECT_EQ(regenerate({img, 0.1, 100, 5}, h1, s).data, regenerate({img, 0.1, 100, 5}, h2, s).data);
    const ImageBuffer out = regenerate({img, 0.1, 100, 5}, h1, s);
    EXPECT_TRUE(out.same_shape(img));
    for (double v : out.data) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(SimpleLoss, ReferencePredictors) {
    const auto s = DiffusionSchedule::linear();
    std::mt19937_64 rng(11);
    const ImageBuffer x0 = oracle::random_image(8, 8, rng);
    const ImageBuffer eps = gaussian_noise(8, 8, rng);
    ExactEpsOracle oracle(eps);
    EXPECT_EQ(simple_loss(x0, 250, eps, oracle, s), 0.0);
    ZeroPredictor zero;
    EXPECT_NEAR(simple_loss(x0, 250, eps, zero, s), sq_norm(eps), 1e-12);
    RandomPredictor random;
    EXPECT_GE(simple_loss(x0, 250, eps, random, s), 0.0);
}
