#pragma once

#include "bootsplat/image.hpp"

#include <cstdint>
#include <memory>
#include <random>
#include <vector>

namespace bootsplat::diffusion {

    /// Discrete variance schedule. alpha_bars has T+1 entries with
    /// alpha_bars[0] = 1 and alpha_bars[t] = prod_{s<=t} (1 - beta_s).
    struct DiffusionSchedule {
        int total_steps = 1000;
        std::vector<double> betas;      // betas[t-1] = beta_t, t = 1..T
        std::vector<double> alpha_bars; // index t = 0..T
        int sampler_steps = 100;
        double eta = 0.0;

        static DiffusionSchedule linear(int total_steps = 1000, double beta_start = 1e-4, double beta_end = 2e-2,
                                        int sampler_steps = 100, double eta = 0.0);

        double alpha_bar(int t) const { return alpha_bars.at(static_cast<std::size_t>(t)); }

        /// Descending DDIM timesteps from `start` to 0 inclusive: start itself,
        /// then every grid point k*T/steps below it.
        std::vector<int> timesteps_from(int start, int steps) const;
    };

    /// round(T * s_r), clamped to [0, T].
    int strength_to_start(double strength, int total_steps);

    /// sqrt(abar_t) x0 + sqrt(1 - abar_t) eps
    ImageBuffer forward_noise(const ImageBuffer& x0, int t, const ImageBuffer& eps, const DiffusionSchedule& schedule);

    /// DDIM update from t to t_prev. `rng` supplies z when eta > 0.
    ImageBuffer ddim_step(const ImageBuffer& x_t, int t, int t_prev, const ImageBuffer& eps_hat, double eta,
                          const DiffusionSchedule& schedule, std::mt19937_64* rng = nullptr);

    class NoisePredictor {
    public:
        virtual ~NoisePredictor() = default;
        virtual ImageBuffer predict(const ImageBuffer& x_t, int t, const DiffusionSchedule& schedule) = 0;
        /// Called by regenerate with the noise it injected.
        virtual void observe_noise(const ImageBuffer& /*eps*/) {}
    };

    /// Returns the injected noise verbatim; exact inversion for tests.
    class ExactEpsOracle final : public NoisePredictor {
    public:
        ExactEpsOracle() = default;
        explicit ExactEpsOracle(ImageBuffer eps)
            : eps_(std::move(eps)) {}
        ImageBuffer predict(const ImageBuffer& x_t, int t, const DiffusionSchedule& schedule) override;
        void observe_noise(const ImageBuffer& eps) override { eps_ = eps; }

    private:
        ImageBuffer eps_;
    };

    class ZeroPredictor final : public NoisePredictor {
    public:
        ImageBuffer predict(const ImageBuffer& x_t, int t, const DiffusionSchedule& schedule) override;
    };

    /// Predicts eps so that the implied x0 is an edge-preserving (bilateral)
    /// smoothing of x_t / sqrt(abar_t). Range sigma widens with the noise level.
    class BlurSharpenHeuristic final : public NoisePredictor {
    public:
        explicit BlurSharpenHeuristic(double spatial_sigma = 1.0, double range_sigma = 0.15)
            : spatial_sigma_(spatial_sigma),
              range_sigma_(range_sigma) {}
        ImageBuffer predict(const ImageBuffer& x_t, int t, const DiffusionSchedule& schedule) override;

    private:
        double spatial_sigma_;
        double range_sigma_;
    };

    struct RegenRequest {
        ImageBuffer image;
        double strength = 0.0;
        int steps = 100; // sampler steps over the full chain
        uint64_t seed = 0;
    };

    /// Partial image-to-image regeneration: noise to strength_to_start(s_r),
    /// run DDIM back to 0 over the sampler grid, clamp to [0,1].
    ImageBuffer regenerate(const RegenRequest& req, NoisePredictor& predictor, const DiffusionSchedule& schedule);

    /// || eps - predictor(forward_noise(x0, t, eps), t) ||^2
    double simple_loss(const ImageBuffer& x0, int t, const ImageBuffer& eps, NoisePredictor& predictor,
                       const DiffusionSchedule& schedule);

    ImageBuffer gaussian_noise(int width, int height, std::mt19937_64& rng);

} // namespace bootsplat::diffusion
