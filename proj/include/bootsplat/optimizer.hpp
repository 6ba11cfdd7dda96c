#pragma once

#include "bootsplat/gaussian.hpp"
#include "bootsplat/rasterizer.hpp"

#include <cstdint>
#include <vector>

namespace bootsplat {

    struct LearningRates {
        double position_init = 1.6e-4;
        double position_final = 1.6e-6;
        int64_t position_max_steps = 30000;
        /// Multiplies the position rates; the scene extent, as in 3D-GS.
        double spatial_scale = 1.0;
        double rotation = 1e-3;
        double scale = 5e-3;
        double opacity = 0.05;
        double color = 2.5e-3;
        double sh = 2.5e-3 / 20.0;

        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-15;

        /// Log-linear interpolation from init to final over max_steps.
        double position_at(int64_t iteration) const;
        double for_group(ParamGroup group, int64_t iteration) const;

        static LearningRates zero();
    };

    /// Adam with one moment pair per parameter and a shared step counter
    /// (points added by densification start from zero moments).
    class Adam {
    public:
        Adam() = default;
        explicit Adam(std::size_t n)
            : m_(n, Gaussian::zero()),
              v_(n, Gaussian::zero()) {}

        /// Applies one update; `iteration` drives the position-rate decay.
        /// Rotations are renormalized afterwards.
        void step(GaussianCloud& cloud, const CloudGradients& grads, const LearningRates& lr, int64_t iteration);

        std::vector<Gaussian>& first_moments() { return m_; }
        std::vector<Gaussian>& second_moments() { return v_; }
        const std::vector<Gaussian>& first_moments() const { return m_; }
        int64_t steps() const { return t_; }

    private:
        std::vector<Gaussian> m_;
        std::vector<Gaussian> v_;
        int64_t t_ = 0;
    };

} // namespace bootsplat
