#pragma once

#include "bootsplat/gaussian.hpp"
#include "bootsplat/optimizer.hpp"
#include "bootsplat/rasterizer.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace bootsplat {

    /// Running screen-space gradient statistics for one point.
    struct GradAccumulator {
        Eigen::Vector2d vector_sum = Eigen::Vector2d::Zero();
        double magnitude_sum = 0.0;
        uint32_t count = 0;
        /// Sum of world-space position gradients; gives the clone direction.
        Eigen::Vector3d position_grad_sum = Eigen::Vector3d::Zero();

        void accumulate(const Eigen::Vector2d& screen_grad);
        /// |sum g| / sum |g|, in [0,1]; 0 for an empty accumulator.
        double consistency() const;
        double mean_magnitude() const;
    };

    struct DensifyConfig {
        double clone_grad_threshold = 2e-4;
        /// Max world-space scale separating clone (below) from split (at or above).
        double split_scale_threshold = 0.01;
        int densify_interval = 100;
        int densify_from = 500;
        int densify_until = 15000;
        int opacity_reset_interval = 3000;
        double prune_alpha = 0.005;
        double direction_consistency_ratio = 0.5;
        double split_scale_divisor = 1.6;
        double reset_opacity_value = 0.01;

        void validate() const;
    };

    enum class DensifyAction : uint8_t { None, Clone, Split, Prune };

    std::vector<DensifyAction> densify_decision(std::span<const GradAccumulator> acc, const GaussianCloud& cloud,
                                                const DensifyConfig& cfg);

    struct DensifyStats {
        std::size_t clones = 0;
        std::size_t splits = 0;
        std::size_t prunes = 0;
    };

    /// Applies the actions to the cloud and keeps accumulators and optimizer
    /// moments in step. Survivors keep their order; clones and second split children
    /// are appended. New points start with zero moments and fresh accumulators.
    DensifyStats apply_actions(GaussianCloud& cloud, std::vector<GradAccumulator>& acc, Adam* adam,
                               std::span<const DensifyAction> actions, const DensifyConfig& cfg, std::mt19937_64& rng);

    /// Caps every opacity at cfg.reset_opacity_value (logit(min(alpha, 0.01))).
    void reset_opacity(GaussianCloud& cloud, double max_alpha = 0.01);

} // namespace bootsplat
