#pragma once

#include "bootsplat/config.hpp"
#include "bootsplat/toy_scene.hpp"

#include <cstdint>

namespace bootsplat::oracle {

    /// Training setup for the 4000-iteration toy comparison: the standard
    /// schedule compressed by a factor of 7.5 in iteration count.
    TrainConfig toy_train_config(uint64_t seed, bool bootstrapped);

    struct ToyBenefit {
        double baseline_psnr = 0.0;
        double bootstrapped_psnr = 0.0;
        std::size_t regenerations = 0;
        double seconds = 0.0;
    };

    /// Trains baseline and bootstrapped models on the same toy scene and
    /// reports held-out PSNR. The regenerator renders the reference cloud.
    ToyBenefit run_toy_benefit(uint64_t seed);

} // namespace bootsplat::oracle
