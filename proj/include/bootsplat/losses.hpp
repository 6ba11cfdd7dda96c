#pragma once

#include "bootsplat/image.hpp"
#include "bootsplat/metrics.hpp"

namespace bootsplat {

    struct LossValue {
        double value = 0.0;
        ImageBuffer grad; // dLoss / d(rendered image)
    };

    /// Mean absolute error over all pixels and channels.
    LossValue l1_loss(const ImageBuffer& render, const ImageBuffer& target);

    /// (1 - lambda) L1 + lambda (1 - SSIM); lambda defaults to 0.2.
    LossValue photometric_loss(const ImageBuffer& render, const ImageBuffer& target, double lambda_dssim = 0.2);

} // namespace bootsplat
