#pragma once

#include "bootsplat/image.hpp"

#include <string>
#include <vector>

namespace bootsplat {

    /// 10 log10(1 / MSE) for [0,1] images; +infinity when identical.
    double psnr(const ImageBuffer& a, const ImageBuffer& b);

    struct SsimParams {
        int window = 11;
        double sigma = 1.5;
        double c1 = 0.01 * 0.01;
        double c2 = 0.03 * 0.03;
    };

    /// Gaussian-window SSIM averaged over pixels and channels, mirror-reflect
    /// padding at the borders.
    double ssim(const ImageBuffer& a, const ImageBuffer& b, const SsimParams& params = {});

    /// SSIM together with dSSIM/da (same shape as a).
    double ssim_with_grad(const ImageBuffer& a, const ImageBuffer& b, ImageBuffer& dssim_da, const SsimParams& params = {});

    struct ImageMetric {
        std::string name;
        double psnr = 0.0;
        double ssim = 0.0;
    };

    struct MetricReport {
        std::string scene;
        uint64_t iteration = 0;
        double psnr = 0.0; // mean over images
        double ssim = 0.0;
        std::vector<ImageMetric> per_image;

        /// {scene, iteration, psnr, ssim, lpips:"n/a", per_image:[...]}; infinite
        /// PSNR is written as the string "inf".
        std::string to_json() const;
    };

    MetricReport summarize(std::string scene, uint64_t iteration, std::vector<ImageMetric> per_image);

} // namespace bootsplat
