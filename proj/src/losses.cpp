#include "bootsplat/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace bootsplat {

    LossValue l1_loss(const ImageBuffer& render, const ImageBuffer& target) {
        if (!render.same_shape(target))
            throw std::invalid_argument("l1_loss: shape mismatch");
        LossValue out;
        out.grad = ImageBuffer(render.width, render.height);
        const double inv_n = 1.0 / static_cast<double>(render.size());
        double sum = 0.0;
        for (std::size_t i = 0; i < render.size(); ++i) {
            const double d = render.data[i] - target.data[i];
            sum += std::abs(d);
            out.grad.data[i] = d > 0.0 ? inv_n : (d < 0.0 ? -inv_n : 0.0);
        }
        out.value = sum * inv_n;
        return out;
    }

    LossValue photometric_loss(const ImageBuffer& render, const ImageBuffer& target, double lambda_dssim) {
        LossValue l1 = l1_loss(render, target);
        if (lambda_dssim == 0.0)
            return l1;
        ImageBuffer dssim;
        const double s = ssim_with_grad(render, target, dssim);
        LossValue out;
        out.value = (1.0 - lambda_dssim) * l1.value + lambda_dssim * (1.0 - s);
        out.grad = ImageBuffer(render.width, render.height);
        for (std::size_t i = 0; i < render.size(); ++i)
            out.grad.data[i] = (1.0 - lambda_dssim) * l1.grad.data[i] - lambda_dssim * dssim.data[i];
        return out;
    }

} // namespace bootsplat
