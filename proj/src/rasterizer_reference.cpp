#include "bootsplat/rasterizer.hpp"
#include "raster_kernels.hpp"

namespace bootsplat::reference {

    RenderOutput rasterize(std::span<const Splat2D> splats, int width, int height, const RasterConfig& cfg) {
        RenderOutput out = detail::make_output(width, height);
        const auto order = detail::depth_order(splats);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                detail::store_pixel(out, x, y, detail::blend_pixel(splats, order, x + 0.5, y + 0.5, cfg));
        return out;
    }

    std::vector<SplatGrad> rasterize_backward(std::span<const Splat2D> splats, int width, int height,
                                              const ImageBuffer& dL_dimage, const RasterConfig& cfg) {
        const auto order = detail::depth_order(splats);
        std::vector<SplatGrad> by_slot(splats.size());
        std::vector<Eigen::Matrix2d> conic_by_slot(splats.size(), Eigen::Matrix2d::Zero());
        std::vector<detail::BackwardTap> taps;
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                const Eigen::Vector3d dC(dL_dimage.at(x, y, 0), dL_dimage.at(x, y, 1), dL_dimage.at(x, y, 2));
                if (dC.isZero(0.0))
                    continue;
                detail::backward_pixel(splats, order, x + 0.5, y + 0.5, dC, cfg, taps, by_slot.data(), conic_by_slot);
            }
        std::vector<SplatGrad> grads(splats.size());
        for (std::size_t k = 0; k < order.size(); ++k) {
            grads[order[k]] = by_slot[k];
            grads[order[k]].cov2d = detail::conic_to_cov_grad(splats[order[k]].conic, conic_by_slot[k]);
        }
        return grads;
    }

} // namespace bootsplat::reference
