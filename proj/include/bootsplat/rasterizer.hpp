#pragma once

#include "bootsplat/camera.hpp"
#include "bootsplat/gaussian.hpp"
#include "bootsplat/image.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace bootsplat {

    struct RasterConfig {
        int tile_size = 16;
        double near_plane = 0.01;
        /// Added to every projected covariance (px^2).
        double dilation = 0.3;
        /// sigma = alpha * G' below this is skipped and bounds the splat's
        /// footprint; 0 disables the cutoff (every splat touches every tile).
        double min_contribution = 1.0 / 255.0;
        bool early_stop = true;
        double transmittance_stop = 1e-4;
        Eigen::Vector3d background = Eigen::Vector3d::Zero();
    };

    struct Splat2D {
        uint32_t index = 0; // source Gaussian
        Eigen::Vector2d mean2d = Eigen::Vector2d::Zero();
        Eigen::Matrix2d cov2d = Eigen::Matrix2d::Identity();
        Eigen::Matrix2d conic = Eigen::Matrix2d::Identity();
        double depth = 0.0;
        Eigen::Vector3d color = Eigen::Vector3d::Zero();
        double alpha = 0.0;
        /// Half-extent of the footprint box in pixels (infinite when uncut).
        double radius = 0.0;
        /// Exponents below this cannot reach min_contribution; lets the blend
        /// loop skip exp(). -inf disables the shortcut.
        double power_cutoff = -std::numeric_limits<double>::infinity();

        // Backward-pass cache.
        Eigen::Vector3d cam_point = Eigen::Vector3d::Zero();
        Eigen::Vector3d view_dir = Eigen::Vector3d::UnitZ();
        std::array<bool, 3> color_clamped{false, false, false};
        std::array<bool, 2> jacobian_clamped{false, false};
    };

    /// Sorted per-tile splat lists; entries index into the splat span and are
    /// ordered front to back by (depth, Gaussian index).
    struct TileBins {
        int tile_size = 16;
        int tiles_x = 0;
        int tiles_y = 0;
        std::vector<std::vector<uint32_t>> lists;
    };

    struct RenderOutput {
        ImageBuffer image;
        std::vector<double> alpha;          // 1 - final transmittance, per pixel
        std::vector<double> depth;          // alpha-normalized expected depth, 0 where empty
        std::vector<uint32_t> contributors; // splats blended per pixel
        TileBins bins;
    };

    struct SplatGrad {
        Eigen::Vector2d mean2d = Eigen::Vector2d::Zero();
        Eigen::Matrix2d cov2d = Eigen::Matrix2d::Zero();
        Eigen::Vector3d color = Eigen::Vector3d::Zero();
        double alpha = 0.0;
    };

    struct CloudGradients {
        std::vector<Gaussian> params;

        CloudGradients() = default;
        explicit CloudGradients(std::size_t n)
            : params(n, Gaussian::zero()) {}

        void add(const CloudGradients& other, double scale = 1.0);
        bool all_zero() const;
    };

    /// Per-render screen-space positional gradients, NDC-scaled
    /// (pixel gradient times W/2, H/2) for densification statistics.
    struct ScreenGradients {
        std::vector<Eigen::Vector2d> grad;
        std::vector<uint8_t> visible;
    };

    /// EWA projection of every Gaussian in front of the near plane whose
    /// footprint meets the image.
    std::vector<Splat2D> project(const GaussianCloud& cloud, const Camera& cam, const RasterConfig& cfg = {});

    TileBins bin_splats(std::span<const Splat2D> splats, int width, int height, int tile_size);

    /// Tile-parallel front-to-back alpha blending.
    RenderOutput rasterize(std::span<const Splat2D> splats, int width, int height, const RasterConfig& cfg = {});

    /// Gradients w.r.t. each splat's mean2d, cov2d (dilated), color and alpha.
    /// Per-tile partial sums are reduced in tile order, so the result does not
    /// depend on the thread count.
    std::vector<SplatGrad> rasterize_backward(std::span<const Splat2D> splats, const RenderOutput& out,
                                              const ImageBuffer& dL_dimage, const RasterConfig& cfg = {});

    /// Chains splat gradients back to the cloud parameters, accumulating into
    /// `grads`. `screen`, when given, receives this render's screen gradients.
    void project_backward(const GaussianCloud& cloud, const Camera& cam, std::span<const Splat2D> splats,
                          std::span<const SplatGrad> splat_grads, CloudGradients& grads, ScreenGradients* screen = nullptr);

    struct Render {
        std::vector<Splat2D> splats;
        RenderOutput output;
    };

    Render render(const GaussianCloud& cloud, const Camera& cam, const RasterConfig& cfg = {});
    void render_backward(const GaussianCloud& cloud, const Camera& cam, const Render& r, const ImageBuffer& dL_dimage,
                         const RasterConfig& cfg, CloudGradients& grads, ScreenGradients* screen = nullptr);

    namespace reference {
        // Serial, untiled implementations kept for testing the parallel kernels.
        RenderOutput rasterize(std::span<const Splat2D> splats, int width, int height, const RasterConfig& cfg = {});
        std::vector<SplatGrad> rasterize_backward(std::span<const Splat2D> splats, int width, int height,
                                                  const ImageBuffer& dL_dimage, const RasterConfig& cfg = {});
    } // namespace reference

} // namespace bootsplat
