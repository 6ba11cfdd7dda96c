#pragma once

// Per-pixel blending kernels shared by the tiled and the serial rasterizer so
// both produce bitwise-identical images.

#include "bootsplat/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace bootsplat::detail {

    struct PixelTap {
        double G;
        double sigma;
        Eigen::Vector2d d; // pixel - mean2d
    };

    /// Returns false when the splat does not contribute at this pixel.
    inline bool evaluate_tap(const Splat2D& s, double px, double py, double min_contribution, PixelTap& tap) {
        const double dx = px - s.mean2d.x();
        const double dy = py - s.mean2d.y();
        const double power = -0.5 * (s.conic(0, 0) * dx * dx + 2.0 * s.conic(0, 1) * dx * dy + s.conic(1, 1) * dy * dy);
        if (power > 0.0 || power < s.power_cutoff)
            return false;
        const double G = std::exp(power);
        const double sigma = s.alpha * G;
        if (sigma < min_contribution || sigma <= 0.0)
            return false;
        tap.G = G;
        tap.sigma = sigma;
        tap.d = Eigen::Vector2d(dx, dy);
        return true;
    }

    struct PixelResult {
        Eigen::Vector3d color = Eigen::Vector3d::Zero();
        double depth_acc = 0.0;
        double transmittance = 1.0;
        uint32_t contributors = 0;
    };

    template <typename IndexRange>
    PixelResult blend_pixel(std::span<const Splat2D> splats, const IndexRange& order, double px, double py,
                            const RasterConfig& cfg) {
        PixelResult r;
        PixelTap tap;
        for (const uint32_t idx : order) {
            const Splat2D& s = splats[idx];
            if (!evaluate_tap(s, px, py, cfg.min_contribution, tap))
                continue;
            const double w = tap.sigma * r.transmittance;
            r.color += w * s.color;
            r.depth_acc += w * s.depth;
            r.transmittance *= 1.0 - tap.sigma;
            ++r.contributors;
            // Stop once the pixel is saturated; the splat that saturates it still counts.
            if (cfg.early_stop && r.transmittance < cfg.transmittance_stop)
                break;
        }
        r.color += r.transmittance * cfg.background;
        return r;
    }

    struct BackwardTap {
        uint32_t slot; // position in the traversal list
        double G;
        double sigma;
        double T;      // transmittance in front of this splat
        Eigen::Vector2d d;
    };

    /// Re-runs the forward traversal for one pixel and accumulates gradients
    /// into `grad[slot]` where slot is the position inside `order`.
    template <typename IndexRange>
    void backward_pixel(std::span<const Splat2D> splats, const IndexRange& order, double px, double py,
                        const Eigen::Vector3d& dL_dC, const RasterConfig& cfg, std::vector<BackwardTap>& taps,
                        SplatGrad* grad, std::vector<Eigen::Matrix2d>& dL_dconic) {
        taps.clear();
        double T = 1.0;
        PixelTap tap;
        uint32_t slot = 0;
        for (const uint32_t idx : order) {
            const Splat2D& s = splats[idx];
            const bool hit = evaluate_tap(s, px, py, cfg.min_contribution, tap);
            if (hit) {
                taps.push_back({slot, tap.G, tap.sigma, T, tap.d});
                T *= 1.0 - tap.sigma;
            }
            ++slot;
            if (hit && cfg.early_stop && T < cfg.transmittance_stop)
                break;
        }

        Eigen::Vector3d behind = cfg.background;
        for (auto it = taps.rbegin(); it != taps.rend(); ++it) {
            const Splat2D& s = splats[order[it->slot]];
            SplatGrad& g = grad[it->slot];
            g.color += (it->sigma * it->T) * dL_dC;
            const double dL_dsigma = it->T * dL_dC.dot(s.color - behind);
            behind = it->sigma * s.color + (1.0 - it->sigma) * behind;

            g.alpha += dL_dsigma * it->G;
            const double dL_dpower = dL_dsigma * s.alpha * it->G;
            const Eigen::Vector2d Qd = s.conic * it->d;
            g.mean2d += dL_dpower * Qd;
            dL_dconic[it->slot] += (-0.5 * dL_dpower) * (it->d * it->d.transpose());
        }
    }

    /// dL/dcov = -Q dL/dQ Q
    inline Eigen::Matrix2d conic_to_cov_grad(const Eigen::Matrix2d& conic, const Eigen::Matrix2d& dL_dconic) {
        return -(conic * dL_dconic * conic);
    }

    inline std::vector<uint32_t> depth_order(std::span<const Splat2D> splats) {
        std::vector<uint32_t> order(splats.size());
        std::iota(order.begin(), order.end(), 0u);
        std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
            if (splats[a].depth != splats[b].depth)
                return splats[a].depth < splats[b].depth;
            return splats[a].index < splats[b].index;
        });
        return order;
    }

    inline void store_pixel(RenderOutput& out, int x, int y, const PixelResult& r) {
        const std::size_t p = static_cast<std::size_t>(y) * static_cast<std::size_t>(out.image.width) + static_cast<std::size_t>(x);
        for (int c = 0; c < 3; ++c)
            out.image.at(x, y, c) = r.color[c];
        const double a = 1.0 - r.transmittance;
        out.alpha[p] = a;
        out.depth[p] = a > 0.0 ? r.depth_acc / a : 0.0;
        out.contributors[p] = r.contributors;
    }

    inline RenderOutput make_output(int width, int height) {
        RenderOutput out;
        out.image = ImageBuffer(width, height);
        const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
        out.alpha.assign(n, 0.0);
        out.depth.assign(n, 0.0);
        out.contributors.assign(n, 0);
        return out;
    }

} // namespace bootsplat::detail
