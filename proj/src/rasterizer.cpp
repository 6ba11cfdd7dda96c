#include "bootsplat/rasterizer.hpp"
#include "raster_kernels.hpp"

#include <Eigen/Eigenvalues>

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace bootsplat {

    void CloudGradients::add(const CloudGradients& other, double scale) {
        if (params.size() != other.params.size())
            params.resize(other.params.size(), Gaussian::zero());
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& dst = params[i];
            const auto& src = other.params[i];
            dst.position += scale * src.position;
            dst.rotation += scale * src.rotation;
            dst.log_scale += scale * src.log_scale;
            dst.opacity_logit += scale * src.opacity_logit;
            dst.color += scale * src.color;
            for (int k = 0; k < 3; ++k)
                dst.sh1[static_cast<std::size_t>(k)] += scale * src.sh1[static_cast<std::size_t>(k)];
        }
    }

    bool CloudGradients::all_zero() const {
        for (const auto& g : params) {
            bool nz = false;
            for_each_param(g, [&](ParamGroup, const double& v) { nz = nz || v != 0.0; });
            if (nz)
                return false;
        }
        return true;
    }

    // -----------------------------------------------------------------------------
    //  Projection
    // -----------------------------------------------------------------------------
    namespace {

        struct ProjectionJacobian {
            Eigen::Matrix<double, 2, 3> J;
            std::array<bool, 2> clamped{false, false};
        };

        // Local affine approximation of the perspective map around p. The
        // off-axis ratios are clamped like the reference 3D-GS projection.
        ProjectionJacobian perspective_jacobian(const Camera& cam, const Eigen::Vector3d& p) {
            const double lim_x = 1.3 * (0.5 * cam.width) / cam.fx;
            const double lim_y = 1.3 * (0.5 * cam.height) / cam.fy;
            const double z = p.z();
            const double rx = p.x() / z;
            const double ry = p.y() / z;
            ProjectionJacobian out;
            const double tx = std::clamp(rx, -lim_x, lim_x) * z;
            const double ty = std::clamp(ry, -lim_y, lim_y) * z;
            out.clamped = {rx < -lim_x || rx > lim_x, ry < -lim_y || ry > lim_y};
            out.J << cam.fx / z, 0.0, -cam.fx * tx / (z * z),
                0.0, cam.fy / z, -cam.fy * ty / (z * z);
            return out;
        }

        Eigen::Vector3d sh_color(const Gaussian& g, int sh_degree, const Eigen::Vector3d& dir) {
            Eigen::Vector3d c = g.color;
            if (sh_degree >= 1)
                c += kSH1 * (-dir.y() * g.sh1[0] + dir.z() * g.sh1[1] - dir.x() * g.sh1[2]);
            return c;
        }

    } // namespace

    std::vector<Splat2D> project(const GaussianCloud& cloud, const Camera& cam, const RasterConfig& cfg) {
        const Eigen::Matrix3d W = cam.pose.rotation();
        const Eigen::Vector3d center = cam.pose.center();
        std::vector<Splat2D> splats;
        splats.reserve(cloud.size());

        for (std::size_t i = 0; i < cloud.size(); ++i) {
            const Gaussian& g = cloud.points[i];
            const Eigen::Vector3d p = W * g.position + cam.pose.tvec;
            if (!(p.z() > cfg.near_plane))
                continue;

            Splat2D s;
            s.index = static_cast<uint32_t>(i);
            s.cam_point = p;
            s.depth = p.z();
            s.mean2d = Eigen::Vector2d(cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy);

            const auto pj = perspective_jacobian(cam, p);
            s.jacobian_clamped = pj.clamped;
            const Eigen::Matrix<double, 2, 3> M = pj.J * W;
            const Eigen::Matrix3d cov3 = build_covariance(g.rotation, g.log_scale);
            Eigen::Matrix2d cov2 = M * cov3 * M.transpose();
            cov2 = 0.5 * (cov2 + cov2.transpose());
            cov2 += cfg.dilation * Eigen::Matrix2d::Identity();
            s.cov2d = cov2;
            const double det = cov2.determinant();
            if (!(det > 0.0))
                continue;
            s.conic << cov2(1, 1) / det, -cov2(0, 1) / det, -cov2(1, 0) / det, cov2(0, 0) / det;

            s.alpha = g.opacity();
            if (cfg.min_contribution > 0.0) {
                if (s.alpha < cfg.min_contribution)
                    continue;
                const double mid = 0.5 * (cov2(0, 0) + cov2(1, 1));
                const double lambda_max = mid + std::sqrt(std::max(0.1, mid * mid - det));
                const double d2 = 2.0 * std::log(s.alpha / cfg.min_contribution);
                s.radius = std::sqrt(lambda_max * d2) * (1.0 + 1e-9) + 1e-9;
                s.power_cutoff = -0.5 * d2 - 1e-9;
                if (s.mean2d.x() + s.radius < 0.0 || s.mean2d.x() - s.radius > cam.width ||
                    s.mean2d.y() + s.radius < 0.0 || s.mean2d.y() - s.radius > cam.height)
                    continue;
            } else {
                s.radius = std::numeric_limits<double>::infinity();
            }

            const Eigen::Vector3d v = g.position - center;
            const double vn = v.norm();
            s.view_dir = vn > 0.0 ? Eigen::Vector3d(v / vn) : Eigen::Vector3d::UnitZ();
            const Eigen::Vector3d raw = sh_color(g, cloud.sh_degree, s.view_dir);
            for (int c = 0; c < 3; ++c) {
                s.color_clamped[static_cast<std::size_t>(c)] = raw[c] < 0.0 || raw[c] > 1.0;
                s.color[c] = std::clamp(raw[c], 0.0, 1.0);
            }
            splats.push_back(s);
        }
        return splats;
    }

    // -----------------------------------------------------------------------------
    //  Binning
    // -----------------------------------------------------------------------------
    TileBins bin_splats(std::span<const Splat2D> splats, int width, int height, int tile_size) {
        TileBins bins;
        bins.tile_size = tile_size;
        bins.tiles_x = (width + tile_size - 1) / tile_size;
        bins.tiles_y = (height + tile_size - 1) / tile_size;
        bins.lists.resize(static_cast<std::size_t>(bins.tiles_x) * static_cast<std::size_t>(bins.tiles_y));

        // Appending in global depth order keeps every tile list sorted.
        for (const uint32_t idx : detail::depth_order(splats)) {
            const Splat2D& s = splats[idx];
            int tx0 = 0, ty0 = 0, tx1 = bins.tiles_x - 1, ty1 = bins.tiles_y - 1;
            if (std::isfinite(s.radius)) {
                tx0 = std::max(0, static_cast<int>(std::floor((s.mean2d.x() - s.radius) / tile_size)));
                ty0 = std::max(0, static_cast<int>(std::floor((s.mean2d.y() - s.radius) / tile_size)));
                tx1 = std::min(bins.tiles_x - 1, static_cast<int>(std::floor((s.mean2d.x() + s.radius) / tile_size)));
                ty1 = std::min(bins.tiles_y - 1, static_cast<int>(std::floor((s.mean2d.y() + s.radius) / tile_size)));
            }
            for (int ty = ty0; ty <= ty1; ++ty)
                for (int tx = tx0; tx <= tx1; ++tx)
                    bins.lists[static_cast<std::size_t>(ty) * static_cast<std::size_t>(bins.tiles_x) + static_cast<std::size_t>(tx)].push_back(idx);
        }
        return bins;
    }

    // -----------------------------------------------------------------------------
    //  Forward
    // -----------------------------------------------------------------------------
    RenderOutput rasterize(std::span<const Splat2D> splats, int width, int height, const RasterConfig& cfg) {
        RenderOutput out = detail::make_output(width, height);
        out.bins = bin_splats(splats, width, height, cfg.tile_size);
        const int n_tiles = out.bins.tiles_x * out.bins.tiles_y;
        const int ts = cfg.tile_size;

#pragma omp parallel for schedule(dynamic, 1)
        for (int t = 0; t < n_tiles; ++t) {
            const auto& list = out.bins.lists[static_cast<std::size_t>(t)];
            const int x0 = (t % out.bins.tiles_x) * ts;
            const int y0 = (t / out.bins.tiles_x) * ts;
            const int x1 = std::min(x0 + ts, width);
            const int y1 = std::min(y0 + ts, height);
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x)
                    detail::store_pixel(out, x, y, detail::blend_pixel(splats, list, x + 0.5, y + 0.5, cfg));
        }
        return out;
    }

    // -----------------------------------------------------------------------------
    //  Backward
    // -----------------------------------------------------------------------------
    std::vector<SplatGrad> rasterize_backward(std::span<const Splat2D> splats, const RenderOutput& out,
                                              const ImageBuffer& dL_dimage, const RasterConfig& cfg) {
        const TileBins& bins = out.bins;
        const int width = out.image.width;
        const int height = out.image.height;
        const int n_tiles = bins.tiles_x * bins.tiles_y;
        const int ts = bins.tile_size;

        std::vector<std::vector<SplatGrad>> tile_grads(static_cast<std::size_t>(n_tiles));
        std::vector<std::vector<Eigen::Matrix2d>> tile_conic(static_cast<std::size_t>(n_tiles));

#pragma omp parallel
        {
            std::vector<detail::BackwardTap> taps;
#pragma omp for schedule(dynamic, 1)
            for (int t = 0; t < n_tiles; ++t) {
                const auto& list = bins.lists[static_cast<std::size_t>(t)];
                auto& g = tile_grads[static_cast<std::size_t>(t)];
                auto& gc = tile_conic[static_cast<std::size_t>(t)];
                g.assign(list.size(), SplatGrad{});
                gc.assign(list.size(), Eigen::Matrix2d::Zero());
                if (list.empty())
                    continue;
                const int x0 = (t % bins.tiles_x) * ts;
                const int y0 = (t / bins.tiles_x) * ts;
                const int x1 = std::min(x0 + ts, width);
                const int y1 = std::min(y0 + ts, height);
                for (int y = y0; y < y1; ++y)
                    for (int x = x0; x < x1; ++x) {
                        const Eigen::Vector3d dC(dL_dimage.at(x, y, 0), dL_dimage.at(x, y, 1), dL_dimage.at(x, y, 2));
                        if (dC.isZero(0.0))
                            continue;
                        detail::backward_pixel(splats, list, x + 0.5, y + 0.5, dC, cfg, taps, g.data(), gc);
                    }
            }
        }

        // Deterministic reduction in tile order.
        std::vector<SplatGrad> grads(splats.size());
        std::vector<Eigen::Matrix2d> dconic(splats.size(), Eigen::Matrix2d::Zero());
        for (int t = 0; t < n_tiles; ++t) {
            const auto& list = bins.lists[static_cast<std::size_t>(t)];
            const auto& g = tile_grads[static_cast<std::size_t>(t)];
            const auto& gc = tile_conic[static_cast<std::size_t>(t)];
            for (std::size_t k = 0; k < list.size(); ++k) {
                SplatGrad& dst = grads[list[k]];
                dst.mean2d += g[k].mean2d;
                dst.color += g[k].color;
                dst.alpha += g[k].alpha;
                dconic[list[k]] += gc[k];
            }
        }
        for (std::size_t i = 0; i < splats.size(); ++i)
            grads[i].cov2d = detail::conic_to_cov_grad(splats[i].conic, dconic[i]);
        return grads;
    }

    void project_backward(const GaussianCloud& cloud, const Camera& cam, std::span<const Splat2D> splats,
                          std::span<const SplatGrad> splat_grads, CloudGradients& grads, ScreenGradients* screen) {
        if (grads.params.size() != cloud.size())
            grads.params.resize(cloud.size(), Gaussian::zero());
        if (screen) {
            screen->grad.assign(cloud.size(), Eigen::Vector2d::Zero());
            screen->visible.assign(cloud.size(), 0);
        }
        const Eigen::Matrix3d W = cam.pose.rotation();

        for (std::size_t k = 0; k < splats.size(); ++k) {
            const Splat2D& s = splats[k];
            const SplatGrad& sg = splat_grads[k];
            const Gaussian& g = cloud.points[s.index];
            Gaussian& out = grads.params[s.index];
            const Eigen::Vector3d& p = s.cam_point;
            const double x = p.x(), y = p.y(), z = p.z();

            if (screen) {
                screen->grad[s.index] = Eigen::Vector2d(sg.mean2d.x() * 0.5 * cam.width, sg.mean2d.y() * 0.5 * cam.height);
                screen->visible[s.index] = 1;
            }

            // Opacity.
            out.opacity_logit += sg.alpha * s.alpha * (1.0 - s.alpha);

            // Color through the clamp and the SH evaluation.
            Eigen::Vector3d d_raw = sg.color;
            for (int c = 0; c < 3; ++c)
                if (s.color_clamped[static_cast<std::size_t>(c)])
                    d_raw[c] = 0.0;
            out.color += d_raw;
            Eigen::Vector3d dL_dmean = Eigen::Vector3d::Zero();
            if (cloud.sh_degree >= 1) {
                const Eigen::Vector3d& dir = s.view_dir;
                out.sh1[0] += -kSH1 * dir.y() * d_raw;
                out.sh1[1] += kSH1 * dir.z() * d_raw;
                out.sh1[2] += -kSH1 * dir.x() * d_raw;
                const Eigen::Vector3d dL_ddir(-kSH1 * d_raw.dot(g.sh1[2]), -kSH1 * d_raw.dot(g.sh1[0]),
                                              kSH1 * d_raw.dot(g.sh1[1]));
                const double vn = (g.position - cam.pose.center()).norm();
                if (vn > 0.0)
                    dL_dmean += (dL_ddir - dir * dir.dot(dL_ddir)) / vn;
            }

            // Screen-space mean.
            Eigen::Vector3d dL_dp(cam.fx / z * sg.mean2d.x(), cam.fy / z * sg.mean2d.y(),
                                  -cam.fx * x / (z * z) * sg.mean2d.x() - cam.fy * y / (z * z) * sg.mean2d.y());

            // Covariance: cov2 = M Sigma M^T with M = J W.
            const Eigen::Matrix2d Gc = 0.5 * (sg.cov2d + sg.cov2d.transpose());
            const auto pj = perspective_jacobian(cam, p);
            const Eigen::Matrix<double, 2, 3> M = pj.J * W;
            const Eigen::Matrix3d cov3 = build_covariance(g.rotation, g.log_scale);
            const Eigen::Matrix3d dL_dcov3 = M.transpose() * Gc * M;
            const Eigen::Matrix<double, 2, 3> dL_dM = 2.0 * Gc * M * cov3;
            const Eigen::Matrix<double, 2, 3> dL_dJ = dL_dM * W.transpose();

            const double z2 = z * z, z3 = z2 * z;
            // J00 = fx/z, J02 = -fx tx/z^2, J11 = fy/z, J12 = -fy ty/z^2 (tx, ty clamped)
            dL_dp.z() += -cam.fx / z2 * dL_dJ(0, 0) - cam.fy / z2 * dL_dJ(1, 1);
            if (!pj.clamped[0]) {
                dL_dp.x() += -cam.fx / z2 * dL_dJ(0, 2);
                dL_dp.z() += 2.0 * cam.fx * x / z3 * dL_dJ(0, 2);
            } else {
                const double tx = -pj.J(0, 2) * z2 / cam.fx;
                dL_dp.z() += cam.fx * tx / z3 * dL_dJ(0, 2);
            }
            if (!pj.clamped[1]) {
                dL_dp.y() += -cam.fy / z2 * dL_dJ(1, 2);
                dL_dp.z() += 2.0 * cam.fy * y / z3 * dL_dJ(1, 2);
            } else {
                const double ty = -pj.J(1, 2) * z2 / cam.fy;
                dL_dp.z() += cam.fy * ty / z3 * dL_dJ(1, 2);
            }
            dL_dmean += W.transpose() * dL_dp;
            out.position += dL_dmean;

            // Sigma = R D R^T, D = diag(exp(2 s)).
            const Eigen::Matrix3d R = quat_to_rotation(g.rotation);
            const Eigen::Vector3d D = (2.0 * g.log_scale).array().exp();
            const Eigen::Matrix3d Gs = 0.5 * (dL_dcov3 + dL_dcov3.transpose());
            const Eigen::Matrix3d RtGR = R.transpose() * Gs * R;
            for (int a = 0; a < 3; ++a)
                out.log_scale[a] += 2.0 * D[a] * RtGR(a, a);
            const Eigen::Matrix3d GR = 2.0 * Gs * R * D.asDiagonal();

            const Quat q = normalize_quat(g.rotation);
            const double qw = q[0], qx = q[1], qy = q[2], qz = q[3];
            Quat dq;
            dq[0] = 2.0 * (-qz * GR(0, 1) + qy * GR(0, 2) + qz * GR(1, 0) - qx * GR(1, 2) - qy * GR(2, 0) + qx * GR(2, 1));
            dq[1] = 2.0 * (qy * GR(0, 1) + qz * GR(0, 2) + qy * GR(1, 0) - 2.0 * qx * GR(1, 1) - qw * GR(1, 2) +
                           qz * GR(2, 0) + qw * GR(2, 1) - 2.0 * qx * GR(2, 2));
            dq[2] = 2.0 * (-2.0 * qy * GR(0, 0) + qx * GR(0, 1) + qw * GR(0, 2) + qx * GR(1, 0) + qz * GR(1, 2) -
                           qw * GR(2, 0) + qz * GR(2, 1) - 2.0 * qy * GR(2, 2));
            dq[3] = 2.0 * (-2.0 * qz * GR(0, 0) - qw * GR(0, 1) + qx * GR(0, 2) + qw * GR(1, 0) - 2.0 * qz * GR(1, 1) +
                           qy * GR(1, 2) + qx * GR(2, 0) + qy * GR(2, 1));
            // Through the normalization q / |q|.
            const double qn = g.rotation.norm();
            out.rotation += (dq - q * q.dot(dq)) / qn;
        }
    }

    Render render(const GaussianCloud& cloud, const Camera& cam, const RasterConfig& cfg) {
        Render r;
        r.splats = project(cloud, cam, cfg);
        r.output = rasterize(r.splats, cam.width, cam.height, cfg);
        return r;
    }

    void render_backward(const GaussianCloud& cloud, const Camera& cam, const Render& r, const ImageBuffer& dL_dimage,
                         const RasterConfig& cfg, CloudGradients& grads, ScreenGradients* screen) {
        const auto sg = rasterize_backward(r.splats, r.output, dL_dimage, cfg);
        project_backward(cloud, cam, r.splats, sg, grads, screen);
    }

} // namespace bootsplat
