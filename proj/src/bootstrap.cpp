#include "bootsplat/bootstrap.hpp"

#include "bootsplat/errors.hpp"
#include "bootsplat/losses.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace bootsplat {

    ViewMode parse_view_mode(const std::string& name) {
        if (name == "random")
            return ViewMode::Random;
        if (name == "consecutive")
            return ViewMode::Consecutive;
        if (name == "mixed")
            return ViewMode::Mixed;
        throw ConfigError("unknown view mode '" + name + "' (expected random, consecutive or mixed)");
    }

    std::string view_mode_name(ViewMode mode) {
        switch (mode) {
        case ViewMode::Random: return "random";
        case ViewMode::Consecutive: return "consecutive";
        case ViewMode::Mixed: return "mixed";
        }
        return "random";
    }

    void ViewVariantPolicy::validate() const {
        if (qvec_noise_scale < 0.0 || tvec_noise_scale < 0.0)
            throw ConfigError("view policy: noise scales must be non-negative");
        if (variants_per_camera < 1)
            throw ConfigError("view policy: variants_per_camera must be at least 1");
    }

    int BootstrapSchedule::interval_index(int64_t iteration) const {
        for (std::size_t i = 0; i < interval_starts.size(); ++i) {
            const int64_t s = interval_starts[i];
            if (iteration >= s && iteration < s + interval_length)
                return static_cast<int>(i);
        }
        return -1;
    }

    double BootstrapSchedule::lambda_at(int64_t iteration) const {
        const int idx = interval_index(iteration);
        if (idx < 0)
            return 0.0;
        const int64_t offset = iteration - interval_starts[static_cast<std::size_t>(idx)];
        return offset < lambda_switch ? lambda_first : lambda_second;
    }

    double BootstrapSchedule::strength_for_interval(int index) const {
        const std::size_t n = interval_starts.size();
        if (n <= 1)
            return s_r_start;
        const double f = static_cast<double>(std::clamp<int>(index, 0, static_cast<int>(n) - 1)) / static_cast<double>(n - 1);
        return s_r_start + f * (s_r_end - s_r_start);
    }

    void BootstrapSchedule::validate() const {
        if (interval_length <= 0)
            throw ConfigError("bootstrap schedule: interval length must be positive");
        for (std::size_t i = 0; i < interval_starts.size(); ++i) {
            if (interval_starts[i] < 0)
                throw ConfigError("bootstrap schedule: negative interval start");
            if (i > 0 && interval_starts[i] < interval_starts[i - 1] + interval_length)
                throw ConfigError("bootstrap schedule: intervals must be sorted and non-overlapping");
        }
        for (double l : {lambda_first, lambda_second})
            if (l < 0.0 || l >= 1.0)
                throw ConfigError("bootstrap schedule: lambda_boot must lie in [0,1)");
        for (double s : {s_r_start, s_r_end})
            if (s < 0.0 || s > 1.0)
                throw ConfigError("bootstrap schedule: s_r must lie in [0,1]");
        if (lambda_switch < 0 || sampler_steps < 1)
            throw ConfigError("bootstrap schedule: invalid lambda switch or sampler steps");
    }

    Camera perturb_random(const Camera& cam, const ViewVariantPolicy& policy, std::mt19937_64& rng) {
        std::normal_distribution<double> normal(0.0, 1.0);
        Camera out = cam;
        for (int i = 0; i < 4; ++i)
            out.pose.qvec[i] += policy.qvec_noise_scale * normal(rng);
        for (int i = 0; i < 3; ++i)
            out.pose.tvec[i] += policy.tvec_noise_scale * normal(rng);
        out.pose.qvec = normalize_quat(out.pose.qvec);
        return out;
    }

    Camera interpolate_pose(const Camera& from, const Camera& toward, double fraction) {
        Camera out = from;
        Quat q1 = toward.pose.qvec;
        if (from.pose.qvec.dot(q1) < 0.0)
            q1 = -q1; // shortest arc
        out.pose.qvec = normalize_quat((1.0 - fraction) * from.pose.qvec + fraction * q1);
        out.pose.tvec = (1.0 - fraction) * from.pose.tvec + fraction * toward.pose.tvec;
        return out;
    }

    Camera perturb_camera(const Camera& cam, const Camera* toward, int k, int count, ViewMode mode,
                          const ViewVariantPolicy& policy, std::mt19937_64& rng) {
        const bool consecutive = mode == ViewMode::Consecutive || (mode == ViewMode::Mixed && k % 2 == 1);
        if (consecutive && toward) {
            const int slots = mode == ViewMode::Mixed ? (count + 1) / 2 : count;
            const int slot = mode == ViewMode::Mixed ? k / 2 : k;
            return interpolate_pose(cam, *toward, static_cast<double>(slot + 1) / static_cast<double>(slots + 1));
        }
        return perturb_random(cam, policy, rng);
    }

    std::vector<std::size_t> trajectory_order(std::span<const Camera> cameras) {
        std::vector<std::size_t> order(cameras.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return cameras[a].image_name < cameras[b].image_name; });
        return order;
    }

    BootstrapBatch build_batch(std::size_t anchor, std::span<const Camera> cameras, std::span<const std::size_t> trajectory,
                               const ViewVariantPolicy& policy, std::mt19937_64& rng) {
        policy.validate();
        const auto it = std::find(trajectory.begin(), trajectory.end(), anchor);
        if (it == trajectory.end())
            throw std::invalid_argument("build_batch: anchor not in trajectory");
        const std::size_t pos = static_cast<std::size_t>(it - trajectory.begin());

        BootstrapBatch batch;
        batch.anchor = anchor;
        if (pos > 0)
            batch.neighbors.push_back(trajectory[pos - 1]);
        if (pos + 1 < trajectory.size())
            batch.neighbors.push_back(trajectory[pos + 1]);

        // Consecutive views head to the next camera on the trajectory; the last
        // camera heads back to its predecessor instead.
        auto toward_of = [&](std::size_t cam) -> const Camera* {
            const std::size_t p = static_cast<std::size_t>(std::find(trajectory.begin(), trajectory.end(), cam) - trajectory.begin());
            if (p + 1 < trajectory.size())
                return &cameras[trajectory[p + 1]];
            if (p > 0)
                return &cameras[trajectory[p - 1]];
            return nullptr;
        };

        std::vector<std::size_t> sources{anchor};
        sources.insert(sources.end(), batch.neighbors.begin(), batch.neighbors.end());
        for (std::size_t src : sources) {
            const Camera* toward = toward_of(src);
            for (int k = 0; k < policy.variants_per_camera; ++k) {
                BootstrapVariant v;
                v.source = src;
                v.view = perturb_camera(cameras[src], toward, k, policy.variants_per_camera, policy.mode, policy, rng);
                batch.variants.push_back(std::move(v));
            }
        }
        return batch;
    }

    double combine_bootstrap_loss(double lo, std::span<const double> lb, double lambda) {
        if (lambda == 0.0 || lb.empty())
            return lo;
        double sum = 0.0;
        for (double v : lb)
            sum += v;
        return (1.0 - lambda) * lo + lambda / static_cast<double>(lb.size()) * sum;
    }

    namespace {
        void scale_in_place(ImageBuffer& img, double s) {
            for (auto& v : img.data)
                v *= s;
        }
    } // namespace

    BootstrapStep bootstrap_step(const GaussianCloud& cloud, const Camera& cam, const ImageBuffer& ground_truth,
                                 const BootstrapBatch* batch, double lambda, double lambda_dssim, const RasterConfig& raster,
                                 CloudGradients& grads) {
        BootstrapStep step;
        const Render r = render(cloud, cam, raster);
        LossValue lo = photometric_loss(r.output.image, ground_truth, lambda_dssim);
        step.lo = lo.value;

        const bool use_boot = lambda != 0.0 && batch && !batch->failed && !batch->variants.empty();
        if (!use_boot) {
            step.loss = lo.value;
            step.screen.emplace_back();
            render_backward(cloud, cam, r, lo.grad, raster, grads, &step.screen.back());
            return step;
        }

        scale_in_place(lo.grad, 1.0 - lambda);
        step.screen.emplace_back();
        render_backward(cloud, cam, r, lo.grad, raster, grads, &step.screen.back());

        const double w = lambda / static_cast<double>(batch->variants.size());
        for (const auto& v : batch->variants) {
            const Render rv = render(cloud, v.view, raster);
            LossValue lb = l1_loss(rv.output.image, v.target);
            step.lb.push_back(lb.value);
            scale_in_place(lb.grad, w);
            step.screen.emplace_back();
            render_backward(cloud, v.view, rv, lb.grad, raster, grads, &step.screen.back());
        }
        step.loss = combine_bootstrap_loss(step.lo, step.lb, lambda);
        return step;
    }

    void average_overlapping_targets(BootstrapBatch& batch, std::span<const std::vector<double>> depths,
                                     std::span<const std::vector<double>> alphas, double depth_tolerance) {
        const std::size_t n = batch.variants.size();
        if (depths.size() != n || alphas.size() != n)
            throw std::invalid_argument("average_overlapping_targets: one depth and alpha map per variant required");

        std::vector<ImageBuffer> original;
        original.reserve(n);
        for (const auto& v : batch.variants)
            original.push_back(v.target);

        batch.overlap_counts.assign(n, {});
        for (std::size_t i = 0; i < n; ++i) {
            const Camera& ci = batch.variants[i].view;
            const Eigen::Matrix3d Ri_t = ci.pose.rotation().transpose();
            auto& counts = batch.overlap_counts[i];
            counts.assign(original[i].pixel_count(), 1.0);
            ImageBuffer averaged = original[i];

            for (int y = 0; y < ci.height; ++y)
                for (int x = 0; x < ci.width; ++x) {
                    const std::size_t p = static_cast<std::size_t>(y) * static_cast<std::size_t>(ci.width) + static_cast<std::size_t>(x);
                    const double z = depths[i][p];
                    if (alphas[i][p] < 0.5 || z <= 0.0)
                        continue;
                    const Eigen::Vector3d pc((x + 0.5 - ci.cx) / ci.fx * z, (y + 0.5 - ci.cy) / ci.fy * z, z);
                    const Eigen::Vector3d world = Ri_t * (pc - ci.pose.tvec);

                    Eigen::Vector3d sum(averaged.at(x, y, 0), averaged.at(x, y, 1), averaged.at(x, y, 2));
                    double count = 1.0;
                    for (std::size_t j = 0; j < n; ++j) {
                        if (j == i)
                            continue;
                        const Camera& cj = batch.variants[j].view;
                        const Eigen::Vector3d q = cj.to_camera(world);
                        if (q.z() <= 1e-9)
                            continue;
                        const double u = cj.fx * q.x() / q.z() + cj.cx;
                        const double v = cj.fy * q.y() / q.z() + cj.cy;
                        const int qx = static_cast<int>(std::floor(u));
                        const int qy = static_cast<int>(std::floor(v));
                        if (qx < 0 || qy < 0 || qx >= cj.width || qy >= cj.height)
                            continue;
                        const std::size_t qp = static_cast<std::size_t>(qy) * static_cast<std::size_t>(cj.width) + static_cast<std::size_t>(qx);
                        if (alphas[j][qp] < 0.5 || std::abs(depths[j][qp] - q.z()) > depth_tolerance * q.z())
                            continue;
                        for (int c = 0; c < 3; ++c)
                            sum[c] += original[j].at(qx, qy, c);
                        count += 1.0;
                    }
                    counts[p] = count;
                    for (int c = 0; c < 3; ++c)
                        averaged.at(x, y, c) = sum[c] / count;
                }
            batch.variants[i].target = std::move(averaged);
        }
    }

    ImageBuffer ViewRegenerator::upscale4x(const ImageBuffer& image, const diffusion::RegenRequest&) {
        return resize_bicubic(image, image.width * 4, image.height * 4);
    }

    DiffusionRegenerator::DiffusionRegenerator(std::unique_ptr<diffusion::NoisePredictor> predictor,
                                               diffusion::DiffusionSchedule schedule)
        : predictor_(std::move(predictor)),
          schedule_(std::move(schedule)) {
        if (!predictor_)
            throw std::invalid_argument("DiffusionRegenerator: null predictor");
    }

    ImageBuffer DiffusionRegenerator::regenerate(const diffusion::RegenRequest& req, const Camera&) {
        return diffusion::regenerate(req, *predictor_, schedule_);
    }

    GroundTruthRegenerator::GroundTruthRegenerator(GaussianCloud reference, RasterConfig raster)
        : reference_(std::move(reference)),
          raster_(raster) {}

    ImageBuffer GroundTruthRegenerator::regenerate(const diffusion::RegenRequest&, const Camera& view) {
        return render(reference_, view, raster_).output.image;
    }

    ImageBuffer upscale_regenerate(const ImageBuffer& image, const diffusion::RegenRequest& req, const Camera& view,
                                   ViewRegenerator& regen, const UpscaleConfig& cfg) {
        diffusion::RegenRequest r = req;
        r.image = image;
        ImageBuffer x = regen.regenerate(r, view);
        x = gaussian_blur(x, cfg.blur_sigma);
        const int sw = std::max(1, static_cast<int>(std::lround(static_cast<double>(image.width) / cfg.downscale)));
        const int sh = std::max(1, static_cast<int>(std::lround(static_cast<double>(image.height) / cfg.downscale)));
        x = resize_bilinear(x, sw, sh);
        x = regen.upscale4x(x, r);
        if (x.width != image.width || x.height != image.height)
            x = resize_bilinear(x, image.width, image.height);
        clamp01(x);
        return x;
    }

    void assemble_n8_batch(BootstrapBatch& batch, const UpscaleConfig& cfg, bool upscale_active) {
        if (!cfg.enabled || !upscale_active || cfg.extra_targets <= 0)
            return;
        std::vector<BootstrapVariant> anchor_views;
        for (const auto& v : batch.variants)
            if (v.source == batch.anchor && !v.upscale)
                anchor_views.push_back(v);
        if (anchor_views.empty())
            return;
        for (int k = 0; k < cfg.extra_targets; ++k) {
            BootstrapVariant v = anchor_views[static_cast<std::size_t>(k) % anchor_views.size()];
            v.upscale = true;
            v.target = {};
            v.rendered = {};
            batch.variants.push_back(std::move(v));
        }
    }

    IntervalCache build_interval_cache(const GaussianCloud& cloud, std::span<const Camera> cameras, int interval,
                                       int64_t start_iteration, double strength, const CacheOptions& options,
                                       ViewRegenerator& regen) {
        IntervalCache cache;
        cache.interval = interval;
        cache.start_iteration = start_iteration;
        cache.strength = strength;
        const auto trajectory = trajectory_order(cameras);
        const bool upscale_active = options.upscale.active(start_iteration);

        for (std::size_t anchor = 0; anchor < cameras.size(); ++anchor) {
            std::seed_seq seq{static_cast<uint32_t>(options.policy.seed), static_cast<uint32_t>(options.policy.seed >> 32),
                              static_cast<uint32_t>(interval), static_cast<uint32_t>(anchor)};
            std::mt19937_64 rng(seq);
            BootstrapBatch batch = build_batch(anchor, cameras, trajectory, options.policy, rng);
            assemble_n8_batch(batch, options.upscale, upscale_active);

            std::vector<std::vector<double>> depths, alphas;
            try {
                for (auto& v : batch.variants) {
                    Render r = render(cloud, v.view, options.raster);
                    v.rendered = std::move(r.output.image);
                    depths.push_back(std::move(r.output.depth));
                    alphas.push_back(std::move(r.output.alpha));

                    diffusion::RegenRequest req;
                    req.image = v.rendered;
                    req.strength = strength;
                    req.steps = options.sampler_steps;
                    req.seed = rng();
                    ImageBuffer target = v.upscale ? upscale_regenerate(v.rendered, req, v.view, regen, options.upscale)
                                                   : regen.regenerate(req, v.view);
                    if (!target.same_shape(v.rendered))
                        target = resize_bilinear(target, v.rendered.width, v.rendered.height);
                    v.target = std::move(target);
                    ++cache.regenerations;
                }
                if (options.overlap_averaging)
                    average_overlapping_targets(batch, depths, alphas);
            } catch (const PredictorFailure& e) {
                spdlog::warn("bootstrap interval {}: regeneration failed for camera {} ({}), using the original loss",
                             interval, cameras[anchor].image_name, e.what());
                batch.failed = true;
                ++cache.failures;
            }
            cache.batches.push_back(std::move(batch));
        }
        return cache;
    }

} // namespace bootsplat
