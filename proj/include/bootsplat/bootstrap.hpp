#pragma once

#include "bootsplat/camera.hpp"
#include "bootsplat/diffusion.hpp"
#include "bootsplat/gaussian.hpp"
#include "bootsplat/image.hpp"
#include "bootsplat/rasterizer.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace bootsplat {

    enum class ViewMode { Random, Consecutive, Mixed };

    ViewMode parse_view_mode(const std::string& name);
    std::string view_mode_name(ViewMode mode);

    struct ViewVariantPolicy {
        ViewMode mode = ViewMode::Random;
        double qvec_noise_scale = 0.1;
        double tvec_noise_scale = 0.2;
        int variants_per_camera = 2;
        uint64_t seed = 0;

        void validate() const;
    };

    struct BootstrapSchedule {
        std::vector<int64_t> interval_starts{6000, 9000, 15000, 18000, 21000, 24000, 27000, 29000};
        int64_t interval_length = 1000;
        /// lambda_first for the first `lambda_switch` iterations of an interval,
        /// lambda_second afterwards.
        double lambda_first = 0.15;
        double lambda_second = 0.05;
        int64_t lambda_switch = 500;
        /// Strength ramps linearly over interval indices from s_r_start to s_r_end.
        double s_r_start = 0.05;
        double s_r_end = 0.01;
        int sampler_steps = 100;

        /// Index of the interval containing `iteration`, or -1.
        int interval_index(int64_t iteration) const;
        bool active(int64_t iteration) const { return interval_index(iteration) >= 0; }
        /// 0 outside every interval.
        double lambda_at(int64_t iteration) const;
        double strength_for_interval(int index) const;
        void validate() const;
    };

    /// Random: jitter qvec and tvec with scaled normal noise. Consecutive:
    /// interpolate toward `toward` at `fraction`. qvec is renormalized either way.
    Camera perturb_random(const Camera& cam, const ViewVariantPolicy& policy, std::mt19937_64& rng);
    Camera interpolate_pose(const Camera& from, const Camera& toward, double fraction);

    /// Variant `k` of `count` for `cam`. Consecutive places variants at
    /// fractions (k+1)/(count+1) toward `toward`; Mixed alternates Random (even
    /// k) and Consecutive (odd k). Without a `toward` camera, Consecutive falls
    /// back to Random.
    Camera perturb_camera(const Camera& cam, const Camera* toward, int k, int count, ViewMode mode,
                          const ViewVariantPolicy& policy, std::mt19937_64& rng);

    /// Camera indices sorted by image name.
    std::vector<std::size_t> trajectory_order(std::span<const Camera> cameras);

    struct BootstrapVariant {
        std::size_t source = 0; // camera the view was derived from
        Camera view;
        ImageBuffer rendered;   // I_n at cache time
        ImageBuffer target;     // I_d
        bool upscale = false;
    };

    struct BootstrapBatch {
        std::size_t anchor = 0;
        std::vector<std::size_t> neighbors;
        std::vector<BootstrapVariant> variants;
        /// Per variant, per pixel: number of views averaged into the target.
        std::vector<std::vector<double>> overlap_counts;
        bool failed = false;

        std::size_t size() const { return variants.size(); }
    };

    /// Anchor plus its trajectory neighbours (one on each side when present),
    /// `variants_per_camera` perturbed views each. Targets are left empty.
    BootstrapBatch build_batch(std::size_t anchor, std::span<const Camera> cameras, std::span<const std::size_t> trajectory,
                               const ViewVariantPolicy& policy, std::mt19937_64& rng);

    /// (1 - lambda) L_o + lambda / N sum L_b
    double combine_bootstrap_loss(double lo, std::span<const double> lb, double lambda);

    /// Hybrid objective for one training step. When lambda is 0 or the
    /// batch is missing the bootstrap terms are skipped entirely, so the result
    /// (and its gradients) match plain training bit for bit.
    struct BootstrapStep {
        double loss = 0.0;
        double lo = 0.0;
        std::vector<double> lb;
        std::vector<ScreenGradients> screen; // one per render
    };
    BootstrapStep bootstrap_step(const GaussianCloud& cloud, const Camera& cam, const ImageBuffer& ground_truth,
                                 const BootstrapBatch* batch, double lambda, double lambda_dssim, const RasterConfig& raster,
                                 CloudGradients& grads);

    /// Where variant views see the same surface (depth-tested reprojection),
    /// replace each target by the mean of the overlapping targets.
    /// `depths` and `alphas` are the per-pixel maps of each variant's render.
    void average_overlapping_targets(BootstrapBatch& batch, std::span<const std::vector<double>> depths,
                                     std::span<const std::vector<double>> alphas, double depth_tolerance = 0.05);

    /// Produces I_d for one perturbed view.
    class ViewRegenerator {
    public:
        virtual ~ViewRegenerator() = default;
        virtual ImageBuffer regenerate(const diffusion::RegenRequest& req, const Camera& view) = 0;
        /// x4 upscaling step of the upscale path; bicubic unless overridden.
        virtual ImageBuffer upscale4x(const ImageBuffer& image, const diffusion::RegenRequest& req);
        virtual std::string name() const = 0;
    };

    /// Local pixel-space diffusion with a pluggable noise predictor.
    class DiffusionRegenerator final : public ViewRegenerator {
    public:
        DiffusionRegenerator(std::unique_ptr<diffusion::NoisePredictor> predictor, diffusion::DiffusionSchedule schedule);
        ImageBuffer regenerate(const diffusion::RegenRequest& req, const Camera& view) override;
        std::string name() const override { return "diffusion"; }

    private:
        std::unique_ptr<diffusion::NoisePredictor> predictor_;
        diffusion::DiffusionSchedule schedule_;
    };

    /// Renders a reference cloud at the requested view; an upper bound on what
    /// any regenerator could supply.
    class GroundTruthRegenerator final : public ViewRegenerator {
    public:
        GroundTruthRegenerator(GaussianCloud reference, RasterConfig raster);
        ImageBuffer regenerate(const diffusion::RegenRequest& req, const Camera& view) override;
        std::string name() const override { return "ground_truth"; }

    private:
        GaussianCloud reference_;
        RasterConfig raster_;
    };

    struct UpscaleConfig {
        bool enabled = false;
        int64_t iter_begin = 6000;
        int64_t iter_end = 18000; // inclusive
        double blur_sigma = 3.0;
        int downscale = 3;
        int upscale = 4;
        int extra_targets = 2;

        bool active(int64_t iteration) const { return enabled && iteration >= iter_begin && iteration <= iter_end; }
    };

    /// regenerate -> blur -> downscale -> x4 upscale -> resize to input size.
    ImageBuffer upscale_regenerate(const ImageBuffer& image, const diffusion::RegenRequest& req, const Camera& view,
                                   ViewRegenerator& regen, const UpscaleConfig& cfg = {});

    /// Appends `cfg.extra_targets` upscale-path variants cloned from the
    /// anchor's own views (N=6 becomes 8). No-op when upscale is off.
    void assemble_n8_batch(BootstrapBatch& batch, const UpscaleConfig& cfg, bool upscale_active);

    struct CacheOptions {
        ViewVariantPolicy policy;
        UpscaleConfig upscale;
        bool overlap_averaging = false;
        int sampler_steps = 100;
        RasterConfig raster;
    };

    struct IntervalCache {
        int interval = -1;
        int64_t start_iteration = 0;
        double strength = 0.0;
        std::vector<BootstrapBatch> batches; // indexed by camera
        std::size_t regenerations = 0;
        std::size_t failures = 0;
    };

    /// Renders and regenerates every camera's batch for one interval. A
    /// PredictorFailure marks that batch failed and training uses L_o for it.
    IntervalCache build_interval_cache(const GaussianCloud& cloud, std::span<const Camera> cameras, int interval,
                                       int64_t start_iteration, double strength, const CacheOptions& options,
                                       ViewRegenerator& regen);

} // namespace bootsplat
