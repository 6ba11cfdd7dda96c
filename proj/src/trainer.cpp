#include "bootsplat/trainer.hpp"

#include "bootsplat/densify.hpp"
#include "bootsplat/errors.hpp"
#include "bootsplat/image_io.hpp"
#include "bootsplat/losses.hpp"
#include "bootsplat/optimizer.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <random>

namespace bootsplat {

    std::unique_ptr<ViewRegenerator> make_regenerator(const BootstrapConfig& cfg) {
        if (cfg.predictor == "remote")
            return std::make_unique<RemoteRegenerator>(cfg.service);
        auto schedule = diffusion::DiffusionSchedule::linear(1000, 1e-4, 2e-2, cfg.schedule.sampler_steps, 0.0);
        std::unique_ptr<diffusion::NoisePredictor> predictor;
        if (cfg.predictor == "zero")
            predictor = std::make_unique<diffusion::ZeroPredictor>();
        else if (cfg.predictor == "heuristic")
            predictor = std::make_unique<diffusion::BlurSharpenHeuristic>();
        else
            throw ConfigError("unknown predictor '" + cfg.predictor + "'");
        return std::make_unique<DiffusionRegenerator>(std::move(predictor), std::move(schedule));
    }

    MetricReport evaluate(const GaussianCloud& cloud, const std::vector<Camera>& cameras,
                          const std::vector<ImageBuffer>& images, const RasterConfig& raster, const std::string& scene,
                          uint64_t iteration, const std::filesystem::path* render_dir) {
        std::vector<ImageMetric> per_image;
        for (std::size_t i = 0; i < cameras.size(); ++i) {
            ImageBuffer img = render(cloud, cameras[i], raster).output.image;
            clamp01(img);
            per_image.push_back({cameras[i].image_name, psnr(img, images[i]), ssim(img, images[i])});
            if (render_dir)
                save_image(img, *render_dir / cameras[i].image_name);
        }
        return summarize(scene, iteration, std::move(per_image));
    }

    Trainer::Trainer(TrainConfig cfg, const Scene& scene, ViewRegenerator* regen)
        : cfg_(std::move(cfg)),
          scene_(scene),
          regen_(regen) {
        cfg_.validate();
        if (scene_.train_cameras.empty())
            throw SceneError("scene has no training cameras");
        if (scene_.train_images.size() != scene_.train_cameras.size() ||
            scene_.test_images.size() != scene_.test_cameras.size())
            throw SceneError("scene images and cameras are out of step");
    }

    namespace {

        bool listed(const std::vector<int64_t>& its, int64_t it) {
            return std::find(its.begin(), its.end(), it) != its.end();
        }

        bool bootstrap_needed(const TrainConfig& cfg) {
            const auto& b = cfg.bootstrap;
            return b.enabled && !b.schedule.interval_starts.empty() &&
                   (b.schedule.lambda_first > 0.0 || b.schedule.lambda_second > 0.0);
        }

        void write_text(const std::filesystem::path& path, const std::string& text) {
            std::filesystem::create_directories(path.parent_path());
            std::ofstream out(path, std::ios::binary);
            out << text << '\n';
            if (!out)
                throw std::runtime_error("cannot write " + path.string());
        }

        uint64_t mix_seed(uint64_t seed, uint64_t stream) {
            std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), static_cast<uint32_t>(stream)};
            std::mt19937_64 rng(seq);
            return rng();
        }

    } // namespace

    TrainResult Trainer::run(const std::optional<std::filesystem::path>& out_dir) {
        namespace fs = std::filesystem;
        TrainResult result;
        const auto& sched = cfg_.bootstrap.schedule;
        const bool use_bootstrap = bootstrap_needed(cfg_);

        if (out_dir)
            write_text(*out_dir / "config.json", to_json(cfg_));

        if (cfg_.dry_run) {
            int last_interval = -1;
            double last_lambda = 0.0;
            for (int64_t it = 1; it <= cfg_.iterations; ++it) {
                const int idx = use_bootstrap ? sched.interval_index(it) : -1;
                if (idx < 0) {
                    last_interval = -1;
                    continue;
                }
                const double lambda = sched.lambda_at(it);
                const double strength = sched.strength_for_interval(idx);
                if (idx != last_interval)
                    spdlog::info("[dry-run] iteration {}: bootstrap interval {} begins (s_r={:.4f}, lambda={:.2f})", it, idx,
                                 strength, lambda);
                else if (lambda != last_lambda)
                    spdlog::info("[dry-run] iteration {}: lambda_boot -> {:.2f}", it, lambda);
                spdlog::trace("[dry-run] iteration {} bootstrap interval={} lambda={} s_r={}", it, idx, lambda, strength);
                result.activity.push_back({it, idx, lambda, strength});
                last_interval = idx;
                last_lambda = lambda;
            }
            return result;
        }

        if (use_bootstrap && !regen_) {
            owned_regen_ = make_regenerator(cfg_.bootstrap);
            regen_ = owned_regen_.get();
        }

        const auto& cams = scene_.train_cameras;
        const auto& images = scene_.train_images;

        GaussianCloud cloud = init_from_sfm(scene_.points);
        cloud.sh_degree = 0;
        Adam adam(cloud.size());
        std::vector<GradAccumulator> acc(cloud.size());

        LearningRates lr = cfg_.lr;
        lr.spatial_scale = scene_.extent;
        DensifyConfig dcfg = cfg_.densify;
        dcfg.split_scale_threshold = cfg_.split_scale_threshold.value_or(0.01 * scene_.extent);

        std::mt19937_64 order_rng(cfg_.seed);
        std::mt19937_64 densify_rng(mix_seed(cfg_.seed, 1));
        CacheOptions cache_opts;
        cache_opts.policy = cfg_.bootstrap.policy;
        cache_opts.policy.seed = mix_seed(cfg_.seed, 2);
        cache_opts.upscale = cfg_.bootstrap.upscale;
        cache_opts.overlap_averaging = cfg_.bootstrap.overlap_averaging;
        cache_opts.sampler_steps = sched.sampler_steps;
        cache_opts.raster = cfg_.raster;

        std::optional<IntervalCache> cache;
        std::vector<std::size_t> stack;

        auto write_outputs = [&](int64_t it) {
            const bool ckpt = listed(cfg_.checkpoint_iterations, it) || it == cfg_.iterations;
            const bool eval = listed(cfg_.eval_iterations, it) || it == cfg_.iterations;
            if (ckpt && out_dir)
                save_checkpoint(cloud, static_cast<uint64_t>(it), *out_dir / "checkpoints" / ("iter_" + std::to_string(it) + ".bspl"));
            if (!eval)
                return;
            const bool has_test = !scene_.test_cameras.empty();
            const auto& ecams = has_test ? scene_.test_cameras : scene_.train_cameras;
            const auto& eimgs = has_test ? scene_.test_images : scene_.train_images;
            std::optional<fs::path> render_dir;
            if (out_dir && cfg_.save_eval_renders) {
                render_dir = *out_dir / "renders" / ("iter_" + std::to_string(it));
                fs::create_directories(*render_dir);
            }
            MetricReport rep = evaluate(cloud, ecams, eimgs, cfg_.raster, scene_.name, static_cast<uint64_t>(it),
                                        render_dir ? &*render_dir : nullptr);
            spdlog::info("iteration {}: {} PSNR {:.3f} dB, SSIM {:.4f} over {} views", it, has_test ? "test" : "train",
                         rep.psnr, rep.ssim, rep.per_image.size());
            if (out_dir)
                write_text(*out_dir / "metrics" / ("eval_" + std::to_string(it) + ".json"), rep.to_json());
            result.reports.push_back(std::move(rep));
        };

        for (int64_t it = 1; it <= cfg_.iterations; ++it) {
            if (cfg_.sh_degree > cloud.sh_degree && it % cfg_.sh_increase_interval == 0)
                cloud.sh_degree = std::min(cloud.sh_degree + 1, cfg_.sh_degree);

            double lambda = 0.0;
            if (use_bootstrap) {
                const int idx = sched.interval_index(it);
                if (idx < 0) {
                    cache.reset();
                } else {
                    if (!cache || cache->interval != idx) {
                        const double strength = sched.strength_for_interval(idx);
                        cache = build_interval_cache(cloud, cams, idx, it, strength, cache_opts, *regen_);
                        result.regenerations += cache->regenerations;
                        result.regeneration_failures += cache->failures;
                        spdlog::info("iteration {}: bootstrap interval {} (s_r={:.4f}) regenerated {} views with {}, {} failed batches",
                                     it, idx, strength, cache->regenerations, regen_->name(), cache->failures);
                        if (cache->failures > 0 && !cfg_.bootstrap.allow_fallback)
                            throw PredictorFailure("regeneration failed for " + std::to_string(cache->failures) +
                                                   " batches and fallback is disabled");
                    }
                    lambda = sched.lambda_at(it);
                    result.activity.push_back({it, idx, lambda, cache->strength});
                }
            }

            if (stack.empty()) {
                stack.resize(cams.size());
                for (std::size_t i = 0; i < stack.size(); ++i)
                    stack[i] = i;
                std::shuffle(stack.begin(), stack.end(), order_rng);
            }
            const std::size_t ci = stack.back();
            stack.pop_back();

            CloudGradients grads(cloud.size());
            const BootstrapBatch* batch = cache ? &cache->batches[ci] : nullptr;
            const BootstrapStep step = bootstrap_step(cloud, cams[ci], images[ci], batch, lambda, cfg_.lambda_dssim,
                                                      cfg_.raster, grads);
            result.final_loss = step.loss;

            const bool densify_window = cfg_.densify_enabled && it <= dcfg.densify_until;
            if (densify_window) {
                // One observation per iteration: the screen gradients of all
                // renders in this step are summed first, so bootstrap views do
                // not dilute the per-view magnitude statistics.
                for (std::size_t i = 0; i < cloud.size(); ++i) {
                    Eigen::Vector2d g = Eigen::Vector2d::Zero();
                    bool seen = false;
                    for (const auto& screen : step.screen)
                        if (screen.visible[i]) {
                            g += screen.grad[i];
                            seen = true;
                        }
                    if (seen)
                        acc[i].accumulate(g);
                    acc[i].position_grad_sum += grads.params[i].position;
                }
            }

            adam.step(cloud, grads, lr, it);

            if (densify_window && it >= dcfg.densify_from && it % dcfg.densify_interval == 0) {
                const auto actions = densify_decision(acc, cloud, dcfg);
                const DensifyStats st = apply_actions(cloud, acc, &adam, actions, dcfg, densify_rng);
                spdlog::debug("iteration {}: densify +{} clones +{} splits -{} prunes -> {} points", it, st.clones, st.splits,
                              st.prunes, cloud.size());
                if (cloud.empty())
                    throw EmptySceneError("densification pruned every Gaussian");
            }
            if (densify_window && it % dcfg.opacity_reset_interval == 0)
                reset_opacity(cloud, dcfg.reset_opacity_value);

            if (it % 1000 == 0)
                spdlog::info("iteration {}: loss {:.5f}, {} Gaussians", it, step.loss, cloud.size());
            write_outputs(it);
        }
        if (cfg_.iterations == 0)
            write_outputs(0);

        result.cloud = std::move(cloud);
        return result;
    }

} // namespace bootsplat
