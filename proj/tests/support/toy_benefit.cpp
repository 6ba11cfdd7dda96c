#include "support/toy_benefit.hpp"

#include "bootsplat/trainer.hpp"

#include <chrono>

namespace bootsplat::oracle {

    TrainConfig toy_train_config(uint64_t seed, bool bootstrapped) {
        TrainConfig cfg = preset(bootstrapped ? "v1" : "baseline");
        cfg.iterations = 4000;
        cfg.seed = seed;
        cfg.eval_iterations.clear();
        cfg.checkpoint_iterations.clear();
        cfg.sh_degree = 0;
        apply_json(cfg, R"({
            "densify": {"densify_until": 2500, "split_scale_threshold": 0.15, "clone_grad_threshold": 0.0005},
            "bootstrap": {
                "intervals": [500, 1000, 1500, 2000, 2500, 3000, 3500],
                "interval_length": 500,
                "lambda_switch": 250,
                "lambda_boot_schedule": [0.4, 0.25],
                "mode": "consecutive",
                "variants_per_camera": 1
            }
        })");
        if (!bootstrapped)
            cfg.bootstrap.schedule.interval_starts.clear();
        return cfg;
    }

    ToyBenefit run_toy_benefit(uint64_t seed) {
        const auto t0 = std::chrono::steady_clock::now();
        ToySceneOptions opts;
        opts.seed = seed;
        const ToyScene toy = make_toy_scene(opts);

        ToyBenefit out;
        {
            Trainer trainer(toy_train_config(seed, false), toy.scene);
            out.baseline_psnr = trainer.run().reports.back().psnr;
        }
        {
            GroundTruthRegenerator regen(toy.reference, toy.raster);
            Trainer trainer(toy_train_config(seed, true), toy.scene, &regen);
            const TrainResult r = trainer.run();
            out.bootstrapped_psnr = r.reports.back().psnr;
            out.regenerations = r.regenerations;
        }
        out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return out;
    }

} // namespace bootsplat::oracle
