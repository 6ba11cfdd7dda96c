#pragma once

#include "bootsplat/bootstrap.hpp"
#include "bootsplat/config.hpp"
#include "bootsplat/gaussian.hpp"
#include "bootsplat/metrics.hpp"
#include "bootsplat/scene.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace bootsplat {

    /// One iteration during which bootstrap terms were in effect.
    struct BootstrapActivity {
        int64_t iteration = 0;
        int interval = -1;
        double lambda = 0.0;
        double strength = 0.0;
    };

    struct TrainResult {
        GaussianCloud cloud;
        std::vector<MetricReport> reports;
        std::vector<BootstrapActivity> activity;
        std::size_t regenerations = 0;
        std::size_t regeneration_failures = 0;
        double final_loss = 0.0;
    };

    /// Builds the regenerator named by cfg.predictor.
    std::unique_ptr<ViewRegenerator> make_regenerator(const BootstrapConfig& cfg);

    /// Renders every camera and scores it against its image.
    MetricReport evaluate(const GaussianCloud& cloud, const std::vector<Camera>& cameras,
                          const std::vector<ImageBuffer>& images, const RasterConfig& raster, const std::string& scene,
                          uint64_t iteration, const std::filesystem::path* render_dir = nullptr);

    class Trainer {
    public:
        /// `regen` may be null; one is then built from the config when the
        /// schedule needs it.
        Trainer(TrainConfig cfg, const Scene& scene, ViewRegenerator* regen = nullptr);

        /// Trains from the scene's sparse points. With `out_dir` set, also writes
        /// the run outputs (see README) there.
        TrainResult run(const std::optional<std::filesystem::path>& out_dir = std::nullopt);

    private:
        TrainConfig cfg_;
        const Scene& scene_;
        ViewRegenerator* regen_;
        std::unique_ptr<ViewRegenerator> owned_regen_;
    };

} // namespace bootsplat
