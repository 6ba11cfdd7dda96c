#pragma once

#include "bootsplat/bootstrap.hpp"
#include "bootsplat/densify.hpp"
#include "bootsplat/optimizer.hpp"
#include "bootsplat/rasterizer.hpp"
#include "bootsplat/remote_regenerator.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace bootsplat {

    struct BootstrapConfig {
        bool enabled = true;
        BootstrapSchedule schedule;
        ViewVariantPolicy policy;
        bool overlap_averaging = false;
        UpscaleConfig upscale;
        /// "heuristic", "zero" or "remote".
        std::string predictor = "heuristic";
        ServiceConfig service;
        /// When false a regeneration failure aborts training instead of
        /// falling back to the plain loss for the affected batch.
        bool allow_fallback = true;
    };

    struct TrainConfig {
        int64_t iterations = 30000;
        uint64_t seed = 0;
        std::vector<int64_t> checkpoint_iterations{7000, 30000};
        std::vector<int64_t> eval_iterations{7000, 30000};
        int test_every = 8;
        double lambda_dssim = 0.2;
        int sh_degree = 1;
        int64_t sh_increase_interval = 1000;
        LearningRates lr;
        bool densify_enabled = true;
        DensifyConfig densify;
        /// Unset: 1% of the scene extent.
        std::optional<double> split_scale_threshold;
        RasterConfig raster;
        BootstrapConfig bootstrap;
        /// Walk the schedule without rendering and record bootstrap activity.
        bool dry_run = false;
        bool save_eval_renders = true;

        void validate() const;
    };

    /// baseline, v1, v3 or v4.
    TrainConfig preset(const std::string& name);
    std::vector<std::string> preset_names();

    /// Overlays the keys present in a JSON document onto `cfg`; unknown keys
    /// raise ConfigError.
    void apply_json(TrainConfig& cfg, const std::string& json_text);
    void apply_config_file(TrainConfig& cfg, const std::filesystem::path& path);

    /// BOOTSPLAT_SERVICE_URL overrides bootstrap.service.url when set.
    inline constexpr const char* kServiceUrlEnv = "BOOTSPLAT_SERVICE_URL";
    void apply_environment(TrainConfig& cfg);

    std::string to_json(const TrainConfig& cfg);

} // namespace bootsplat
