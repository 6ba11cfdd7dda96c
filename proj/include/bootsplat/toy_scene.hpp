#pragma once

#include "bootsplat/gaussian.hpp"
#include "bootsplat/rasterizer.hpp"
#include "bootsplat/scene.hpp"

#include <cstdint>
#include <filesystem>

namespace bootsplat {

    struct ToySceneOptions {
        int gaussians = 200;
        int cameras = 24;
        /// Camera i is held out when i % hold_out_every == hold_out_offset.
        int hold_out_every = 4;
        int hold_out_offset = 2;
        int width = 48;
        int height = 48;
        double fov_degrees = 50.0;
        double ring_radius = 3.0;
        double ring_height = 0.6;
        double object_radius = 0.9;
        double min_scale = 0.05;
        double max_scale = 0.18;
        /// Initialization points handed to training: a noisy subset of the
        /// reference means with perturbed colors.
        int init_points = 30;
        double init_position_noise = 0.5;
        double init_color_noise = 0.15;
        uint64_t seed = 0;
    };

    struct ToyScene {
        GaussianCloud reference;
        RasterConfig raster;
        /// Train and test split with images rendered from `reference`.
        Scene scene;
    };

    /// Random colored Gaussians inside a ball, viewed by a ring of cameras
    /// looking at the origin.
    ToyScene make_toy_scene(const ToySceneOptions& options);

    /// Writes `<dir>/sparse/0/*.bin` and `<dir>/images/*.png` for the toy scene.
    void write_scene_dir(const ToyScene& toy, const std::filesystem::path& dir);

} // namespace bootsplat
