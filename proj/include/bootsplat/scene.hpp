#pragma once

#include "bootsplat/camera.hpp"
#include "bootsplat/colmap_io.hpp"
#include "bootsplat/image.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace bootsplat {

    struct Scene {
        std::string name;
        std::vector<Camera> train_cameras;
        std::vector<ImageBuffer> train_images;
        std::vector<Camera> test_cameras;
        std::vector<ImageBuffer> test_images;
        std::vector<colmap::SparsePoint> points;
        /// 1.1 x the largest camera-center distance from their mean.
        double extent = 1.0;

        std::vector<Camera> all_cameras() const;
    };

    /// Cameras for every image record, sorted by image name.
    std::vector<Camera> cameras_from_model(const colmap::SparseModel& model);

    double camera_extent(const std::vector<Camera>& cameras);

    /// Loads `<dir>/sparse/0` and `<dir>/images`. Every `test_every`-th camera in
    /// name order (starting with the first) goes to the test split; 0 keeps all
    /// cameras for training. Images must match their camera resolution.
    Scene load_scene(const std::filesystem::path& dir, int test_every = 8, bool load_images = true);

} // namespace bootsplat
