#include "bootsplat/scene.hpp"

#include "bootsplat/errors.hpp"
#include "bootsplat/image_io.hpp"

#include <algorithm>
#include <map>

namespace bootsplat {

    std::vector<Camera> Scene::all_cameras() const {
        std::vector<Camera> all = train_cameras;
        all.insert(all.end(), test_cameras.begin(), test_cameras.end());
        std::stable_sort(all.begin(), all.end(), [](const Camera& a, const Camera& b) { return a.image_name < b.image_name; });
        return all;
    }

    std::vector<Camera> cameras_from_model(const colmap::SparseModel& model) {
        std::map<uint32_t, const colmap::CameraIntrinsics*> by_id;
        for (const auto& c : model.cameras)
            by_id[c.camera_id] = &c;

        std::vector<Camera> cams;
        cams.reserve(model.images.size());
        for (const auto& img : model.images) {
            const auto it = by_id.find(img.camera_id);
            if (it == by_id.end())
                throw SceneError("image '" + img.name + "' references unknown camera " + std::to_string(img.camera_id));
            const auto& intr = *it->second;
            Camera cam;
            cam.width = static_cast<int>(intr.width);
            cam.height = static_cast<int>(intr.height);
            cam.fx = intr.fx();
            cam.fy = intr.fy();
            cam.cx = intr.cx();
            cam.cy = intr.cy();
            cam.pose = img.pose;
            cam.image_name = img.name;
            cam.image_id = img.image_id;
            cams.push_back(std::move(cam));
        }
        std::stable_sort(cams.begin(), cams.end(), [](const Camera& a, const Camera& b) { return a.image_name < b.image_name; });
        return cams;
    }

    double camera_extent(const std::vector<Camera>& cameras) {
        if (cameras.empty())
            return 1.0;
        Eigen::Vector3d mean = Eigen::Vector3d::Zero();
        for (const auto& c : cameras)
            mean += c.pose.center();
        mean /= static_cast<double>(cameras.size());
        double radius = 0.0;
        for (const auto& c : cameras)
            radius = std::max(radius, (c.pose.center() - mean).norm());
        return radius > 0.0 ? 1.1 * radius : 1.0;
    }

    Scene load_scene(const std::filesystem::path& dir, int test_every, bool load_images) {
        namespace fs = std::filesystem;
        if (!fs::is_directory(dir))
            throw SceneError("scene directory not found: " + dir.string());
        const fs::path sparse = dir / "sparse" / "0";
        if (!fs::is_directory(sparse))
            throw SceneError("missing COLMAP model directory: " + sparse.string());

        const colmap::SparseModel model = colmap::read_model(sparse);
        const auto cams = cameras_from_model(model);
        if (cams.empty())
            throw SceneError("COLMAP model lists no images: " + sparse.string());

        Scene scene;
        scene.name = fs::absolute(dir).lexically_normal().filename().string();
        if (scene.name.empty())
            scene.name = fs::absolute(dir).lexically_normal().parent_path().filename().string();
        scene.points = model.points;
        scene.extent = camera_extent(cams);

        for (std::size_t i = 0; i < cams.size(); ++i) {
            const bool test = test_every > 0 && i % static_cast<std::size_t>(test_every) == 0 && cams.size() > 1;
            ImageBuffer img;
            if (load_images) {
                const fs::path path = dir / "images" / cams[i].image_name;
                if (!fs::exists(path))
                    throw SceneError("missing image file: " + path.string());
                img = load_image(path);
                if (img.width != cams[i].width || img.height != cams[i].height)
                    throw SceneError("image '" + cams[i].image_name + "' is " + std::to_string(img.width) + "x" +
                                     std::to_string(img.height) + " but its camera is " + std::to_string(cams[i].width) +
                                     "x" + std::to_string(cams[i].height));
            }
            (test ? scene.test_cameras : scene.train_cameras).push_back(cams[i]);
            (test ? scene.test_images : scene.train_images).push_back(std::move(img));
        }
        return scene;
    }

} // namespace bootsplat
