#include "bootsplat/toy_scene.hpp"

#include "bootsplat/colmap_io.hpp"
#include "bootsplat/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

namespace bootsplat {

    namespace {
        Quat random_rotation(std::mt19937_64& rng) {
            std::normal_distribution<double> n(0.0, 1.0);
            return normalize_quat(Quat(n(rng), n(rng), n(rng), n(rng)));
        }

        std::string image_name(int i) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "view_%03d.png", i);
            return buf;
        }
    } // namespace

    ToyScene make_toy_scene(const ToySceneOptions& o) {
        std::mt19937_64 rng(o.seed);
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        std::normal_distribution<double> normal(0.0, 1.0);

        ToyScene toy;
        toy.raster.background = Eigen::Vector3d::Zero();
        auto& ref = toy.reference;
        ref.sh_degree = 0;
        ref.points.reserve(static_cast<std::size_t>(o.gaussians));
        for (int i = 0; i < o.gaussians; ++i) {
            Gaussian g;
            // Uniform in the ball via rejection.
            Eigen::Vector3d p;
            do {
                p = Eigen::Vector3d(u01(rng), u01(rng), u01(rng)) * 2.0 - Eigen::Vector3d::Ones();
            } while (p.squaredNorm() > 1.0);
            g.position = p * o.object_radius;
            g.rotation = random_rotation(rng);
            for (int k = 0; k < 3; ++k)
                g.log_scale[k] = std::log(o.min_scale + (o.max_scale - o.min_scale) * u01(rng));
            g.opacity_logit = logit(0.6 + 0.35 * u01(rng));
            g.color = Eigen::Vector3d(u01(rng), u01(rng), u01(rng));
            ref.points.push_back(g);
        }

        const double focal = 0.5 * o.width / std::tan(0.5 * o.fov_degrees * std::numbers::pi / 180.0);
        std::vector<Camera> cams;
        for (int i = 0; i < o.cameras; ++i) {
            const double a = 2.0 * std::numbers::pi * i / o.cameras;
            const Eigen::Vector3d eye(o.ring_radius * std::cos(a), o.ring_height, o.ring_radius * std::sin(a));
            Camera cam = look_at(eye, Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitY(), o.width, o.height, focal);
            cam.image_name = image_name(i);
            cam.image_id = static_cast<uint32_t>(i + 1);
            cams.push_back(cam);
        }

        Scene& s = toy.scene;
        s.name = "toy";
        for (int i = 0; i < o.cameras; ++i) {
            ImageBuffer img = render(ref, cams[static_cast<std::size_t>(i)], toy.raster).output.image;
            const bool test = o.hold_out_every > 0 && i % o.hold_out_every == o.hold_out_offset;
            (test ? s.test_cameras : s.train_cameras).push_back(cams[static_cast<std::size_t>(i)]);
            (test ? s.test_images : s.train_images).push_back(std::move(img));
        }
        s.extent = camera_extent(cams);

        std::vector<std::size_t> order(ref.size());
        for (std::size_t i = 0; i < order.size(); ++i)
            order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        const std::size_t n_init = std::min<std::size_t>(order.size(), static_cast<std::size_t>(std::max(1, o.init_points)));
        for (std::size_t k = 0; k < n_init; ++k) {
            const Gaussian& g = ref.points[order[k]];
            colmap::SparsePoint p;
            p.point_id = k + 1;
            p.position = g.position + o.init_position_noise * Eigen::Vector3d(normal(rng), normal(rng), normal(rng));
            for (int c = 0; c < 3; ++c) {
                const double v = std::clamp(g.color[c] + o.init_color_noise * normal(rng), 0.0, 1.0);
                p.color[static_cast<std::size_t>(c)] = static_cast<uint8_t>(std::lround(255.0 * v));
            }
            s.points.push_back(p);
        }
        return toy;
    }

    void write_scene_dir(const ToyScene& toy, const std::filesystem::path& dir) {
        namespace fs = std::filesystem;
        const auto cams = toy.scene.all_cameras();
        colmap::SparseModel model;
        for (const auto& c : cams) {
            colmap::CameraIntrinsics intr;
            intr.camera_id = c.image_id;
            intr.model = colmap::CameraModel::Pinhole;
            intr.width = static_cast<uint64_t>(c.width);
            intr.height = static_cast<uint64_t>(c.height);
            intr.params = {c.fx, c.fy, c.cx, c.cy};
            model.cameras.push_back(intr);

            colmap::ImageRecord rec;
            rec.image_id = c.image_id;
            rec.name = c.image_name;
            rec.pose = c.pose;
            rec.camera_id = c.image_id;
            model.images.push_back(rec);
        }
        model.points = toy.scene.points;
        fs::create_directories(dir / "sparse" / "0");
        colmap::write_model(model, dir / "sparse" / "0", colmap::Format::Binary);

        // Images are re-rendered so train and test files both exist.
        for (const auto& c : cams)
            save_image(render(toy.reference, c, toy.raster).output.image, dir / "images" / c.image_name);
    }

} // namespace bootsplat
