// bootsplat command line: train, render, eval, bootstrap-preview, toy-scene.

#include "bootsplat/bootstrap.hpp"
#include "bootsplat/config.hpp"
#include "bootsplat/errors.hpp"
#include "bootsplat/gaussian.hpp"
#include "bootsplat/image_io.hpp"
#include "bootsplat/scene.hpp"
#include "bootsplat/toy_scene.hpp"
#include "bootsplat/trainer.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace bootsplat;

namespace {

    constexpr int kExitOk = 0;
    constexpr int kExitUsage = 2;
    constexpr int kExitService = 3;

    class UsageError : public std::runtime_error {
    public:
        using std::runtime_error::runtime_error;
    };

    std::vector<double> split_numbers(const std::string& text) {
        std::vector<double> out;
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                std::size_t used = 0;
                out.push_back(std::stod(item, &used));
                if (used != item.size())
                    throw std::invalid_argument(item);
            } catch (const std::exception&) {
                throw UsageError("camera spec: '" + item + "' is not a number");
            }
        }
        return out;
    }

    bool is_index(const std::string& s) {
        if (s.empty())
            return false;
        for (char c : s)
            if (c < '0' || c > '9')
                return false;
        return true;
    }

    /// Either an index into the scene's cameras (name order) or
    /// W,H,fx,fy,cx,cy,qw,qx,qy,qz,tx,ty,tz.
    Camera resolve_camera(const std::string& spec, const std::optional<fs::path>& scene_dir) {
        if (is_index(spec)) {
            if (!scene_dir)
                throw UsageError("--camera given as an index requires --scene");
            const Scene scene = load_scene(*scene_dir, 0, false);
            const auto cams = scene.all_cameras();
            const std::size_t idx = std::stoul(spec);
            if (idx >= cams.size())
                throw UsageError("camera index " + spec + " out of range (scene has " + std::to_string(cams.size()) + ")");
            return cams[idx];
        }
        const auto v = split_numbers(spec);
        if (v.size() != 13)
            throw UsageError("camera spec needs 13 values W,H,fx,fy,cx,cy,qw,qx,qy,qz,tx,ty,tz");
        Camera cam;
        cam.width = static_cast<int>(v[0]);
        cam.height = static_cast<int>(v[1]);
        if (cam.width <= 0 || cam.height <= 0 || v[2] <= 0.0 || v[3] <= 0.0)
            throw UsageError("camera spec: size and focal lengths must be positive");
        cam.fx = v[2];
        cam.fy = v[3];
        cam.cx = v[4];
        cam.cy = v[5];
        cam.pose.qvec = normalize_quat(Quat(v[6], v[7], v[8], v[9]));
        cam.pose.tvec = Eigen::Vector3d(v[10], v[11], v[12]);
        cam.image_name = "custom";
        return cam;
    }

    TrainConfig build_config(const std::string& preset_name, const std::optional<fs::path>& config_file) {
        TrainConfig cfg = preset(preset_name);
        if (config_file)
            apply_config_file(cfg, *config_file);
        apply_environment(cfg);
        cfg.validate();
        return cfg;
    }

    void write_text(const fs::path& path, const std::string& text) {
        if (path.has_parent_path())
            fs::create_directories(path.parent_path());
        std::ofstream out(path, std::ios::binary);
        out << text << '\n';
        if (!out)
            throw std::runtime_error("cannot write " + path.string());
    }

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian splatting trainer with diffusion bootstrapping"};
    app.require_subcommand(1);
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")->capture_default_str();

    // train
    auto* train = app.add_subcommand("train", "Train a scene from its COLMAP reconstruction");
    fs::path train_scene, train_out = "output";
    std::optional<fs::path> train_config;
    std::string train_preset = "v1";
    std::optional<int64_t> train_iters;
    std::optional<uint64_t> train_seed;
    bool train_dry_run = false;
    train->add_option("--scene", train_scene, "Scene directory (sparse/0 and images/)")->required();
    train->add_option("--config", train_config, "JSON config overlay");
    train->add_option("--preset", train_preset, "baseline, v1, v3 or v4")->capture_default_str();
    train->add_option("--iters", train_iters, "Training iterations (default 30000)");
    train->add_option("--seed", train_seed, "Random seed");
    train->add_option("--out", train_out, "Output directory")->capture_default_str();
    train->add_flag("--dry-run", train_dry_run, "Log the bootstrap schedule without training");

    // render
    auto* rend = app.add_subcommand("render", "Render a checkpoint from a camera");
    fs::path render_ckpt, render_out;
    std::string render_camera;
    std::optional<fs::path> render_scene, render_config;
    rend->add_option("--checkpoint", render_ckpt, "Checkpoint file")->required();
    rend->add_option("--camera", render_camera, "Camera index (needs --scene) or W,H,fx,fy,cx,cy,qw,qx,qy,qz,tx,ty,tz")->required();
    rend->add_option("--scene", render_scene, "Scene directory for indexed cameras");
    rend->add_option("--config", render_config, "JSON config (raster settings)");
    rend->add_option("--out", render_out, "Output PNG")->required();

    // eval
    auto* ev = app.add_subcommand("eval", "Score a checkpoint on a scene's test split");
    fs::path eval_ckpt, eval_scene;
    std::optional<fs::path> eval_out, eval_config;
    std::optional<int> eval_test_every;
    ev->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
    ev->add_option("--scene", eval_scene, "Scene directory")->required();
    ev->add_option("--config", eval_config, "JSON config (raster settings, test_every)");
    ev->add_option("--test-every", eval_test_every, "Hold-out stride (default 8)");
    ev->add_option("--out", eval_out, "Write the metric report JSON here");

    // bootstrap-preview
    auto* prev = app.add_subcommand("bootstrap-preview", "Render a perturbed view and its regeneration");
    fs::path prev_ckpt, prev_out;
    std::string prev_camera;
    std::optional<fs::path> prev_scene, prev_config;
    double prev_sr = 0.05;
    uint64_t prev_seed = 0;
    std::string prev_predictor;
    prev->add_option("--checkpoint", prev_ckpt, "Checkpoint file")->required();
    prev->add_option("--camera", prev_camera, "Camera index (needs --scene) or explicit spec")->required();
    prev->add_option("--scene", prev_scene, "Scene directory for indexed cameras");
    prev->add_option("--config", prev_config, "JSON config (predictor, service, view policy)");
    prev->add_option("--s_r", prev_sr, "Broken strength in [0,1]")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    prev->add_option("--seed", prev_seed, "Perturbation and noise seed")->capture_default_str();
    prev->add_option("--predictor", prev_predictor, "heuristic, zero or remote (overrides config)");
    prev->add_option("--out", prev_out, "Output directory for before.png and after.png")->required();

    // toy-scene
    auto* toy = app.add_subcommand("toy-scene", "Write a synthetic ring-camera scene in COLMAP layout");
    fs::path toy_out;
    ToySceneOptions toy_opts;
    toy->add_option("--out", toy_out, "Output scene directory")->required();
    toy->add_option("--gaussians", toy_opts.gaussians, "Reference Gaussian count")->capture_default_str();
    toy->add_option("--cameras", toy_opts.cameras, "Ring camera count")->capture_default_str();
    toy->add_option("--size", toy_opts.width, "Image width and height")->capture_default_str();
    toy->add_option("--seed", toy_opts.seed, "Random seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        spdlog::set_level(spdlog::level::from_str(log_level));

        if (*train) {
            TrainConfig cfg = build_config(train_preset, train_config);
            if (train_iters)
                cfg.iterations = *train_iters;
            if (train_seed)
                cfg.seed = *train_seed;
            cfg.dry_run = train_dry_run;
            cfg.validate();
            const Scene scene = load_scene(train_scene, cfg.test_every, !train_dry_run);
            spdlog::info("scene '{}': {} train / {} test views, {} points", scene.name, scene.train_cameras.size(),
                         scene.test_cameras.size(), scene.points.size());
            Trainer trainer(cfg, scene);
            const TrainResult res = trainer.run(train_out);
            if (train_dry_run)
                spdlog::info("dry run: bootstrap active on {} iterations", res.activity.size());
            return kExitOk;
        }

        if (*rend) {
            TrainConfig cfg = build_config("v1", render_config);
            const GaussianCloud cloud = load_checkpoint(render_ckpt);
            const Camera cam = resolve_camera(render_camera, render_scene);
            ImageBuffer img = render(cloud, cam, cfg.raster).output.image;
            clamp01(img);
            save_image(img, render_out);
            spdlog::info("wrote {}", render_out.string());
            return kExitOk;
        }

        if (*ev) {
            TrainConfig cfg = build_config("v1", eval_config);
            const int test_every = eval_test_every.value_or(cfg.test_every);
            uint64_t iteration = 0;
            const GaussianCloud cloud = load_checkpoint(eval_ckpt, &iteration);
            const Scene scene = load_scene(eval_scene, test_every, true);
            const bool has_test = !scene.test_cameras.empty();
            const MetricReport rep = evaluate(cloud, has_test ? scene.test_cameras : scene.train_cameras,
                                              has_test ? scene.test_images : scene.train_images, cfg.raster, scene.name,
                                              iteration);
            const std::string json = rep.to_json();
            if (eval_out)
                write_text(*eval_out, json);
            std::printf("%s\n", json.c_str());
            return kExitOk;
        }

        if (*prev) {
            TrainConfig cfg = build_config("v1", prev_config);
            if (!prev_predictor.empty())
                cfg.bootstrap.predictor = prev_predictor;
            cfg.validate();
            const GaussianCloud cloud = load_checkpoint(prev_ckpt);
            const Camera cam = resolve_camera(prev_camera, prev_scene);
            ViewVariantPolicy policy = cfg.bootstrap.policy;
            std::mt19937_64 rng(prev_seed);
            const Camera view = perturb_random(cam, policy, rng);

            ImageBuffer before = render(cloud, view, cfg.raster).output.image;
            clamp01(before);
            auto regen = make_regenerator(cfg.bootstrap);
            diffusion::RegenRequest req;
            req.image = before;
            req.strength = prev_sr;
            req.steps = cfg.bootstrap.schedule.sampler_steps;
            req.seed = prev_seed;
            const ImageBuffer after = regen->regenerate(req, view);
            save_image(before, prev_out / "before.png");
            save_image(after, prev_out / "after.png");
            spdlog::info("wrote {} and {} (s_r={}, L1 change {:.5f})", (prev_out / "before.png").string(),
                         (prev_out / "after.png").string(), prev_sr, mean_abs_diff(before, after));
            return kExitOk;
        }

        if (*toy) {
            toy_opts.height = toy_opts.width;
            const ToyScene scene = make_toy_scene(toy_opts);
            write_scene_dir(scene, toy_out);
            spdlog::info("wrote toy scene with {} cameras to {}", toy_opts.cameras, toy_out.string());
            return kExitOk;
        }
    } catch (const PredictorFailure& e) {
        spdlog::error("regeneration service failure: {}", e.what());
        return kExitService;
    } catch (const UsageError& e) {
        spdlog::error("{}", e.what());
        return kExitUsage;
    } catch (const SceneError& e) {
        spdlog::error("{}", e.what());
        return kExitUsage;
    } catch (const ColmapError& e) {
        spdlog::error("COLMAP input: {}", e.what());
        return kExitUsage;
    } catch (const ConfigError& e) {
        spdlog::error("config: {}", e.what());
        return kExitUsage;
    } catch (const CheckpointError& e) {
        spdlog::error("checkpoint: {}", e.what());
        return kExitUsage;
    } catch (const ImageIoError& e) {
        spdlog::error("image: {}", e.what());
        return kExitUsage;
    } catch (const EmptySceneError& e) {
        spdlog::error("{}", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return kExitUsage;
}
