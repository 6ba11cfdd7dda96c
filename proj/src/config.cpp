#include "bootsplat/config.hpp"

#include "bootsplat/errors.hpp"

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace bootsplat {

    using nlohmann::json;

    void TrainConfig::validate() const {
        if (iterations < 0)
            throw ConfigError("iterations must be non-negative");
        if (test_every < 0)
            throw ConfigError("test_every must be non-negative");
        if (lambda_dssim < 0.0 || lambda_dssim > 1.0)
            throw ConfigError("lambda_dssim must lie in [0,1]");
        if (sh_degree < 0 || sh_degree > 1)
            throw ConfigError("sh_degree must be 0 or 1");
        if (sh_increase_interval <= 0)
            throw ConfigError("sh_increase_interval must be positive");
        if (raster.tile_size <= 0)
            throw ConfigError("raster.tile_size must be positive");
        if (raster.min_contribution < 0.0 || raster.min_contribution >= 1.0)
            throw ConfigError("raster.min_contribution must lie in [0,1)");
        if (split_scale_threshold && !(*split_scale_threshold > 0.0))
            throw ConfigError("densify.split_scale_threshold must be positive");
        densify.validate();
        bootstrap.schedule.validate();
        bootstrap.policy.validate();
        if (bootstrap.predictor != "heuristic" && bootstrap.predictor != "zero" && bootstrap.predictor != "remote")
            throw ConfigError("bootstrap.predictor must be heuristic, zero or remote");
        if (bootstrap.upscale.iter_end < bootstrap.upscale.iter_begin)
            throw ConfigError("bootstrap.upscale.iter_range is empty");
        if (!(bootstrap.service.timeout_seconds > 0.0))
            throw ConfigError("bootstrap.service.timeout must be positive");
    }

    std::vector<std::string> preset_names() { return {"baseline", "v1", "v3", "v4"}; }

    TrainConfig preset(const std::string& name) {
        TrainConfig cfg;
        if (name == "v1") {
            cfg.bootstrap.schedule.s_r_start = 0.05;
            cfg.bootstrap.schedule.s_r_end = 0.01;
            cfg.bootstrap.policy.mode = ViewMode::Mixed;
        } else if (name == "baseline") {
            cfg = preset("v1");
            cfg.bootstrap.schedule.interval_starts.clear();
        } else if (name == "v3" || name == "v4") {
            cfg.bootstrap.schedule.s_r_start = 0.15;
            cfg.bootstrap.schedule.s_r_end = 0.01;
            cfg.bootstrap.policy.mode = ViewMode::Random;
            cfg.bootstrap.upscale.enabled = name == "v4";
        } else {
            throw ConfigError("unknown preset '" + name + "' (expected baseline, v1, v3 or v4)");
        }
        return cfg;
    }

    namespace {

        void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
            if (!obj.is_object())
                throw ConfigError(where + " must be a JSON object");
            for (auto it = obj.begin(); it != obj.end(); ++it) {
                bool ok = false;
                for (const char* k : allowed)
                    ok = ok || it.key() == k;
                if (!ok)
                    throw ConfigError("unknown config key '" + (where.empty() ? "" : where + ".") + it.key() + "'");
            }
        }

        template <typename T>
        void read(const json& obj, const char* key, T& out) {
            if (obj.contains(key))
                out = obj.at(key).get<T>();
        }

        void read_lr(const json& j, LearningRates& lr) {
            check_keys(j, "lr", {"position_init", "position_final", "position_max_steps", "rotation", "scale", "opacity",
                                 "color", "sh"});
            read(j, "position_init", lr.position_init);
            read(j, "position_final", lr.position_final);
            read(j, "position_max_steps", lr.position_max_steps);
            read(j, "rotation", lr.rotation);
            read(j, "scale", lr.scale);
            read(j, "opacity", lr.opacity);
            read(j, "color", lr.color);
            read(j, "sh", lr.sh);
        }

        void read_densify(const json& j, TrainConfig& cfg) {
            check_keys(j, "densify", {"enabled", "clone_grad_threshold", "split_scale_threshold", "densify_interval",
                                      "densify_from", "densify_until", "opacity_reset_interval", "prune_alpha",
                                      "direction_consistency_ratio", "split_scale_divisor"});
            auto& d = cfg.densify;
            read(j, "enabled", cfg.densify_enabled);
            read(j, "clone_grad_threshold", d.clone_grad_threshold);
            if (j.contains("split_scale_threshold")) {
                if (j["split_scale_threshold"].is_null())
                    cfg.split_scale_threshold.reset();
                else
                    cfg.split_scale_threshold = j["split_scale_threshold"].get<double>();
            }
            read(j, "densify_interval", d.densify_interval);
            read(j, "densify_from", d.densify_from);
            read(j, "densify_until", d.densify_until);
            read(j, "opacity_reset_interval", d.opacity_reset_interval);
            read(j, "prune_alpha", d.prune_alpha);
            read(j, "direction_consistency_ratio", d.direction_consistency_ratio);
            read(j, "split_scale_divisor", d.split_scale_divisor);
        }

        void read_raster(const json& j, RasterConfig& r) {
            check_keys(j, "raster", {"tile_size", "min_contribution", "early_stop", "background"});
            read(j, "tile_size", r.tile_size);
            read(j, "min_contribution", r.min_contribution);
            read(j, "early_stop", r.early_stop);
            if (j.contains("background")) {
                const auto bg = j["background"].get<std::vector<double>>();
                if (bg.size() != 3)
                    throw ConfigError("raster.background needs three values");
                r.background = Eigen::Vector3d(bg[0], bg[1], bg[2]);
            }
        }

        void read_bootstrap(const json& j, BootstrapConfig& b) {
            check_keys(j, "bootstrap", {"enabled", "intervals", "interval_length", "lambda_boot_schedule", "lambda_switch",
                                        "s_r_start", "s_r_end", "sampler_steps", "variants_per_camera", "mode",
                                        "qvec_noise_scale", "tvec_noise_scale", "overlap_averaging", "upscale", "predictor",
                                        "service", "allow_fallback"});
            auto& s = b.schedule;
            read(j, "enabled", b.enabled);
            read(j, "intervals", s.interval_starts);
            read(j, "interval_length", s.interval_length);
            if (j.contains("lambda_boot_schedule")) {
                const auto& l = j["lambda_boot_schedule"];
                if (l.is_number()) {
                    s.lambda_first = s.lambda_second = l.get<double>();
                } else {
                    const auto v = l.get<std::vector<double>>();
                    if (v.size() != 2)
                        throw ConfigError("bootstrap.lambda_boot_schedule needs [first, second]");
                    s.lambda_first = v[0];
                    s.lambda_second = v[1];
                }
            }
            read(j, "lambda_switch", s.lambda_switch);
            read(j, "s_r_start", s.s_r_start);
            read(j, "s_r_end", s.s_r_end);
            read(j, "sampler_steps", s.sampler_steps);
            read(j, "variants_per_camera", b.policy.variants_per_camera);
            if (j.contains("mode"))
                b.policy.mode = parse_view_mode(j["mode"].get<std::string>());
            read(j, "qvec_noise_scale", b.policy.qvec_noise_scale);
            read(j, "tvec_noise_scale", b.policy.tvec_noise_scale);
            read(j, "overlap_averaging", b.overlap_averaging);
            read(j, "predictor", b.predictor);
            read(j, "allow_fallback", b.allow_fallback);
            if (j.contains("upscale")) {
                const auto& u = j["upscale"];
                check_keys(u, "bootstrap.upscale", {"enabled", "iter_range"});
                read(u, "enabled", b.upscale.enabled);
                if (u.contains("iter_range")) {
                    const auto r = u["iter_range"].get<std::vector<int64_t>>();
                    if (r.size() != 2)
                        throw ConfigError("bootstrap.upscale.iter_range needs [begin, end]");
                    b.upscale.iter_begin = r[0];
                    b.upscale.iter_end = r[1];
                }
            }
            if (j.contains("service")) {
                const auto& sv = j["service"];
                check_keys(sv, "bootstrap.service", {"url", "timeout", "prompt"});
                read(sv, "url", b.service.url);
                read(sv, "timeout", b.service.timeout_seconds);
                read(sv, "prompt", b.service.prompt);
            }
        }

    } // namespace

    void apply_json(TrainConfig& cfg, const std::string& json_text) {
        json j;
        try {
            j = json::parse(json_text);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("config is not valid JSON: ") + e.what());
        }
        try {
            check_keys(j, "", {"iterations", "seed", "checkpoint_iterations", "eval_iterations", "test_every",
                               "lambda_dssim", "sh_degree", "sh_increase_interval", "lr", "densify", "raster", "bootstrap",
                               "save_eval_renders"});
            read(j, "iterations", cfg.iterations);
            read(j, "seed", cfg.seed);
            read(j, "checkpoint_iterations", cfg.checkpoint_iterations);
            read(j, "eval_iterations", cfg.eval_iterations);
            read(j, "test_every", cfg.test_every);
            read(j, "lambda_dssim", cfg.lambda_dssim);
            read(j, "sh_degree", cfg.sh_degree);
            read(j, "sh_increase_interval", cfg.sh_increase_interval);
            read(j, "save_eval_renders", cfg.save_eval_renders);
            if (j.contains("lr"))
                read_lr(j["lr"], cfg.lr);
            if (j.contains("densify"))
                read_densify(j["densify"], cfg);
            if (j.contains("raster"))
                read_raster(j["raster"], cfg.raster);
            if (j.contains("bootstrap"))
                read_bootstrap(j["bootstrap"], cfg.bootstrap);
        } catch (const json::exception& e) {
            throw ConfigError(std::string("bad config value: ") + e.what());
        }
        cfg.validate();
    }

    void apply_config_file(TrainConfig& cfg, const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in)
            throw ConfigError("cannot read config file " + path.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        apply_json(cfg, ss.str());
    }

    void apply_environment(TrainConfig& cfg) {
        if (const char* url = std::getenv(kServiceUrlEnv); url && *url)
            cfg.bootstrap.service.url = url;
    }

    std::string to_json(const TrainConfig& cfg) {
        const auto& b = cfg.bootstrap;
        const auto& s = b.schedule;
        json j{
            {"iterations", cfg.iterations},
            {"seed", cfg.seed},
            {"checkpoint_iterations", cfg.checkpoint_iterations},
            {"eval_iterations", cfg.eval_iterations},
            {"test_every", cfg.test_every},
            {"lambda_dssim", cfg.lambda_dssim},
            {"sh_degree", cfg.sh_degree},
            {"sh_increase_interval", cfg.sh_increase_interval},
            {"save_eval_renders", cfg.save_eval_renders},
            {"lr",
             {{"position_init", cfg.lr.position_init},
              {"position_final", cfg.lr.position_final},
              {"position_max_steps", cfg.lr.position_max_steps},
              {"rotation", cfg.lr.rotation},
              {"scale", cfg.lr.scale},
              {"opacity", cfg.lr.opacity},
              {"color", cfg.lr.color},
              {"sh", cfg.lr.sh}}},
            {"densify",
             {{"enabled", cfg.densify_enabled},
              {"clone_grad_threshold", cfg.densify.clone_grad_threshold},
              {"split_scale_threshold", cfg.split_scale_threshold ? json(*cfg.split_scale_threshold) : json(nullptr)},
              {"densify_interval", cfg.densify.densify_interval},
              {"densify_from", cfg.densify.densify_from},
              {"densify_until", cfg.densify.densify_until},
              {"opacity_reset_interval", cfg.densify.opacity_reset_interval},
              {"prune_alpha", cfg.densify.prune_alpha},
              {"direction_consistency_ratio", cfg.densify.direction_consistency_ratio},
              {"split_scale_divisor", cfg.densify.split_scale_divisor}}},
            {"raster",
             {{"tile_size", cfg.raster.tile_size},
              {"min_contribution", cfg.raster.min_contribution},
              {"early_stop", cfg.raster.early_stop},
              {"background", {cfg.raster.background.x(), cfg.raster.background.y(), cfg.raster.background.z()}}}},
            {"bootstrap",
             {{"enabled", b.enabled},
              {"intervals", s.interval_starts},
              {"interval_length", s.interval_length},
              {"lambda_boot_schedule", {s.lambda_first, s.lambda_second}},
              {"lambda_switch", s.lambda_switch},
              {"s_r_start", s.s_r_start},
              {"s_r_end", s.s_r_end},
              {"sampler_steps", s.sampler_steps},
              {"variants_per_camera", b.policy.variants_per_camera},
              {"mode", view_mode_name(b.policy.mode)},
              {"qvec_noise_scale", b.policy.qvec_noise_scale},
              {"tvec_noise_scale", b.policy.tvec_noise_scale},
              {"overlap_averaging", b.overlap_averaging},
              {"predictor", b.predictor},
              {"allow_fallback", b.allow_fallback},
              {"upscale", {{"enabled", b.upscale.enabled}, {"iter_range", {b.upscale.iter_begin, b.upscale.iter_end}}}},
              {"service", {{"url", b.service.url}, {"timeout", b.service.timeout_seconds}, {"prompt", b.service.prompt}}}}},
        };
        return j.dump(2);
    }

} // namespace bootsplat
