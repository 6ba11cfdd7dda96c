#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

    const fs::path& work_dir() {
        static const fs::path dir = [] {
            fs::path d = fs::temp_directory_path() / ("bootsplat_cli_" + std::to_string(::getpid()));
            fs::remove_all(d);
            fs::create_directories(d);
            return d;
        }();
        return dir;
    }

    struct RunResult {
        int code = -1;
        std::string out;
    };

    RunResult run(const std::string& args) {
        const fs::path log = work_dir() / "stdout.txt";
        const std::string cmd = std::string("\"") + BOOTSPLAT_CLI_PATH + "\" --log-level warn " + args + " > \"" +
                                log.string() + "\" 2>&1";
        const int status = std::system(cmd.c_str());
        RunResult r;
        r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        std::ifstream in(log);
        std::stringstream ss;
        ss << in.rdbuf();
        r.out = ss.str();
        return r;
    }

    std::string slurp(const fs::path& p) {
        std::ifstream in(p);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    fs::path write_file(const std::string& name, const std::string& text) {
        const fs::path p = work_dir() / name;
        std::ofstream(p) << text;
        return p;
    }

    // Shared small scene, created once through the CLI itself.
    const fs::path& scene() {
        static const fs::path dir = [] {
            const fs::path d = work_dir() / "scene";
            const RunResult r = run("toy-scene --out " + d.string() + " --gaussians 30 --cameras 10 --size 16 --seed 2");
            EXPECT_EQ(r.code, 0) << r.out;
            return d;
        }();
        return dir;
    }

    const fs::path& small_config() {
        static const fs::path p = write_file(
            "small.json",
            R"({"checkpoint_iterations": [], "eval_iterations": [],
                "bootstrap": {"intervals": [10], "interval_length": 10, "lambda_switch": 5, "variants_per_camera": 1}})");
        return p;
    }

} // namespace

TEST(Cli, MissingSubcommandIsUsageError) {
    EXPECT_EQ(run("").code, 2);
    EXPECT_EQ(run("train").code, 2);
    EXPECT_EQ(run("frobnicate").code, 2);
    EXPECT_EQ(run("--help").code, 0);
}

TEST(Cli, UnknownSceneDirectoryIsCleanError) {
    const RunResult r = run("train --scene " + (work_dir() / "no_such_scene").string() + " --out " +
                            (work_dir() / "x").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.out.find("error"), std::string::npos) << r.out;
}

TEST(Cli, BadConfigIsUsageError) {
    const fs::path bad = write_file("bad.json", R"({"bootstrap": {"lambda": 1}})");
    EXPECT_EQ(run("train --scene " + scene().string() + " --config " + bad.string()).code, 2);
    EXPECT_EQ(run("train --scene " + scene().string() + " --preset v9").code, 2);
}

TEST(Cli, SameSeedGivesIdenticalMetrics) {
    const fs::path a = work_dir() / "seed_a", b = work_dir() / "seed_b";
    const std::string common = "train --scene " + scene().string() + " --preset v1 --seed 7 --iters 40 --config " +
                               small_config().string() + " --out ";
    ASSERT_EQ(run(common + a.string()).code, 0);
    ASSERT_EQ(run(common + b.string()).code, 0);
    const std::string ma = slurp(a / "metrics" / "eval_40.json");
    ASSERT_FALSE(ma.empty());
    EXPECT_EQ(ma, slurp(b / "metrics" / "eval_40.json"));
    EXPECT_EQ(slurp(a / "checkpoints" / "iter_40.bspl"), slurp(b / "checkpoints" / "iter_40.bspl"));
    const auto cfg = nlohmann::json::parse(slurp(a / "config.json"));
    EXPECT_EQ(cfg["seed"], 7);
    EXPECT_EQ(cfg["iterations"], 40);
}

TEST(Cli, BaselinePresetEqualsV1WithoutIntervals) {
    const fs::path a = work_dir() / "baseline", b = work_dir() / "v1_empty";
    const fs::path empty = write_file("empty.json", R"({"bootstrap": {"intervals": []}})");
    ASSERT_EQ(run("train --scene " + scene().string() + " --preset baseline --iters 30 --out " + a.string()).code, 0);
    ASSERT_EQ(run("train --scene " + scene().string() + " --preset v1 --iters 30 --config " + empty.string() +
                  " --out " + b.string())
                  .code,
              0);
    EXPECT_EQ(slurp(a / "metrics" / "eval_30.json"), slurp(b / "metrics" / "eval_30.json"));
    EXPECT_EQ(slurp(a / "config.json"), slurp(b / "config.json"));
}

TEST(Cli, DryRunLogsTheSchedule) {
    const RunResult r = run("train --dry-run --scene " + scene().string() + " --out " +
                            (work_dir() / "dry").string());
    EXPECT_EQ(r.code, 0) << r.out;
}

TEST(Cli, RenderEvalAndPreview) {
    const fs::path out = work_dir() / "model";
    ASSERT_EQ(run("train --scene " + scene().string() + " --preset baseline --iters 20 --out " + out.string()).code, 0);
    const fs::path ckpt = out / "checkpoints" / "iter_20.bspl";
    ASSERT_TRUE(fs::exists(ckpt));

    const fs::path png = work_dir() / "view.png";
    EXPECT_EQ(run("render --checkpoint " + ckpt.string() + " --scene " + scene().string() + " --camera 1 --out " +
                  png.string())
                  .code,
              0);
    EXPECT_TRUE(fs::exists(png));
    const fs::path explicit_png = work_dir() / "explicit.png";
    EXPECT_EQ(run("render --checkpoint " + ckpt.string() + " --camera 24,16,20,20,12,8,1,0,0,0,0,0,3 --out " +
                  explicit_png.string())
                  .code,
              0);
    EXPECT_TRUE(fs::exists(explicit_png));
    EXPECT_EQ(run("render --checkpoint " + ckpt.string() + " --camera 1 --out " + png.string()).code, 2);
    EXPECT_EQ(run("render --checkpoint " + ckpt.string() + " --camera 1,2,3 --out " + png.string()).code, 2);
    EXPECT_EQ(run("render --checkpoint " + (work_dir() / "nope.bspl").string() + " --camera 24,16,20,20,12,8,1,0,0,0,0,0,3 --out " +
                  png.string())
                  .code,
              2);

    const RunResult ev = run("eval --checkpoint " + ckpt.string() + " --scene " + scene().string());
    ASSERT_EQ(ev.code, 0) << ev.out;
    const auto j = nlohmann::json::parse(ev.out);
    EXPECT_EQ(j["iteration"], 20);
    EXPECT_EQ(j["per_image"].size(), 2u);
    EXPECT_EQ(j["lpips"], "n/a");

    const fs::path prev = work_dir() / "preview";
    EXPECT_EQ(run("bootstrap-preview --checkpoint " + ckpt.string() + " --scene " + scene().string() +
                  " --camera 0 --s_r 0.1 --out " + prev.string())
                  .code,
              0);
    EXPECT_TRUE(fs::exists(prev / "before.png"));
    EXPECT_TRUE(fs::exists(prev / "after.png"));
    EXPECT_EQ(run("bootstrap-preview --checkpoint " + ckpt.string() + " --scene " + scene().string() +
                  " --camera 0 --s_r 1.5 --out " + prev.string())
                  .code,
              2);
}

TEST(Cli, ServiceFailureWithoutFallbackExitsThree) {
    const fs::path cfg = write_file(
        "remote.json",
        R"({"checkpoint_iterations": [], "eval_iterations": [],
            "bootstrap": {"intervals": [5], "interval_length": 5, "variants_per_camera": 1, "predictor": "remote",
                          "allow_fallback": false, "service": {"url": "http://127.0.0.1:9", "timeout": 1}}})");
    const RunResult r = run("train --scene " + scene().string() + " --iters 12 --config " + cfg.string() + " --out " +
                            (work_dir() / "remote").string());
    EXPECT_EQ(r.code, 3) << r.out;

    // With fallback allowed the same run completes on the plain loss.
    const fs::path ok = write_file(
        "remote_ok.json",
        R"({"checkpoint_iterations": [], "eval_iterations": [],
            "bootstrap": {"intervals": [5], "interval_length": 5, "variants_per_camera": 1, "predictor": "remote",
                          "service": {"url": "http://127.0.0.1:9", "timeout": 1}}})");
    EXPECT_EQ(run("train --scene " + scene().string() + " --iters 12 --config " + ok.string() + " --out " +
                  (work_dir() / "remote_ok").string())
                  .code,
              0);
}
