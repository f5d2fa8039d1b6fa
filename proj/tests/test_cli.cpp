// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the chromaforge Project.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "cf_test_cli";

int run(const std::string& args, std::string* output = nullptr) {
    const fs::path log = kWork / "cmd.log";
    const std::string cmd = std::string(CHROMAFORGE_CLI_PATH) + " " + args + " > " +
                            log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    if (output) {
        std::ifstream in(log);
        std::ostringstream buf;
        buf << in.rdbuf();
        *output = buf.str();
    }
    return status;
}

std::vector<unsigned char> slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int count_lines(const fs::path& path) {
    std::ifstream in(path);
    int n = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty())
            ++n;
    return n;
}

}  // namespace

TEST_CASE("synth writes the dataset layout deterministically") {
    fs::remove_all(kWork);
    fs::create_directories(kWork);

    const fs::path data = kWork / "data";
    REQUIRE(run("synth --scenes 2 --out " + data.string() + " --seed 5 --height 256 --width 256") == 0);

    int scene_dirs = 0;
    for (const auto& entry : fs::directory_iterator(data))
        if (entry.is_directory()) {
            ++scene_dirs;
            int pngs = 0;
            for (const auto& f : fs::directory_iterator(entry.path()))
                if (f.path().extension() == ".png")
                    ++pngs;
            CHECK(pngs == 12);
            CHECK(fs::exists(entry.path() / "meta.json"));
            CHECK(fs::exists(entry.path() / "autoWB_sRGB.png"));
            CHECK(fs::exists(entry.path() / "noWB_raw.png"));
        }
    CHECK(scene_dirs == 2);

    // Byte-identical repeat.
    const auto before = slurp(data / "scene_00000" / "cameraWB_Adobe.png");
    const fs::path data2 = kWork / "data_repeat";
    REQUIRE(run("synth --scenes 2 --out " + data2.string() + " --seed 5 --height 256 --width 256") == 0);
    CHECK(slurp(data2 / "scene_00000" / "cameraWB_Adobe.png") == before);

    CHECK(run("synth --out " + (kWork / "bad").string()) != 0);  // --scenes 0 is a usage error
}

TEST_CASE("train, analyze and evaluate round trip") {
    const fs::path data = kWork / "train_data";
    REQUIRE(run("synth --scenes 6 --out " + data.string() + " --seed 11 --height 256 --width 256") == 0);

    const fs::path config = kWork / "run.cfg";
    {
        std::ofstream out(config);
        out << "# desk-scale smoke configuration\n";
        out << "n_scenes = 2\nn_pipelines = 2\nn_patches = 2\n";
        out << "max_epochs = 2\nval_fraction = 0.34\nseed = 3\n";
    }
    const fs::path ckpt = kWork / "model.ckpt";
    std::string train_log;
    REQUIRE(run("train --data " + data.string() + " --config " + config.string() + " --out " +
                ckpt.string(),
                &train_log) == 0);
    CHECK(fs::exists(ckpt));
    CHECK(fs::exists(ckpt.string() + ".history.json"));

    // Analyze a dataset image; the score parses and lies in [0, 1].
    const fs::path image = data / "scene_00001" / "noWB_sRGB.png";
    const fs::path heat = kWork / "heat";
    std::string analyze_log;
    REQUIRE(run("analyze --image " + image.string() + " --model " + ckpt.string() + " --out " +
                heat.string() + " --analysis-dim 256",
                &analyze_log) == 0);
    const auto gamma_pos = analyze_log.find("Gamma ");
    REQUIRE(gamma_pos != std::string::npos);
    const double gamma = std::stod(analyze_log.substr(gamma_pos + 6));
    CHECK(gamma >= 0.0);
    CHECK(gamma <= 1.0);
    CHECK(fs::exists(heat.string() + ".png"));
    CHECK(fs::exists(heat.string() + ".f32"));
    CHECK(fs::exists(heat.string() + ".json"));

    // Deterministic repeat: raw grid bytes are identical.
    const auto grid_bytes = slurp(heat.string() + ".f32");
    const fs::path heat2 = kWork / "heat_repeat";
    REQUIRE(run("analyze --image " + image.string() + " --model " + ckpt.string() + " --out " +
                heat2.string() + " --analysis-dim 256") == 0);
    CHECK(slurp(heat2.string() + ".f32") == grid_bytes);

    // Meanshift aggregation also runs.
    REQUIRE(run("analyze --image " + image.string() + " --model " + ckpt.string() +
                " --agg meanshift --out " + (kWork / "heat_ms").string() + " --analysis-dim 256") == 0);

    // Spliced benchmark generation + evaluation: CSV row per image.
    const fs::path spliced = kWork / "spliced";
    REQUIRE(run("synth --spliced 2 --out " + spliced.string() +
                " --seed 21 --height 320 --width 320 --min-region 15000") == 0);
    const fs::path report = kWork / "report";
    REQUIRE(run("evaluate --dataset " + spliced.string() + " --model " + ckpt.string() +
                " --variant hq --out " + report.string() + " --analysis-dim 320 --jobs 2") == 0);
    CHECK(count_lines(report.string() + ".csv") == 3);  // header + 2 items
    CHECK(fs::exists(report.string() + ".json"));

    // Unknown config keys are rejected.
    const fs::path bad_config = kWork / "bad.cfg";
    {
        std::ofstream out(bad_config);
        out << "learning_rat = 1e-4\n";
    }
    CHECK(run("train --data " + data.string() + " --config " + bad_config.string() + " --out " +
              (kWork / "never.ckpt").string()) != 0);

    // Missing files produce a nonzero exit and a diagnostic.
    std::string err_log;
    CHECK(run("analyze --image /nonexistent.png --model " + ckpt.string() + " --out " +
              (kWork / "x").string(),
              &err_log) != 0);
    CHECK(err_log.find("error") != std::string::npos);
}

TEST_CASE("robustness command emits the grid files") {
    const fs::path ckpt = kWork / "model.ckpt";
    REQUIRE(fs::exists(ckpt));  // from the previous case
    const fs::path out = kWork / "grid";
    REQUIRE(run("robustness --model " + ckpt.string() + " --mode diff-scene --out " + out.string() +
                " --scenes 8 --pairs 3 --patches 5 --height 256 --width 256 --seed 2"
                " --analysis-dim 384") == 0);
    CHECK(fs::exists(out.string() + ".csv"));
    CHECK(fs::exists(out.string() + ".png"));
    CHECK(count_lines(out.string() + ".csv") == 6);  // header + 5 factors
}
