// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the chromaforge Project.

#include "chromaforge/config.hpp"
#include "chromaforge/evalkit.hpp"
#include "chromaforge/imageio.hpp"
#include "chromaforge/localizer.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

namespace cf = chromaforge;

namespace {

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& work) {
    if (jobs <= 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i)
            work(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    const int n = std::min<int>(jobs, static_cast<int>(count));
    for (int w = 0; w < n; ++w)
        workers.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1))
                work(i);
        });
    for (auto& t : workers)
        t.join();
}

cf::Image3u8 read_image(const std::filesystem::path& path) {
    const std::string ext = path.extension().string();
    if (ext == ".jpg" || ext == ".jpeg" || ext == ".JPG") {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw std::runtime_error("cannot read " + path.string());
        std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
        return cf::jpeg_decode(bytes);
    }
    return cf::png_read(path);
}

std::string scene_dir_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "scene_%05d", index);
    return buf;
}

std::filesystem::path cache_dir_from_env() {
    const char* dir = std::getenv("CHROMAFORGE_CACHE");
    return dir ? std::filesystem::path(dir) : std::filesystem::path();
}

int cmd_synth(int scenes, int spliced, const std::string& out, std::uint64_t seed, int height,
              int width, int min_region, int jobs) {
    if (spliced > 0) {
        cf::evalkit::SplicedDatasetOptions opts;
        opts.height = height;
        opts.width = width;
        opts.min_region_pixels = min_region;
        const auto items = cf::evalkit::build_spliced_dataset(spliced, seed, opts);
        cf::evalkit::write_spliced_dataset(out, items);
        std::cout << "wrote " << items.size() << " spliced items to " << out << "\n";
        return 0;
    }
    if (scenes < 1)
        throw CLI::ValidationError("--scenes must be >= 1");
    const auto pipelines = cf::colorpipe::enumerate_pipelines(seed);
    std::filesystem::create_directories(out);
    parallel_for(static_cast<std::size_t>(scenes), jobs, [&](std::size_t i) {
        auto scene = cf::colorpipe::synthesize_scene(cf::mix_seed(seed, i), height, width);
        scene.scene_id = scene_dir_name(static_cast<int>(i));
        cf::colorpipe::write_scene_dataset(out, scene, pipelines);
    });
    std::cout << "wrote " << scenes << " scenes x " << pipelines.size() << " pipelines to " << out
              << "\n";
    return 0;
}

int cmd_train(const std::string& data, const std::string& config_file, const std::string& out) {
    cf::config::RunConfig cfg;
    if (!config_file.empty())
        cfg = cf::config::parse_run_config(config_file);

    const auto index = cf::colorpipe::load_dataset_index(data);
    cf::batching::DiskImageProvider provider(index);

    // Seeded shuffle, then split by scenes.
    std::vector<std::size_t> order(provider.scene_count());
    std::iota(order.begin(), order.end(), 0);
    cf::Rng split_rng(cf::mix_seed(cfg.train.seed, 0x5D117ULL));
    split_rng.shuffle(order);
    const std::size_t n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(cfg.val_fraction * static_cast<double>(order.size())));
    if (n_val >= order.size())
        throw std::runtime_error("train: not enough scenes to split");
    std::vector<std::size_t> val_scenes(order.begin(), order.begin() + n_val);
    std::vector<std::size_t> train_scenes(order.begin() + n_val, order.end());

    auto model = cf::embedder::make_model(cfg.train.seed);
    const auto history = cf::embedder::train(model, provider, train_scenes, val_scenes, cfg.train);
    cf::embedder::save_checkpoint(out, model, cfg.train);
    cf::embedder::save_history(out + ".history.json", history);

    if (!history.epochs.empty()) {
        const auto& last = history.epochs.back();
        std::cout << "epochs " << history.epochs.size() << " best " << history.best_epoch
                  << " val_loss " << last.val_loss << " val_auc " << last.val_auc << "\n";
    }
    std::cout << "checkpoint " << out << "\n";
    return 0;
}

int cmd_analyze(const std::string& image_path, const std::string& model_path,
                const std::string& agg, const std::string& out, int stride, int analysis_dim) {
    const auto image = read_image(image_path);
    const auto model = cf::embedder::load_checkpoint(model_path);
    cf::localizer::AnalyzeOptions opts;
    opts.stride = stride;
    opts.aggregation = cf::localizer::aggregation_from_string(agg);
    opts.analysis_larger_dim = analysis_dim;
    opts.cache_dir = cache_dir_from_env();
    const auto report = cf::localizer::analyze(image, model, opts);
    cf::localizer::write_heatmap(out, report);
    std::printf("Gamma %.9f\n", report.detection_score);
    return 0;
}

int cmd_evaluate(const std::string& dataset, const std::string& model_path,
                 const std::string& variant, const std::string& out, int analysis_dim, int jobs) {
    const auto items = cf::evalkit::load_spliced_dataset(dataset);
    const auto model = cf::embedder::load_checkpoint(model_path);
    const auto spec = cf::evalkit::DegradationSpec::variant(variant);
    cf::localizer::AnalyzeOptions opts;
    opts.analysis_larger_dim = analysis_dim;
    opts.cache_dir = cache_dir_from_env();
    std::vector<cf::evalkit::EvalRow> rows;
    const auto summary = cf::evalkit::evaluate_spliced(model, items, spec, opts, &rows, jobs);
    cf::evalkit::write_eval_csv(out + ".csv", rows);
    cf::evalkit::write_eval_summary(out + ".json", summary);
    std::cout << "variant " << summary.variant << " mean_mcc " << summary.mean_mcc
              << " detection_auc " << summary.detection_auc << "\n";
    return 0;
}

int cmd_robustness(const std::string& model_path, const std::string& mode, double lab_min,
                   const std::string& out, int scenes, std::uint64_t seed, int pairs, int patches,
                   int height, int width, int analysis_dim) {
    const auto model = cf::embedder::load_checkpoint(model_path);
    cf::batching::SyntheticImageProvider provider(seed, static_cast<std::size_t>(scenes), height,
                                                  width);
    cf::evalkit::RobustnessOptions opts;
    opts.mode = mode == "same-scene" ? cf::evalkit::RobustnessMode::same_scene
                                     : cf::evalkit::RobustnessMode::different_scenes;
    opts.min_lab = lab_min;
    opts.n_pairs = pairs;
    opts.patches_per_image = patches;
    opts.seed = seed;
    opts.analysis_larger_dim = analysis_dim;
    const auto grid = cf::evalkit::robustness_grid(model, provider,
                                                   cf::evalkit::default_resize_factors(),
                                                   cf::evalkit::default_jpeg_qualities(), opts);
    cf::evalkit::write_grid_csv(out + ".csv", grid);
    cf::evalkit::write_grid_plot(out + ".png", grid);
    std::cout << "grid " << grid.tpr.rows() << "x" << grid.tpr.cols() << " tpr range ["
              << grid.tpr.minCoeff() << ", " << grid.tpr.maxCoeff() << "]\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"metric color embeddings for splicing localization"};
    app.require_subcommand(1);

    // synth
    int synth_scenes = 0, synth_spliced = 0, synth_height = 512, synth_width = 512, synth_jobs = 1;
    int synth_min_region = 50000;
    std::uint64_t synth_seed = 1;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "synthesize a development dataset");
    synth->add_option("--scenes", synth_scenes, "number of scenes");
    synth->add_option("--spliced", synth_spliced, "emit a spliced benchmark of N items instead");
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--seed", synth_seed, "dataset seed");
    synth->add_option("--height", synth_height, "scene height");
    synth->add_option("--width", synth_width, "scene width");
    synth->add_option("--min-region", synth_min_region, "spliced-region pixel floor");
    synth->add_option("--jobs", synth_jobs, "worker threads");

    // train
    std::string train_data, train_config, train_out;
    auto* train = app.add_subcommand("train", "train the embedding model");
    train->add_option("--data", train_data, "dataset directory")->required();
    train->add_option("--config", train_config, "KEY=VALUE run configuration");
    train->add_option("--out", train_out, "checkpoint path")->required();

    // analyze
    std::string analyze_image, analyze_model, analyze_agg = "medoid", analyze_out;
    int analyze_stride = 32, analyze_dim = 1536;
    auto* analyze = app.add_subcommand("analyze", "heatmap + detection score for one image");
    analyze->add_option("--image", analyze_image, "input image (png or jpeg)")->required();
    analyze->add_option("--model", analyze_model, "model checkpoint")->required();
    analyze->add_option("--agg", analyze_agg, "aggregation: medoid|meanshift")
        ->check(CLI::IsMember({"medoid", "meanshift"}));
    analyze->add_option("--out", analyze_out, "output prefix")->required();
    analyze->add_option("--stride", analyze_stride, "patch stride");
    analyze->add_option("--analysis-dim", analyze_dim, "analysis larger dimension");

    // evaluate
    std::string eval_dataset, eval_model, eval_variant = "hq", eval_out;
    int eval_dim = 1536, eval_jobs = 1;
    auto* evaluate = app.add_subcommand("evaluate", "localization metrics on a spliced dataset");
    evaluate->add_option("--dataset", eval_dataset, "spliced dataset directory")->required();
    evaluate->add_option("--model", eval_model, "model checkpoint")->required();
    evaluate->add_option("--variant", eval_variant, "degradation variant: hq|mq|lq")
        ->check(CLI::IsMember({"hq", "mq", "lq"}));
    evaluate->add_option("--out", eval_out, "output prefix")->required();
    evaluate->add_option("--analysis-dim", eval_dim, "analysis larger dimension");
    evaluate->add_option("--jobs", eval_jobs, "worker threads");

    // robustness
    std::string rob_model, rob_mode = "diff-scene", rob_out;
    double rob_lab_min = 0.0;
    int rob_scenes = 100, rob_pairs = 50, rob_patches = 50, rob_height = 512, rob_width = 512;
    int rob_dim = 1536;
    std::uint64_t rob_seed = 7;
    auto* robustness = app.add_subcommand("robustness", "TPR@5%FAR degradation grid");
    robustness->add_option("--model", rob_model, "model checkpoint")->required();
    robustness->add_option("--mode", rob_mode, "diff-scene|same-scene")
        ->check(CLI::IsMember({"diff-scene", "same-scene"}));
    robustness->add_option("--lab-min", rob_lab_min, "same-scene minimum Lab difference");
    robustness->add_option("--out", rob_out, "output prefix")->required();
    robustness->add_option("--scenes", rob_scenes, "synthetic scene pool size");
    robustness->add_option("--seed", rob_seed, "seed");
    robustness->add_option("--pairs", rob_pairs, "image pairs");
    robustness->add_option("--patches", rob_patches, "patches per image");
    robustness->add_option("--height", rob_height, "scene height");
    robustness->add_option("--width", rob_width, "scene width");
    robustness->add_option("--analysis-dim", rob_dim, "analysis larger dimension");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed())
            return cmd_synth(synth_scenes, synth_spliced, synth_out, synth_seed, synth_height,
                             synth_width, synth_min_region, synth_jobs);
        if (train->parsed())
            return cmd_train(train_data, train_config, train_out);
        if (analyze->parsed())
            return cmd_analyze(analyze_image, analyze_model, analyze_agg, analyze_out,
                               analyze_stride, analyze_dim);
        if (evaluate->parsed())
            return cmd_evaluate(eval_dataset, eval_model, eval_variant, eval_out, eval_dim,
                                eval_jobs);
        if (robustness->parsed())
            return cmd_robustness(rob_model, rob_mode, rob_lab_min, rob_out, rob_scenes, rob_seed,
                                  rob_pairs, rob_patches, rob_height, rob_width, rob_dim);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
