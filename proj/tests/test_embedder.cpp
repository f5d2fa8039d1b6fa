// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the chromaforge Project.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "chromaforge/embedder.hpp"
#include "chromaforge/metricspace.hpp"
#include "oracles.hpp"

#include <filesystem>

using namespace chromaforge;
using namespace chromaforge::embedder;

namespace {

std::vector<patchlab::Patch> sample_patches(const batching::ImageProvider& provider,
                                            std::size_t scene, std::size_t pipeline, int count,
                                            Rng& rng) {
    const auto img = provider.image(scene, pipeline);
    std::vector<patchlab::Patch> patches;
    for (int i = 0; i < count; ++i) {
        const int top = static_cast<int>(rng.uniform_int(
            static_cast<std::uint64_t>(img.rows() - patchlab::kPatchSize + 1)));
        const int left = static_cast<int>(rng.uniform_int(
            static_cast<std::uint64_t>(img.cols() - patchlab::kPatchSize + 1)));
        auto p = patchlab::cut_patch(img, top, left);
        p.scene_id = provider.scene_id(scene);
        p.pipeline_id = provider.pipeline_id(pipeline);
        patches.push_back(std::move(p));
    }
    return patches;
}

}  // namespace

TEST_CASE("embedding dimension, determinism and duplicate handling") {
    batching::SyntheticImageProvider provider(3, 1, 256, 256);
    Rng rng(3);
    auto patches = sample_patches(provider, 0, 2, 3, rng);
    patches.push_back(patches.front());  // duplicate

    const auto model = make_model(7);
    const Eigen::MatrixXd y = embed(model, patches);
    CHECK(y.rows() == 4);
    CHECK(y.cols() == 64);
    CHECK((y.row(0) - y.row(3)).cwiseAbs().maxCoeff() == 0.0);

    const Eigen::MatrixXd y2 = embed(model, patches);
    CHECK((y - y2).cwiseAbs().maxCoeff() == 0.0);

    patchlab::Patch bad;
    bad.pixels.resize(64, 64);
    CHECK_THROWS_AS(embed(model, {bad}), std::invalid_argument);
}

TEST_CASE("untrained embeddings separate imaging conditions only weakly") {
    batching::SyntheticImageProvider provider(5, 4, 320, 320);
    Rng rng(5);
    std::vector<double> aucs;
    for (std::uint64_t model_seed : {11ULL, 12ULL, 13ULL}) {
        const auto model = make_model(model_seed);
        std::vector<patchlab::Patch> patches;
        std::vector<int> condition;
        for (std::size_t scene = 0; scene < 4; ++scene) {
            const std::size_t c0 = rng.uniform_int(std::uint64_t{12});
            std::size_t c1 = rng.uniform_int(std::uint64_t{11});
            if (c1 >= c0)
                ++c1;
            for (auto& p : sample_patches(provider, scene, c0, 6, rng)) {
                patches.push_back(std::move(p));
                condition.push_back(static_cast<int>(scene) * 2);
            }
            for (auto& p : sample_patches(provider, scene, c1, 6, rng)) {
                patches.push_back(std::move(p));
                condition.push_back(static_cast<int>(scene) * 2 + 1);
            }
        }
        const Eigen::MatrixXd y = embed(model, patches);
        std::vector<double> dist;
        std::vector<bool> dissim;
        for (Eigen::Index i = 0; i < y.rows(); ++i)
            for (Eigen::Index j = 0; j < i; ++j) {
                dist.push_back(oracle::cos_distance(y.row(i), y.row(j)));
                dissim.push_back(condition[static_cast<std::size_t>(i)] !=
                                 condition[static_cast<std::size_t>(j)]);
            }
        const Eigen::VectorXd s =
            Eigen::Map<Eigen::VectorXd>(dist.data(), static_cast<Eigen::Index>(dist.size()));
        aucs.push_back(oracle::roc_auc(s, dissim));
    }
    // Random features carry some color signal; the point is that untrained
    // separation is far from the trained regime.
    for (double a : aucs) {
        CHECK(a > 0.3);
        CHECK(a < 0.8);
    }
}

TEST_CASE("validation AUC agrees with the rank oracle and the evalkit route") {
    Rng rng(7);
    const Eigen::MatrixXd y = oracle::random_embeddings(rng, 24, 16);
    BoolMat gt = BoolMat::Constant(24, 24, true);
    for (int b = 0; b < 6; ++b)
        gt.block(4 * b, 4 * b, 4, 4).setConstant(false);

    const Eigen::MatrixXd d = metricspace::pairwise_distances(y);
    const double got = validation_roc_auc(d, gt);

    std::vector<double> scores;
    std::vector<bool> labels;
    for (Eigen::Index i = 0; i < d.rows(); ++i)
        for (Eigen::Index j = 0; j < i; ++j) {
            scores.push_back(d(i, j));
            labels.push_back(gt(i, j));
        }
    const Eigen::VectorXd s =
        Eigen::Map<Eigen::VectorXd>(scores.data(), static_cast<Eigen::Index>(scores.size()));
    CHECK(got == doctest::Approx(oracle::roc_auc(s, labels)).epsilon(1e-12));

    const BoolMat all_similar = BoolMat::Constant(24, 24, false);
    CHECK_THROWS_AS(validation_roc_auc(d, all_similar), std::invalid_argument);
}

TEST_CASE("checkpoint round trip is bitwise exact") {
    const auto dir = std::filesystem::temp_directory_path() / "cf_test_ckpt";
    std::filesystem::create_directories(dir);
    const auto path = dir / "model.ckpt";

    auto model = make_model(99);
    TrainConfig cfg;
    cfg.seed = 99;
    cfg.max_epochs = 17;
    save_checkpoint(path, model, cfg);

    TrainConfig loaded_cfg;
    const auto loaded = load_checkpoint(path, &loaded_cfg);
    CHECK(loaded.arch == model.arch);
    CHECK(loaded_cfg.max_epochs == 17);
    CHECK(loaded_cfg.seed == 99);

    batching::SyntheticImageProvider provider(1, 1, 256, 256);
    Rng rng(1);
    const auto patches = sample_patches(provider, 0, 5, 4, rng);
    const Eigen::MatrixXd y0 = embed(model, patches);
    const Eigen::MatrixXd y1 = embed(loaded, patches);
    CHECK((y0 - y1).cwiseAbs().maxCoeff() == 0.0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("zero max_epochs leaves the model untouched") {
    batching::SyntheticImageProvider provider(31, 6, 256, 256);
    auto model = make_model(1);
    std::vector<float> before;
    model.net.flatten(before);

    TrainConfig cfg;
    cfg.max_epochs = 0;
    cfg.batch = {2, 2, 2};
    const auto history = train(model, provider, {0, 1, 2, 3}, {4, 5}, cfg);
    CHECK(history.epochs.empty());
    std::vector<float> after;
    model.net.flatten(after);
    CHECK(before == after);

    CHECK_THROWS_AS(train(model, provider, {}, {4}, cfg), std::invalid_argument);
}

TEST_CASE("short training run decreases the loss and reproduces itself") {
    batching::SyntheticImageProvider provider(77, 12, 256, 256);
    std::vector<std::size_t> train_scenes = {0, 1, 2, 3, 4, 5, 6, 7};
    std::vector<std::size_t> val_scenes = {8, 9, 10, 11};

    TrainConfig cfg;
    cfg.seed = 5;
    cfg.max_epochs = 3;
    cfg.batch = {4, 2, 4};  // 32-patch batches keep the smoke test quick

    auto model_a = make_model(cfg.seed);
    const auto hist_a = train(model_a, provider, train_scenes, val_scenes, cfg);
    REQUIRE(hist_a.epochs.size() == 3);
    CHECK(hist_a.epochs.back().train_loss < hist_a.epochs.front().train_loss);
    CHECK(hist_a.epochs.back().learning_rate == doctest::Approx(1e-4));

    auto model_b = make_model(cfg.seed);
    const auto hist_b = train(model_b, provider, train_scenes, val_scenes, cfg);
    for (std::size_t e = 0; e < hist_a.epochs.size(); ++e) {
        CHECK(hist_a.epochs[e].train_loss == hist_b.epochs[e].train_loss);
        CHECK(hist_a.epochs[e].val_loss == hist_b.epochs[e].val_loss);
        CHECK(hist_a.epochs[e].val_auc == hist_b.epochs[e].val_auc);
    }
    std::vector<float> pa, pb;
    model_a.net.flatten(pa);
    model_b.net.flatten(pb);
    CHECK(pa == pb);
}
