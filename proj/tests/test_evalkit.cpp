// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the chromaforge Project.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "chromaforge/evalkit.hpp"
#include "oracles.hpp"

using namespace chromaforge;
using namespace chromaforge::evalkit;

namespace {

BoolMat random_mask(Rng& rng, int rows, int cols, double p) {
    BoolMat m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i)
        m(i) = rng.bernoulli(p);
    return m;
}

}  // namespace

TEST_CASE("mcc endpoints and oracle equivalence") {
    Rng rng(3);
    const BoolMat gt = random_mask(rng, 16, 16, 0.4);
    CHECK(mcc(gt, gt) == doctest::Approx(1.0));
    const BoolMat inverted = !gt;
    CHECK(mcc(inverted, gt) == doctest::Approx(-1.0));

    for (int trial = 0; trial < 100; ++trial) {
        const BoolMat pred = random_mask(rng, 12, 9, rng.uniform(0.1, 0.9));
        const BoolMat truth = random_mask(rng, 12, 9, rng.uniform(0.1, 0.9));
        CHECK(mcc(pred, truth) == doctest::Approx(oracle::mcc(pred, truth)).epsilon(1e-12));
        // Formula symmetries.
        CHECK(mcc(pred, truth) == doctest::Approx(mcc(truth, pred)).epsilon(1e-12));
        const BoolMat np = !pred, nt = !truth;
        CHECK(mcc(pred, truth) == doctest::Approx(mcc(np, nt)).epsilon(1e-12));
    }
}

TEST_CASE("best MCC over thresholds matches the exhaustive sweep") {
    Rng rng(5);
    // Perfect heatmaps in both orientations.
    const BoolMat gt = random_mask(rng, 10, 10, 0.5);
    Eigen::ArrayXXd exact(10, 10);
    for (Eigen::Index i = 0; i < exact.size(); ++i)
        exact(i) = gt(i) ? 1.0 : 0.0;
    const BestMcc plain = best_mcc_over_thresholds(exact, gt);
    CHECK(plain.mcc == doctest::Approx(1.0));
    CHECK_FALSE(plain.inverted);
    const BestMcc flipped = best_mcc_over_thresholds(1.0 - exact, gt);
    CHECK(flipped.mcc == doctest::Approx(1.0));
    CHECK(flipped.inverted);

    for (int trial = 0; trial < 40; ++trial) {
        Eigen::ArrayXXd heat(8, 8);
        for (Eigen::Index i = 0; i < heat.size(); ++i)
            heat(i) = rng.uniform();
        const BoolMat truth = random_mask(rng, 8, 8, 0.5);
        if (truth.count() == 0 || truth.count() == truth.size())
            continue;
        const BestMcc got = best_mcc_over_thresholds(heat, truth);
        CHECK(got.mcc == doctest::Approx(oracle::best_mcc(heat, truth)).epsilon(1e-12));
    }

    const BoolMat single = BoolMat::Constant(4, 4, true);
    Eigen::ArrayXXd h = Eigen::ArrayXXd::Zero(4, 4);
    CHECK_THROWS_AS(best_mcc_over_thresholds(h, single), UndefinedMetricError);
}

TEST_CASE("best MCC is invariant under strictly monotone transforms") {
    Rng rng(7);
    for (int trial = 0; trial < 1000; ++trial) {
        Eigen::ArrayXXd heat(6, 6);
        for (Eigen::Index i = 0; i < heat.size(); ++i)
            heat(i) = rng.uniform();
        const BoolMat gt = random_mask(rng, 6, 6, 0.5);
        if (gt.count() == 0 || gt.count() == gt.size())
            continue;
        const double a = rng.uniform(0.5, 3.0);
        const double b = rng.uniform(-1.0, 1.0);
        // x -> a * exp(x) + b is strictly increasing.
        const Eigen::ArrayXXd transformed = a * heat.exp() + b;
        CHECK(best_mcc_over_thresholds(heat, gt).mcc ==
              doctest::Approx(best_mcc_over_thresholds(transformed, gt).mcc).epsilon(1e-12));
    }
}

TEST_CASE("roc auc and tpr endpoints plus oracle equivalence") {
    Eigen::VectorXd sep(6);
    sep << 0.9, 0.8, 0.7, 0.2, 0.1, 0.0;
    std::vector<bool> labels = {true, true, true, false, false, false};
    CHECK(roc_auc(sep, labels) == doctest::Approx(1.0));
    CHECK(tpr_at_far(sep, labels, 0.05) == doctest::Approx(1.0));

    Eigen::VectorXd same = Eigen::VectorXd::Constant(10, 0.5);
    std::vector<bool> half(10, false);
    for (int i = 0; i < 5; ++i)
        half[static_cast<std::size_t>(i)] = true;
    CHECK(roc_auc(same, half) == doctest::Approx(0.5));

    Rng rng(11);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 10 + static_cast<int>(rng.uniform_int(std::uint64_t{100}));
        Eigen::VectorXd scores(n);
        std::vector<bool> pos;
        bool has_pos = false, has_neg = false;
        for (int i = 0; i < n; ++i) {
            scores[i] = rng.uniform();
            if (rng.bernoulli(0.3))
                scores[i] = std::round(scores[i] * 8.0) / 8.0;  // force ties
            const bool p = rng.bernoulli(0.4);
            pos.push_back(p);
            (p ? has_pos : has_neg) = true;
        }
        if (!has_pos || !has_neg)
            continue;
        CHECK(roc_auc(scores, pos) == doctest::Approx(oracle::roc_auc(scores, pos)).epsilon(1e-12));
        CHECK(tpr_at_far(scores, pos, 0.05) ==
              doctest::Approx(oracle::tpr_at_far(scores, pos, 0.05)).epsilon(1e-12));
        // Complement identity for tie-free scores.
        bool tied = false;
        for (int i = 0; i < n && !tied; ++i)
            for (int j = i + 1; j < n && !tied; ++j)
                tied = scores[i] == scores[j];
        if (!tied) {
            const Eigen::VectorXd neg = -scores;
            CHECK(roc_auc(scores, pos) + roc_auc(neg, pos) == doctest::Approx(1.0).epsilon(1e-12));
        }
    }

    std::vector<bool> all_pos(6, true);
    CHECK_THROWS_AS(roc_auc(sep, all_pos), std::invalid_argument);
}

TEST_CASE("identical score distributions give chance-level tpr at 5% far") {
    Rng rng(13);
    Eigen::VectorXd scores(4000);
    std::vector<bool> pos;
    for (int i = 0; i < 4000; ++i) {
        scores[i] = rng.uniform();
        pos.push_back(i % 2 == 0);
    }
    const double tpr = tpr_at_far(scores, pos, 0.05);
    CHECK(tpr > 0.02);
    CHECK(tpr < 0.09);
}

TEST_CASE("precision recall at a fixed threshold") {
    Eigen::VectorXd sep(6);
    sep << 0.9, 0.8, 0.7, 0.2, 0.1, 0.0;
    std::vector<bool> labels = {true, true, true, false, false, false};
    const auto pr = precision_recall_at(sep, labels, 0.3);
    CHECK(pr.precision.value() == doctest::Approx(1.0));
    CHECK(pr.recall.value() == doctest::Approx(1.0));

    const auto none = precision_recall_at(sep, labels, 2.0);
    CHECK_FALSE(none.precision.has_value());
    CHECK(none.recall.value() == doctest::Approx(0.0));

    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::VectorXd scores(30);
        std::vector<bool> pos;
        for (int i = 0; i < 30; ++i) {
            scores[i] = rng.uniform();
            pos.push_back(rng.bernoulli(0.5));
        }
        bool pd = false, rd = false;
        const auto [p_want, r_want] = oracle::precision_recall(scores, pos, 0.3, pd, rd);
        const auto got = precision_recall_at(scores, pos, 0.3);
        CHECK(got.precision.has_value() == pd);
        CHECK(got.recall.has_value() == rd);
        if (pd)
            CHECK(*got.precision == doctest::Approx(p_want).epsilon(1e-12));
        if (rd)
            CHECK(*got.recall == doctest::Approx(r_want).epsilon(1e-12));
    }
}

TEST_CASE("angular error endpoints") {
    const Eigen::Vector3d x(1, 0, 0), y(0, 1, 0), xy(1, 1, 0);
    CHECK(angular_error(x, x) == doctest::Approx(0.0));
    CHECK(angular_error(x, y) == doctest::Approx(90.0));
    CHECK(angular_error(xy, x) == doctest::Approx(45.0));
    CHECK_THROWS_AS(angular_error(Eigen::Vector3d::Zero(), x), std::invalid_argument);
}

TEST_CASE("degradation identity and resize arithmetic") {
    batching::SyntheticImageProvider provider(3, 1, 256, 300);
    const auto img = provider.image(0, 1);

    const auto same = degrade(img, DegradationSpec::identity());
    for (int k = 0; k < 3; ++k)
        CHECK((same.plane[k] == img.plane[k]).all());

    const auto half = degrade(img, DegradationSpec::factor(0.5, std::nullopt));
    CHECK(half.rows() == 128);
    CHECK(half.cols() == 150);

    const auto mq = degrade(img, DegradationSpec::mq());
    CHECK(std::max(mq.rows(), mq.cols()) == 1200);
    const auto lq = degrade(img, DegradationSpec::lq());
    CHECK(std::max(lq.rows(), lq.cols()) == 800);
}

TEST_CASE("degrade identity property on random images") {
    Rng rng(19);
    for (int trial = 0; trial < 1000; ++trial) {
        const int rows = 8 + static_cast<int>(rng.uniform_int(std::uint64_t{40}));
        const int cols = 8 + static_cast<int>(rng.uniform_int(std::uint64_t{40}));
        Image3u8 img(rows, cols);
        for (int k = 0; k < 3; ++k)
            for (Eigen::Index i = 0; i < img.plane[k].size(); ++i)
                img.plane[k](i) = static_cast<std::uint8_t>(rng.uniform_int(std::uint64_t{256}));
        const auto out = degrade(img, DegradationSpec::factor(1.0, std::nullopt));
        for (int k = 0; k < 3; ++k)
            CHECK((out.plane[k] == img.plane[k]).all());
    }
}

TEST_CASE("felzenszwalb segmentation separates flat regions") {
    Image3u8 img(120, 120);
    img.setConstant(40);
    for (int k = 0; k < 3; ++k)
        img.plane[k].block(30, 30, 60, 60).setConstant(k == 0 ? 220 : 90);
    const auto labels = segmentation::felzenszwalb_segment(img, {10.0, 0.5, 20});
    CHECK(labels(0, 0) == labels(5, 5));
    CHECK(labels(60, 60) == labels(70, 70));
    CHECK(labels(0, 0) != labels(60, 60));
    CHECK(labels.maxCoeff() >= 1);
    CHECK(labels.minCoeff() == 0);
}

TEST_CASE("spliced dataset construction meets the region contracts") {
    SplicedDatasetOptions opts;
    opts.height = 384;
    opts.width = 384;
    opts.min_region_pixels = 20000;  // scaled to the smaller test scenes
    const auto items = build_spliced_dataset(3, 99, opts);
    REQUIRE(items.size() == 3);
    for (const auto& item : items) {
        CHECK(item.mask.count() >= 20000);
        CHECK(item.pipeline_a != item.pipeline_b);
        // Spliced pixels differ only inside the mask.
        for (int k = 0; k < 3; ++k)
            for (Eigen::Index p = 0; p < item.mask.size(); ++p)
                if (!item.mask(p))
                    CHECK(item.spliced.plane[k](p) == item.pristine.plane[k](p));
        // Region Lab distance between the twin developments clears the floor.
        const auto lab_s = patchlab::rgb_to_lab(item.spliced);
        const auto lab_p = patchlab::rgb_to_lab(item.pristine);
        const Eigen::ArrayXXd dist = patchlab::lab_distance_map(lab_s, lab_p);
        double sum = 0.0;
        for (Eigen::Index p = 0; p < item.mask.size(); ++p)
            if (item.mask(p))
                sum += dist(p);
        CHECK(sum / static_cast<double>(item.mask.count()) >= 5.0);
    }

    // The full-size paper contract: 5e4-pixel regions at the default shape.
    SplicedDatasetOptions full;
    full.rectangle_fallback = true;
    const auto big = build_spliced_dataset(1, 5, full);
    CHECK(big[0].mask.count() >= 50000);
}

TEST_CASE("spliced dataset round trips through disk") {
    SplicedDatasetOptions opts;
    opts.height = 320;
    opts.width = 320;
    opts.min_region_pixels = 15000;
    opts.rectangle_fallback = true;
    const auto items = build_spliced_dataset(2, 4, opts);

    const auto dir = std::filesystem::temp_directory_path() / "cf_test_spliced";
    std::filesystem::remove_all(dir);
    write_spliced_dataset(dir, items);
    const auto loaded = load_spliced_dataset(dir);
    REQUIRE(loaded.size() == 2);
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK((loaded[i].mask == items[i].mask).all());
        for (int k = 0; k < 3; ++k) {
            CHECK((loaded[i].spliced.plane[k] == items[i].spliced.plane[k]).all());
            CHECK((loaded[i].pristine.plane[k] == items[i].pristine.plane[k]).all());
        }
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("untrained robustness grid sits at chance level") {
    const auto model = embedder::make_model(123);
    batching::SyntheticImageProvider provider(7, 12, 256, 256);
    RobustnessOptions opts;
    opts.n_pairs = 6;
    opts.patches_per_image = 12;
    opts.analysis_larger_dim = 256;
    const auto grid = robustness_grid(model, provider, {1.0}, {std::nullopt}, opts);
    CHECK(grid.tpr.rows() == 1);
    CHECK(grid.tpr.cols() == 1);
    CHECK(grid.tpr(0, 0) >= 0.0);
    CHECK(grid.tpr(0, 0) <= 0.35);  // far from the trained regime
}

TEST_CASE("robustness grid has the requested shape and fixed pairs") {
    const auto model = embedder::make_model(5);
    batching::SyntheticImageProvider provider(9, 10, 256, 256);
    RobustnessOptions opts;
    opts.n_pairs = 4;
    opts.patches_per_image = 6;
    opts.analysis_larger_dim = 256;
    const auto grid =
        robustness_grid(model, provider, {1.0, 0.5}, {std::nullopt, 70}, opts);
    CHECK(grid.tpr.rows() == 2);
    CHECK(grid.tpr.cols() == 2);
    CHECK(grid.resize_factors.size() == 2);
    CHECK(grid.jpeg_qualities.size() == 2);
    const auto again =
        robustness_grid(model, provider, {1.0, 0.5}, {std::nullopt, 70}, opts);
    CHECK((grid.tpr - again.tpr).abs().maxCoeff() == 0.0);
}
