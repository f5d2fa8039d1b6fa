// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the chromaforge Project.

#include "chromaforge/batching.hpp"

#include "chromaforge/imageio.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

namespace chromaforge::batching {

SyntheticImageProvider::SyntheticImageProvider(std::uint64_t base_seed, std::size_t scenes,
                                               int height, int width)
    : base_seed_(base_seed),
      n_scenes_(scenes),
      height_(height),
      width_(width),
      pipelines_(colorpipe::enumerate_pipelines(base_seed)) {}

colorpipe::LinearScene SyntheticImageProvider::scene(std::size_t index) const {
    return colorpipe::synthesize_scene(mix_seed(base_seed_, index), height_, width_);
}

std::string SyntheticImageProvider::scene_id(std::size_t index) const {
    return "scene_" + std::to_string(mix_seed(base_seed_, index));
}

Image3u8 SyntheticImageProvider::image(std::size_t scene_index, std::size_t pipeline) const {
    return colorpipe::develop(scene(scene_index), pipelines_.at(pipeline)).pixels;
}

BoolMat build_ground_truth(const BatchConfig& cfg) {
    const int n = cfg.batch_size();
    const int block = cfg.n_patches;
    BoolMat gt = BoolMat::Constant(n, n, true);
    for (int b = 0; b < cfg.n_scenes * cfg.n_pipelines; ++b)
        gt.block(b * block, b * block, block, block).setConstant(false);
    return gt;
}

AugmentParams draw_augment_params(Rng& rng) {
    AugmentParams p;
    p.flip_horizontal = rng.bernoulli(0.5);
    p.flip_vertical = rng.bernoulli(0.5);
    p.rotation_deg = rng.uniform(-5.0, 5.0);
    p.shear_deg = rng.uniform(-5.0, 5.0);
    p.resize_factor = rng.uniform(0.95, 1.05);
    if (rng.bernoulli(0.5))
        p.jpeg_quality = rng.uniform_int(50, 100);
    return p;
}

patchlab::Patch apply_augment(const patchlab::Patch& patch, const AugmentParams& params) {
    patchlab::Patch out = patch;
    if (params.flip_horizontal)
        out.pixels = flip_horizontal(out.pixels);
    if (params.flip_vertical)
        out.pixels = flip_vertical(out.pixels);

    if (params.rotation_deg != 0.0 || params.shear_deg != 0.0 || params.resize_factor != 1.0) {
        const double theta = params.rotation_deg * M_PI / 180.0;
        const double shear = std::tan(params.shear_deg * M_PI / 180.0);
        Eigen::Matrix2d rotate;
        rotate << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
        Eigen::Matrix2d shear_x = Eigen::Matrix2d::Identity();
        shear_x(0, 1) = shear;
        const Eigen::Matrix2d fwd = params.resize_factor * (rotate * shear_x);
        out.pixels = warp_affine(out.pixels, fwd);
    }

    if (params.jpeg_quality)
        out.pixels = jpeg_roundtrip(out.pixels, *params.jpeg_quality);
    return out;
}

patchlab::Patch augment(const patchlab::Patch& patch, Rng& rng) {
    return apply_augment(patch, draw_augment_params(rng));
}

namespace {

struct ScenePlan {
    std::size_t scene = 0;
    std::vector<std::size_t> pipelines;
    // patches[p] holds the n_patches admitted patches of pipeline p's image
    std::vector<std::vector<patchlab::Patch>> patches;
};

Image3u8 load_for_training(const ImageProvider& provider, std::size_t scene,
                           std::size_t pipeline, int larger_dim) {
    Image3u8 img = provider.image(scene, pipeline);
    if (std::max(img.rows(), img.cols()) > larger_dim)
        img = resize_larger_dim(img, larger_dim);
    return img;
}

std::optional<ScenePlan> plan_scene(const ImageProvider& provider, std::size_t scene,
                                    const BatchConfig& cfg, Rng& rng, const EpochOptions& opts) {
    const std::size_t n_avail = provider.pipeline_count();
    ScenePlan plan;
    plan.scene = scene;

    // Distinct pipeline subset, drawn without replacement.
    std::vector<std::size_t> all(n_avail);
    for (std::size_t i = 0; i < n_avail; ++i)
        all[i] = i;
    rng.shuffle(all);
    plan.pipelines.assign(all.begin(), all.begin() + cfg.n_pipelines);

    std::vector<Image3u8> images;
    images.reserve(plan.pipelines.size());
    for (std::size_t p : plan.pipelines)
        images.push_back(load_for_training(provider, scene, p, opts.resize_larger_dim));

    const int max_top = static_cast<int>(images[0].rows()) - patchlab::kPatchSize;
    const int max_left = static_cast<int>(images[0].cols()) - patchlab::kPatchSize;
    if (max_top < 0 || max_left < 0)
        return std::nullopt;

    plan.patches.resize(plan.pipelines.size());
    for (std::size_t img_idx = 0; img_idx < plan.pipelines.size(); ++img_idx) {
        auto& bucket = plan.patches[img_idx];
        for (int draw = 0; draw < opts.max_draws_per_image &&
                           bucket.size() < static_cast<std::size_t>(cfg.n_patches);
             ++draw) {
            const int top = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(max_top + 1)));
            const int left = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(max_left + 1)));
            patchlab::Patch candidate = patchlab::cut_patch(images[img_idx], top, left);
            candidate.scene_id = provider.scene_id(scene);
            candidate.pipeline_id = provider.pipeline_id(plan.pipelines[img_idx]);
            std::vector<patchlab::Patch> peers;
            for (std::size_t other = 0; other < plan.pipelines.size(); ++other)
                if (other != img_idx)
                    peers.push_back(patchlab::cut_patch(images[other], top, left));
            if (patchlab::admit(candidate, peers, opts.filters))
                bucket.push_back(std::move(candidate));
        }
        if (bucket.size() < static_cast<std::size_t>(cfg.n_patches))
            return std::nullopt;
    }
    return plan;
}

}  // namespace

std::vector<MiniBatch> sample_epoch(const ImageProvider& provider,
                                    const std::vector<std::size_t>& scene_indices,
                                    const BatchConfig& cfg, Rng& rng, const EpochOptions& opts) {
    if (scene_indices.size() < static_cast<std::size_t>(cfg.n_scenes))
        throw std::invalid_argument("sample_epoch: fewer scenes than one batch needs");
    if (provider.pipeline_count() < static_cast<std::size_t>(cfg.n_pipelines))
        throw std::invalid_argument("sample_epoch: provider has too few pipelines");

    std::vector<std::size_t> perm = scene_indices;
    rng.shuffle(perm);

    const BoolMat gt = build_ground_truth(cfg);
    std::vector<MiniBatch> batches;
    std::size_t cursor = 0;
    while (true) {
        std::vector<ScenePlan> plans;
        while (plans.size() < static_cast<std::size_t>(cfg.n_scenes) && cursor < perm.size()) {
            const std::size_t scene = perm[cursor++];
            auto plan = plan_scene(provider, scene, cfg, rng, opts);
            if (plan)
                plans.push_back(std::move(*plan));
            else
                std::cerr << "sample_epoch: skipping scene " << provider.scene_id(scene)
                          << " (no admissible patches within draw budget)\n";
        }
        if (plans.size() < static_cast<std::size_t>(cfg.n_scenes))
            break;

        MiniBatch batch;
        batch.gt = gt;
        batch.patches.reserve(static_cast<std::size_t>(cfg.batch_size()));
        for (const auto& plan : plans)
            for (const auto& bucket : plan.patches)
                for (const auto& patch : bucket)
                    batch.patches.push_back(opts.augment ? augment(patch, rng) : patch);
        batches.push_back(std::move(batch));
    }
    return batches;
}

}  // namespace chromaforge::batching
