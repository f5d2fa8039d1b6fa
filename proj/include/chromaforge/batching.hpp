// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the chromaforge Project.

#pragma once

#include "chromaforge/colorpipe.hpp"
#include "chromaforge/patchlab.hpp"
#include "chromaforge/rng.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace chromaforge::batching {

/// Source of developed images for batch sampling; implementations back this
/// with the on-disk dataset or on-the-fly synthesis.
class ImageProvider {
public:
    virtual ~ImageProvider() = default;
    virtual std::size_t scene_count() const = 0;
    virtual std::size_t pipeline_count() const = 0;
    virtual std::string scene_id(std::size_t scene) const = 0;
    virtual std::string pipeline_id(std::size_t pipeline) const = 0;
    virtual Image3u8 image(std::size_t scene, std::size_t pipeline) const = 0;
};

class DiskImageProvider : public ImageProvider {
public:
    explicit DiskImageProvider(colorpipe::DatasetIndex index) : index_(std::move(index)) {}
    std::size_t scene_count() const override { return index_.scene_ids.size(); }
    std::size_t pipeline_count() const override { return index_.pipeline_ids.size(); }
    std::string scene_id(std::size_t scene) const override { return index_.scene_ids.at(scene); }
    std::string pipeline_id(std::size_t pipeline) const override {
        return index_.pipeline_ids.at(pipeline);
    }
    Image3u8 image(std::size_t scene, std::size_t pipeline) const override {
        return colorpipe::load_dataset_image(index_, scene, pipeline);
    }

private:
    colorpipe::DatasetIndex index_;
};

/// Synthesizes scenes on demand; scene i uses seed mix_seed(base_seed, i).
class SyntheticImageProvider : public ImageProvider {
public:
    SyntheticImageProvider(std::uint64_t base_seed, std::size_t scenes, int height, int width);
    std::size_t scene_count() const override { return n_scenes_; }
    std::size_t pipeline_count() const override { return pipelines_.size(); }
    std::string scene_id(std::size_t scene) const override;
    std::string pipeline_id(std::size_t pipeline) const override {
        return pipelines_.at(pipeline).id();
    }
    Image3u8 image(std::size_t scene, std::size_t pipeline) const override;

    colorpipe::LinearScene scene(std::size_t index) const;
    const std::vector<colorpipe::PipelineSpec>& pipelines() const { return pipelines_; }

private:
    std::uint64_t base_seed_;
    std::size_t n_scenes_;
    int height_, width_;
    std::vector<colorpipe::PipelineSpec> pipelines_;
};

struct BatchConfig {
    int n_scenes = 8;     // scenes per batch
    int n_pipelines = 2;  // pipelines per scene
    int n_patches = 8;    // patches per developed image

    int batch_size() const { return n_scenes * n_pipelines * n_patches; }
};

/// Stacked patches ordered scene-major, then pipeline, then patch, plus the
/// boolean dissimilarity matrix: gt[i,j] is false iff rows i and j share both
/// scene and pipeline.
struct MiniBatch {
    std::vector<patchlab::Patch> patches;
    BoolMat gt;
};

/// Block ground truth: n_scenes*n_pipelines zero blocks of shape
/// n_patches x n_patches on the diagonal, ones everywhere else.
BoolMat build_ground_truth(const BatchConfig& cfg);

struct AugmentParams {
    bool flip_horizontal = false;
    bool flip_vertical = false;
    double rotation_deg = 0.0;
    double shear_deg = 0.0;
    double resize_factor = 1.0;
    std::optional<int> jpeg_quality;

    bool is_identity() const {
        return !flip_horizontal && !flip_vertical && rotation_deg == 0.0 && shear_deg == 0.0 &&
               resize_factor == 1.0 && !jpeg_quality;
    }
};

/// Flips with probability 1/2 each, rotation and shear in [-5, 5] degrees,
/// resize factor in [0.95, 1.05], JPEG with probability 1/2 at a quality
/// drawn from [50, 100].
AugmentParams draw_augment_params(Rng& rng);

/// Applies flip, then a single bilinear warp composing rotation, shear and
/// scale about the patch center (output stays 128x128 with reflect padding),
/// then the optional JPEG round trip. Identity parameters copy pixels
/// exactly. Provenance fields are preserved.
patchlab::Patch apply_augment(const patchlab::Patch& patch, const AugmentParams& params);

patchlab::Patch augment(const patchlab::Patch& patch, Rng& rng);

struct EpochOptions {
    patchlab::FilterParams filters;
    bool augment = true;
    int max_draws_per_image = 100;
    int resize_larger_dim = 1536;  // only shrinks; smaller images pass through
};

/// Builds the epoch's mini-batches: scenes are permuted and partitioned into
/// disjoint groups, each scene contributes n_pipelines random distinct
/// pipelines and n_patches admissible patches per developed image (admission
/// against the co-located patches of the other selected pipelines). Scenes
/// that cannot fill their quota within the draw budget are skipped with a
/// warning; a trailing incomplete batch is dropped.
std::vector<MiniBatch> sample_epoch(const ImageProvider& provider,
                                    const std::vector<std::size_t>& scene_indices,
                                    const BatchConfig& cfg, Rng& rng,
                                    const EpochOptions& opts = {});

}  // namespace chromaforge::batching
