// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the chromaforge Project.

#pragma once

#include "chromaforge/image.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace chromaforge::colorpipe {

enum class WbMode { autoWB, cameraWB, noWB };
enum class ColorTransform { raw, sRGB, Adobe, ProPhoto };

std::string to_string(WbMode mode);
std::string to_string(ColorTransform transform);
WbMode wb_mode_from_string(const std::string& s);
ColorTransform color_transform_from_string(const std::string& s);

/// Radiometrically linear RGB raster standing in for a RAW capture.
/// Pixels are nonnegative, scale-free, nominally within [0, 1]. The global
/// illuminant tint baked into the pixels is kept alongside so camera-preset
/// white balance can invert it.
struct LinearScene {
    std::string scene_id;
    std::uint64_t rng_seed = 0;
    Image3f pixels;
    Eigen::Vector3d illuminant_tint = Eigen::Vector3d::Ones();
};

/// One camera color pipeline: white-balance mode x color transform plus the
/// concrete gains, 3x3 mixing matrix and tone curve exponent.
struct PipelineSpec {
    WbMode wb_mode = WbMode::noWB;
    ColorTransform color_transform = ColorTransform::raw;
    Eigen::Vector3d wb_gains = Eigen::Vector3d::Ones();
    Eigen::Matrix3d color_matrix = Eigen::Matrix3d::Identity();
    double tone_gamma = 1.0;

    std::string id() const { return to_string(wb_mode) + "_" + to_string(color_transform); }
};

struct DevelopedImage {
    std::string scene_id;
    PipelineSpec pipeline;
    Image3u8 pixels;
};

/// Synthesizes a linear scene: piecewise-smooth colored blobs and gradients
/// over a low-frequency base field, band-limited texture, a global illuminant
/// tint and mild spatial illuminant variation. Deterministic in (seed, dims).
/// Requires height, width >= 256.
LinearScene synthesize_scene(std::uint64_t seed, int height, int width);

/// All 12 (wb_mode x color_transform) pipelines. Gains for cameraWB are drawn
/// uniformly per channel from [0.6, 1.6]; autoWB and noWB carry unit gains
/// (autoWB gains are resolved from the scene at development time). Matrices
/// are convex blends of the identity and a fixed per-transform reference,
/// with blend weight drawn from [0.7, 1.0].
std::vector<PipelineSpec> enumerate_pipelines(std::uint64_t seed);

/// Develops a linear scene through a pipeline:
///   v' = clip(quantize(255 * (M * (g_eff (*) v))^(1/gamma)))
/// where g_eff composes the spec gains with the mode-resolved gains:
///   noWB      g_eff = wb_gains
///   cameraWB  g_eff = wb_gains (*) inverse(scene illuminant tint)
///   autoWB    g_eff = wb_gains (*) gray-world gains of the scene
/// The map is spatially invariant and deterministic.
DevelopedImage develop(const LinearScene& scene, const PipelineSpec& pipeline);

/// Effective per-channel gains used by develop() for this scene/pipeline.
Eigen::Vector3d effective_gains(const LinearScene& scene, const PipelineSpec& pipeline);

/// Writes one scene to `<root>/<scene_id>/<wb_mode>_<transform>.png` for all
/// pipelines plus `<root>/<scene_id>/meta.json`.
void write_scene_dataset(const std::filesystem::path& root, const LinearScene& scene,
                         const std::vector<PipelineSpec>& pipelines);

/// On-disk dataset index (sorted scene directories).
struct DatasetIndex {
    std::filesystem::path root;
    std::vector<std::string> scene_ids;
    std::vector<std::string> pipeline_ids;  // common to all scenes
};

DatasetIndex load_dataset_index(const std::filesystem::path& root);
Image3u8 load_dataset_image(const DatasetIndex& index, std::size_t scene, std::size_t pipeline);

}  // namespace chromaforge::colorpipe
