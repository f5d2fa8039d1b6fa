// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the chromaforge Project.

#pragma once

#include "chromaforge/embedder.hpp"
#include "chromaforge/patchlab.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace chromaforge::localizer {

enum class Aggregation { medoid, meanshift };

std::string to_string(Aggregation a);
Aggregation aggregation_from_string(const std::string& s);

/// Per-pixel manipulation-likelihood map at original image resolution.
struct Heatmap {
    Eigen::ArrayXXd values;  // within [0, 1]
    std::string model_id;
    int stride = 32;
    Aggregation aggregation = Aggregation::medoid;
};

struct AnalysisReport {
    Heatmap heatmap;
    double detection_score = 0.0;
    int n_patches = 0;
    int n_filtered = 0;
};

struct AnalyzeOptions {
    int stride = 32;
    Aggregation aggregation = Aggregation::medoid;
    int analysis_larger_dim = 1536;  // aspect-preserving pre-resize target
    patchlab::FilterParams filters;
    double meanshift_bandwidth = 0.3;
    std::filesystem::path cache_dir;  // embeddings cache; empty disables
};

/// Index of the embedding minimizing total cosine distance to all rows;
/// ties break toward the lowest index.
Eigen::Index medoid_index(const Eigen::MatrixXd& embeddings);
metricspace::Embedding medoid(const Eigen::MatrixXd& embeddings);

/// gamma_i = d(mu, y_i) for each row y_i.
Eigen::VectorXd inconsistency_scores(const Eigen::MatrixXd& embeddings,
                                     const metricspace::Embedding& mu);

/// Flat-kernel mode seeking over cosine distance; gamma_i is the distance
/// from y_i to the converged mode of the largest cluster.
Eigen::VectorXd meanshift_scores(const Eigen::MatrixXd& embeddings, double bandwidth = 0.3);

/// Projects patch scores into image space: each pixel averages the scores of
/// all patches covering it, pixels outside every footprint take the nearest
/// covered pixel's value, and the map is resized to image_rows x image_cols.
Heatmap project_heatmap(const Eigen::VectorXd& scores,
                        const std::vector<std::pair<int, int>>& centers,
                        Eigen::Index grid_rows, Eigen::Index grid_cols, Eigen::Index image_rows,
                        Eigen::Index image_cols, int patch_size, int stride);

/// Mean heatmap value (the image-global manipulation score).
double detection_score(const Heatmap& heatmap);

/// Full analysis: aspect-preserving resize to the analysis scale, dense
/// stride-32 patch extraction, per-patch admission (filtered patches score
/// zero), embedding, aggregation, and heatmap projection back to the
/// original resolution.
AnalysisReport analyze(const Image3u8& image, const embedder::EmbeddingModel& model,
                       const AnalyzeOptions& opts = {});

/// Heatmap files: grayscale PNG preview, raw row-major little-endian float32
/// grid, and a JSON sidecar with geometry and the detection score.
void write_heatmap(const std::filesystem::path& prefix, const AnalysisReport& report);
Eigen::ArrayXXd read_heatmap_grid(const std::filesystem::path& raw_path,
                                  const std::filesystem::path& json_path);

}  // namespace chromaforge::localizer
