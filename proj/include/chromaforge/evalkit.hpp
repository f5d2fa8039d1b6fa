// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the chromaforge Project.

#pragma once

#include "chromaforge/batching.hpp"
#include "chromaforge/embedder.hpp"
#include "chromaforge/felzenszwalb.hpp"
#include "chromaforge/localizer.hpp"
#include "chromaforge/ranking.hpp"

#include <optional>
#include <string>
#include <vector>

namespace chromaforge::evalkit {

using BinaryMask = BoolMat;

/// Thrown when a metric has no defined value (single-class ground truth).
struct UndefinedMetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Matthews Correlation Coefficient; 0 whenever a denominator factor is 0.
double mcc(const BinaryMask& pred, const BinaryMask& gt);

struct BestMcc {
    double mcc = 0.0;
    double threshold = 0.0;
    bool inverted = false;
};

/// Maximizes MCC over all distinct heatmap values as thresholds (prediction:
/// value > threshold), for the heatmap and its inverse 1 - H.
BestMcc best_mcc_over_thresholds(const Eigen::ArrayXXd& heatmap, const BinaryMask& gt);

/// Rank-based AUC with ties at one half.
double roc_auc(const Eigen::VectorXd& scores, const std::vector<bool>& positive);

/// TPR at the conservative threshold with FAR <= far (step-function ROC).
double tpr_at_far(const Eigen::VectorXd& scores, const std::vector<bool>& positive,
                  double far = 0.05);

struct PrecisionRecall {
    std::optional<double> precision;  // undefined when nothing is predicted positive
    std::optional<double> recall;     // undefined when there are no positives
};

/// Positive prediction: score > threshold.
PrecisionRecall precision_recall_at(const Eigen::VectorXd& scores,
                                    const std::vector<bool>& positive, double threshold = 0.3);

/// Angular error in degrees between two nonzero 3-vectors.
double angular_error(const Eigen::Vector3d& w, const Eigen::Vector3d& w_star);

/// Degradation: resize by a factor (bilinear) or to a named larger dimension,
/// then an optional JPEG round trip. (f = 1.0, Q = id.) is the identity.
struct DegradationSpec {
    double resize_factor = 1.0;
    std::optional<int> jpeg_quality;         // nullopt = id.
    std::optional<int> resize_to_larger_dim; // named variants use this

    std::string label() const;

    static DegradationSpec identity() { return {}; }
    static DegradationSpec factor(double f, std::optional<int> q) { return {f, q, {}}; }
    static DegradationSpec hq() { return {}; }
    static DegradationSpec mq() { return {1.0, 75, 1200}; }
    static DegradationSpec lq() { return {1.0, 50, 800}; }
    static DegradationSpec variant(const std::string& name);
};

Image3u8 degrade(const Image3u8& image, const DegradationSpec& spec);

/// One synthetic splice: a scene developed with pipeline A, one segment
/// replaced by the same content developed with pipeline B, plus the pristine
/// twin and the ground-truth mask.
struct SplicedItem {
    std::string item_id;
    Image3u8 spliced;
    BinaryMask mask;
    Image3u8 pristine;
    std::string pipeline_a;
    std::string pipeline_b;
};

struct SplicedDatasetOptions {
    int height = 768;
    int width = 768;
    segmentation::FelzenszwalbParams fh;
    int min_region_pixels = 50000;
    double min_lab_distance = 5.0;
    bool rectangle_fallback = false;  // fast tests: random rectangle region
    int max_scene_retries = 25;
};

std::vector<SplicedItem> build_spliced_dataset(int n, std::uint64_t seed,
                                               const SplicedDatasetOptions& opts = {});

/// Disk layout: `<root>/<item_id>/{spliced.png, pristine.png, mask.png,
/// meta.json}` with an 8-bit mask (255 = manipulated).
void write_spliced_dataset(const std::filesystem::path& root,
                           const std::vector<SplicedItem>& items);
std::vector<SplicedItem> load_spliced_dataset(const std::filesystem::path& root);

/// Per-image evaluation row and dataset-level summary.
struct EvalRow {
    std::string item_id;
    std::string variant;
    double mcc = 0.0;
    double threshold = 0.0;
    bool inverted = false;
    std::optional<double> precision;
    std::optional<double> recall;
    double gamma_spliced = 0.0;
    double gamma_pristine = 0.0;
};

struct EvalSummary {
    std::string variant;
    int n_items = 0;
    double mean_mcc = 0.0;
    double detection_auc = 0.0;
    double detection_tpr_at_far = 0.0;
    double mean_precision = 0.0;  // over defined rows
    double mean_recall = 0.0;
};

/// Per-image analysis is independent; jobs > 1 fans items out over threads
/// (results are merged in item order, so output is unchanged).
EvalSummary evaluate_spliced(const embedder::EmbeddingModel& model,
                             const std::vector<SplicedItem>& items, const DegradationSpec& spec,
                             const localizer::AnalyzeOptions& analyze_opts,
                             std::vector<EvalRow>* rows_out = nullptr, int jobs = 1);

void write_eval_csv(const std::filesystem::path& path, const std::vector<EvalRow>& rows);
void write_eval_summary(const std::filesystem::path& path, const EvalSummary& summary);

enum class RobustnessMode { different_scenes, same_scene };

struct RobustnessOptions {
    RobustnessMode mode = RobustnessMode::different_scenes;
    double min_lab = 0.0;  // same-scene patch-pair Lab floor
    int n_pairs = 50;
    int patches_per_image = 50;
    int analysis_larger_dim = 1536;
    std::uint64_t seed = 7;
    int max_position_draws = 4000;
    patchlab::FilterParams filters;
};

struct RobustnessGrid {
    std::vector<double> resize_factors;
    std::vector<std::optional<int>> jpeg_qualities;
    Eigen::ArrayXXd tpr;  // rows follow resize_factors, cols jpeg_qualities
};

inline std::vector<double> default_resize_factors() { return {1.25, 1.0, 0.75, 0.5, 0.25}; }
inline std::vector<std::optional<int>> default_jpeg_qualities() {
    return {std::nullopt, 90, 70, 50, 30};
}

/// TPR@5%FAR of within-image (similar) vs cross-image (dissimilar) patch
/// distance distributions for every (f, Q) combination. Patch positions and
/// pair sets are fixed on the clean images and reused across all cells.
RobustnessGrid robustness_grid(const embedder::EmbeddingModel& model,
                               const batching::ImageProvider& provider,
                               const std::vector<double>& resize_factors,
                               const std::vector<std::optional<int>>& jpeg_qualities,
                               const RobustnessOptions& opts = {});

void write_grid_csv(const std::filesystem::path& path, const RobustnessGrid& grid);

/// Renders the grid as a color-mapped PNG (one block per cell).
void write_grid_plot(const std::filesystem::path& path, const RobustnessGrid& grid,
                     int cell_pixels = 64);

}  // namespace chromaforge::evalkit
