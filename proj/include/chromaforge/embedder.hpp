// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the chromaforge Project.

#pragma once

#include "chromaforge/batching.hpp"
#include "chromaforge/metricspace.hpp"
#include "chromaforge/patchlab.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace chromaforge::embedder {

using MatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic>;
using VecF = Eigen::Matrix<float, Eigen::Dynamic, 1>;

/// One 3x3 stride-2 convolution stage (pad 1, ReLU).
struct ConvLayer {
    int in_channels = 0;
    int out_channels = 0;
    MatF weight;  // out_channels x (9 * in_channels)
    VecF bias;
};

struct DenseLayer {
    MatF weight;  // out x in
    VecF bias;
};

/// Small convolutional backbone: six stride-2 conv stages over the 128x128x3
/// patch (spatial 128 -> 2), global average pooling, and a linear 64-unit
/// head with no output nonlinearity.
struct ConvNet {
    std::vector<ConvLayer> conv;
    DenseLayer head;

    std::size_t parameter_count() const;
    void flatten(std::vector<float>& out) const;
    void unflatten(const std::vector<float>& in);
};

inline const std::vector<int>& default_conv_channels() {
    static const std::vector<int> channels = {16, 24, 32, 48, 64, 64};
    return channels;
}

/// The embedding function f: patch -> R^64. Deterministic in inference for
/// fixed parameters; an exactly zero output vector is nudged by 1e-12 in its
/// first coordinate so downstream cosine distances stay defined.
struct EmbeddingModel {
    ConvNet net;
    std::string arch = "smallconv-v1";
    std::uint64_t init_seed = 0;

    std::string model_id() const { return arch + "-" + std::to_string(init_seed); }
};

/// He-normal conv weights, Glorot-uniform head, zero biases.
EmbeddingModel make_model(std::uint64_t seed,
                          const std::vector<int>& conv_channels = default_conv_channels());

/// Embeds patches (intensities rescaled to [0, 1]); one row per patch.
/// Evaluation runs in fixed-size chunks, so results are bitwise-reproducible.
Eigen::MatrixXd embed(const EmbeddingModel& model, const std::vector<patchlab::Patch>& patches);

/// Raw float forward pass on a prepared batch (3 x 128*128*N, column-major,
/// sample-contiguous). Exposed for the training loop.
MatF forward(const ConvNet& net, const MatF& input);

struct TrainConfig {
    double learning_rate = 1e-4;
    double moment1 = 0.9;
    double moment2 = 0.999;
    double adam_epsilon = 1e-8;
    int plateau_patience = 20;   // epochs without val-loss improvement
    double lr_decay = 0.1;       // multiplier applied on plateau
    int early_stop_factor = 2;   // stop after factor * patience flat epochs
    int max_epochs = 60;
    double eta = 0.5;            // regularizer weight in the total loss
    std::uint64_t seed = 0;
    batching::BatchConfig batch;
    patchlab::FilterParams filters;
};

struct EpochRecord {
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_auc = 0.0;
    double learning_rate = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    int best_epoch = -1;  // epoch index of the restored parameters
};

/// Adam training over epochs of sample_epoch batches, minimizing the total
/// loss. Validation batches are frozen once (no augmentation) and reused
/// every epoch; the learning rate decays by lr_decay after plateau_patience
/// non-improving epochs, training stops early after early_stop_factor times
/// that, and the best-validation-loss parameters are restored on return.
TrainHistory train(EmbeddingModel& model, const batching::ImageProvider& provider,
                   const std::vector<std::size_t>& train_scenes,
                   const std::vector<std::size_t>& val_scenes, const TrainConfig& cfg);

/// ROC AUC of dissimilar-vs-similar pairwise distances (pairs i0 > i1):
/// the probability that a random dissimilar pair has the larger distance,
/// ties counted one half.
double validation_roc_auc(const Eigen::MatrixXd& distances, const BoolMat& gt);

/// Checkpoint container: magic, JSON descriptor (architecture, seeds, train
/// config), then parameters as little-endian 32-bit floats.
void save_checkpoint(const std::filesystem::path& path, const EmbeddingModel& model,
                     const TrainConfig& cfg);
EmbeddingModel load_checkpoint(const std::filesystem::path& path, TrainConfig* cfg_out = nullptr);

/// Human-readable sidecar with one record per epoch.
void save_history(const std::filesystem::path& path, const TrainHistory& history);

}  // namespace chromaforge::embedder
