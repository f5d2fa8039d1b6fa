// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the chromaforge Project.

#include "chromaforge/embedder.hpp"

#include "chromaforge/ranking.hpp"

#include <nlohmann/json.hpp>

#include <cstring>
#include <fstream>
#include <iostream>
#include <stdexcept>

namespace chromaforge::embedder {

namespace {

using Json = nlohmann::json;

constexpr int kPatch = patchlab::kPatchSize;
constexpr int kEvalChunk = 64;

int spatial_after(int stages) {
    int s = kPatch;
    for (int i = 0; i < stages; ++i)
        s /= 2;
    return s;
}

// Feature maps are C x (H*W*N), column-major, one spatial position per
// column (index r + c*H), samples contiguous. im2col lowers a stride-2 3x3
// convolution with zero padding 1 into a (9C) x (Ho*Wo*N) matrix whose rows
// are ordered kernel-offset-major (offset kx*3+ky), channel-minor.
void im2col(const MatF& in, int channels, int height, int width, int samples, MatF& cols) {
    const int ho = height / 2, wo = width / 2;
    cols.resize(9 * channels, static_cast<Eigen::Index>(ho) * wo * samples);
    const float* src = in.data();
    float* dst_base = cols.data();
    const std::size_t col_stride = static_cast<std::size_t>(9) * channels;
    for (int s = 0; s < samples; ++s) {
        const std::size_t in_off = static_cast<std::size_t>(s) * height * width;
        const std::size_t out_off = static_cast<std::size_t>(s) * ho * wo;
        for (int co = 0; co < wo; ++co) {
            for (int ro = 0; ro < ho; ++ro) {
                float* dst = dst_base + (out_off + static_cast<std::size_t>(co) * ho + ro) * col_stride;
                for (int kx = 0; kx < 3; ++kx) {
                    const int ci = 2 * co - 1 + kx;
                    for (int ky = 0; ky < 3; ++ky) {
                        const int ri = 2 * ro - 1 + ky;
                        float* d = dst + static_cast<std::size_t>(kx * 3 + ky) * channels;
                        if (ci < 0 || ci >= width || ri < 0 || ri >= height) {
                            std::memset(d, 0, sizeof(float) * static_cast<std::size_t>(channels));
                        } else {
                            const float* s_ptr =
                                src + (in_off + static_cast<std::size_t>(ci) * height + ri) * channels;
                            std::memcpy(d, s_ptr, sizeof(float) * static_cast<std::size_t>(channels));
                        }
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatter-adds column gradients back onto the input grid.
void col2im(const MatF& cols, int channels, int height, int width, int samples, MatF& din) {
    const int ho = height / 2, wo = width / 2;
    din.setZero(channels, static_cast<Eigen::Index>(height) * width * samples);
    const float* src_base = cols.data();
    float* dst = din.data();
    const std::size_t col_stride = static_cast<std::size_t>(9) * channels;
    for (int s = 0; s < samples; ++s) {
        const std::size_t in_off = static_cast<std::size_t>(s) * height * width;
        const std::size_t out_off = static_cast<std::size_t>(s) * ho * wo;
        for (int co = 0; co < wo; ++co) {
            for (int ro = 0; ro < ho; ++ro) {
                const float* col =
                    src_base + (out_off + static_cast<std::size_t>(co) * ho + ro) * col_stride;
                for (int kx = 0; kx < 3; ++kx) {
                    const int ci = 2 * co - 1 + kx;
                    if (ci < 0 || ci >= width)
                        continue;
                    for (int ky = 0; ky < 3; ++ky) {
                        const int ri = 2 * ro - 1 + ky;
                        if (ri < 0 || ri >= height)
                            continue;
                        const float* c_ptr = col + static_cast<std::size_t>(kx * 3 + ky) * channels;
                        float* d_ptr =
                            dst + (in_off + static_cast<std::size_t>(ci) * height + ri) * channels;
                        for (int ch = 0; ch < channels; ++ch)
                            d_ptr[ch] += c_ptr[ch];
                    }
                }
            }
        }
    }
}

struct ForwardState {
    MatF input;              // 3 x (128*128*N)
    std::vector<MatF> post;  // post-ReLU activations per conv stage
    MatF pooled;             // q x N
    MatF output;             // q x N
    int samples = 0;
};

void forward_into(const ConvNet& net, const MatF& input, ForwardState& state) {
    const int samples = static_cast<int>(input.cols() / (kPatch * kPatch));
    state.samples = samples;
    state.input = input;
    state.post.resize(net.conv.size());

    MatF cols;
    const MatF* cur = &state.input;
    int h = kPatch, w = kPatch;
    for (std::size_t l = 0; l < net.conv.size(); ++l) {
        const auto& layer = net.conv[l];
        im2col(*cur, layer.in_channels, h, w, samples, cols);
        state.post[l].noalias() = layer.weight * cols;
        state.post[l].colwise() += layer.bias;
        state.post[l] = state.post[l].cwiseMax(0.0f);
        cur = &state.post[l];
        h /= 2;
        w /= 2;
    }

    // Global average pooling per sample.
    const int hw = h * w;
    const int q = static_cast<int>(net.head.weight.rows());
    state.pooled.resize(net.conv.back().out_channels, samples);
    for (int s = 0; s < samples; ++s)
        state.pooled.col(s) =
            state.post.back().middleCols(static_cast<Eigen::Index>(s) * hw, hw).rowwise().mean();
    state.output.resize(q, samples);
    state.output.noalias() = net.head.weight * state.pooled;
    state.output.colwise() += net.head.bias;
}

struct Gradients {
    std::vector<MatF> conv_weight;
    std::vector<VecF> conv_bias;
    MatF head_weight;
    VecF head_bias;

    void init_like(const ConvNet& net) {
        conv_weight.resize(net.conv.size());
        conv_bias.resize(net.conv.size());
        for (std::size_t l = 0; l < net.conv.size(); ++l) {
            conv_weight[l].setZero(net.conv[l].weight.rows(), net.conv[l].weight.cols());
            conv_bias[l].setZero(net.conv[l].bias.size());
        }
        head_weight.setZero(net.head.weight.rows(), net.head.weight.cols());
        head_bias.setZero(net.head.bias.size());
    }
};

void backward(const ConvNet& net, const ForwardState& state, const MatF& d_output,
              Gradients& grads) {
    const int samples = state.samples;
    const int stages = static_cast<int>(net.conv.size());
    const int hw_last = spatial_after(stages) * spatial_after(stages);

    grads.head_weight.noalias() = d_output * state.pooled.transpose();
    grads.head_bias = d_output.rowwise().sum();

    MatF d_pooled = net.head.weight.transpose() * d_output;  // C_last x N

    // Undo pooling: every covered column receives mean-gradient / HW.
    MatF d_post(net.conv.back().out_channels, static_cast<Eigen::Index>(hw_last) * samples);
    const float inv_hw = 1.0f / static_cast<float>(hw_last);
    for (int s = 0; s < samples; ++s)
        for (int j = 0; j < hw_last; ++j)
            d_post.col(static_cast<Eigen::Index>(s) * hw_last + j) = d_pooled.col(s) * inv_hw;

    MatF cols, d_cols, d_in;
    for (int l = stages - 1; l >= 0; --l) {
        const auto& layer = net.conv[l];
        const MatF& in = l == 0 ? state.input : state.post[static_cast<std::size_t>(l - 1)];
        const int h = spatial_after(l), w = spatial_after(l);

        // ReLU mask at this stage's output.
        MatF d_pre = (state.post[static_cast<std::size_t>(l)].array() > 0.0f)
                         .select(d_post, MatF::Zero(d_post.rows(), d_post.cols()));

        im2col(in, layer.in_channels, h, w, samples, cols);
        grads.conv_weight[static_cast<std::size_t>(l)].noalias() = d_pre * cols.transpose();
        grads.conv_bias[static_cast<std::size_t>(l)] = d_pre.rowwise().sum();

        if (l == 0)
            break;  // no gradient needed past the image
        d_cols.noalias() = layer.weight.transpose() * d_pre;
        col2im(d_cols, layer.in_channels, h, w, samples, d_in);
        d_post = std::move(d_in);
    }
}

class Adam {
public:
    Adam(const ConvNet& net, const TrainConfig& cfg) : cfg_(cfg) {
        m_.init_like(net);
        v_.init_like(net);
    }

    void step(ConvNet& net, const Gradients& grads, double lr) {
        ++t_;
        const float b1 = static_cast<float>(cfg_.moment1);
        const float b2 = static_cast<float>(cfg_.moment2);
        const float eps = static_cast<float>(cfg_.adam_epsilon);
        const float corr1 = 1.0f / (1.0f - std::pow(b1, static_cast<float>(t_)));
        const float corr2 = 1.0f / (1.0f - std::pow(b2, static_cast<float>(t_)));
        const float alpha = static_cast<float>(lr);
        auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
            m.array() = b1 * m.array() + (1.0f - b1) * g.array();
            v.array() = b2 * v.array() + (1.0f - b2) * g.array().square();
            param.array() -=
                alpha * (m.array() * corr1) / ((v.array() * corr2).sqrt() + eps);
        };
        for (std::size_t l = 0; l < net.conv.size(); ++l) {
            update(net.conv[l].weight, m_.conv_weight[l], v_.conv_weight[l], grads.conv_weight[l]);
            update(net.conv[l].bias, m_.conv_bias[l], v_.conv_bias[l], grads.conv_bias[l]);
        }
        update(net.head.weight, m_.head_weight, v_.head_weight, grads.head_weight);
        update(net.head.bias, m_.head_bias, v_.head_bias, grads.head_bias);
    }

private:
    TrainConfig cfg_;
    Gradients m_, v_;
    long t_ = 0;
};

MatF patches_to_input(const std::vector<patchlab::Patch>& patches, std::size_t begin,
                      std::size_t end) {
    const int n = static_cast<int>(end - begin);
    MatF input(3, static_cast<Eigen::Index>(kPatch) * kPatch * n);
    for (int s = 0; s < n; ++s) {
        const auto& px = patches[begin + static_cast<std::size_t>(s)].pixels;
        const std::size_t off = static_cast<std::size_t>(s) * kPatch * kPatch;
        for (int c = 0; c < kPatch; ++c)
            for (int r = 0; r < kPatch; ++r) {
                const std::size_t col = off + static_cast<std::size_t>(c) * kPatch + r;
                for (int k = 0; k < 3; ++k)
                    input(k, static_cast<Eigen::Index>(col)) =
                        static_cast<float>(px.plane[k](r, c)) / 255.0f;
            }
    }
    return input;
}

Eigen::MatrixXd outputs_to_embeddings(const MatF& output) {
    Eigen::MatrixXd y = output.cast<double>().transpose();
    for (Eigen::Index i = 0; i < y.rows(); ++i)
        if (y.row(i).norm() == 0.0)
            y(i, 0) = 1e-12;  // model epsilon: keep cosine distances defined
    return y;
}

struct BatchEval {
    double loss = 0.0;
    Eigen::MatrixXd embeddings;
};

}  // namespace

std::size_t ConvNet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : conv)
        n += static_cast<std::size_t>(l.weight.size()) + static_cast<std::size_t>(l.bias.size());
    return n + static_cast<std::size_t>(head.weight.size()) +
           static_cast<std::size_t>(head.bias.size());
}

void ConvNet::flatten(std::vector<float>& out) const {
    out.clear();
    out.reserve(parameter_count());
    auto append = [&out](const auto& m) { out.insert(out.end(), m.data(), m.data() + m.size()); };
    for (const auto& l : conv) {
        append(l.weight);
        append(l.bias);
    }
    append(head.weight);
    append(head.bias);
}

void ConvNet::unflatten(const std::vector<float>& in) {
    if (in.size() != parameter_count())
        throw std::invalid_argument("ConvNet::unflatten: parameter count mismatch");
    std::size_t off = 0;
    auto take = [&](auto& m) {
        std::memcpy(m.data(), in.data() + off, sizeof(float) * static_cast<std::size_t>(m.size()));
        off += static_cast<std::size_t>(m.size());
    };
    for (auto& l : conv) {
        take(l.weight);
        take(l.bias);
    }
    take(head.weight);
    take(head.bias);
}

EmbeddingModel make_model(std::uint64_t seed, const std::vector<int>& conv_channels) {
    if (conv_channels.empty())
        throw std::invalid_argument("make_model: need at least one conv stage");
    EmbeddingModel model;
    model.init_seed = seed;
    Rng rng(mix_seed(seed, 0x3E7D01ULL));

    int in_ch = 3;
    for (int out_ch : conv_channels) {
        ConvLayer layer;
        layer.in_channels = in_ch;
        layer.out_channels = out_ch;
        layer.weight.resize(out_ch, 9 * in_ch);
        const double stddev = std::sqrt(2.0 / (9.0 * in_ch));
        for (Eigen::Index i = 0; i < layer.weight.size(); ++i)
            layer.weight(i) = static_cast<float>(stddev * rng.normal());
        layer.bias = VecF::Zero(out_ch);
        model.net.conv.push_back(std::move(layer));
        in_ch = out_ch;
    }

    const int q = metricspace::kEmbeddingDim;
    model.net.head.weight.resize(q, in_ch);
    const double limit = std::sqrt(6.0 / static_cast<double>(q + in_ch));
    for (Eigen::Index i = 0; i < model.net.head.weight.size(); ++i)
        model.net.head.weight(i) = static_cast<float>(rng.uniform(-limit, limit));
    model.net.head.bias = VecF::Zero(q);
    return model;
}

MatF forward(const ConvNet& net, const MatF& input) {
    ForwardState state;
    forward_into(net, input, state);
    return state.output;
}

Eigen::MatrixXd embed(const EmbeddingModel& model, const std::vector<patchlab::Patch>& patches) {
    for (const auto& p : patches)
        if (p.pixels.rows() != kPatch || p.pixels.cols() != kPatch)
            throw std::invalid_argument("embed: patches must be 128x128");
    Eigen::MatrixXd y(static_cast<Eigen::Index>(patches.size()), metricspace::kEmbeddingDim);
    for (std::size_t begin = 0; begin < patches.size(); begin += kEvalChunk) {
        const std::size_t end = std::min(patches.size(), begin + kEvalChunk);
        const MatF out = forward(model.net, patches_to_input(patches, begin, end));
        y.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin)) =
            outputs_to_embeddings(out);
    }
    return y;
}

double validation_roc_auc(const Eigen::MatrixXd& distances, const BoolMat& gt) {
    if (distances.rows() != distances.cols() || gt.rows() != distances.rows() ||
        gt.cols() != distances.cols())
        throw std::invalid_argument("validation_roc_auc: shape mismatch");
    const Eigen::Index n = distances.rows();
    std::vector<double> scores;
    std::vector<bool> positive;
    for (Eigen::Index i0 = 0; i0 < n; ++i0)
        for (Eigen::Index i1 = 0; i1 < i0; ++i1) {
            scores.push_back(distances(i0, i1));
            positive.push_back(gt(i0, i1));
        }
    Eigen::VectorXd s = Eigen::Map<Eigen::VectorXd>(scores.data(),
                                                    static_cast<Eigen::Index>(scores.size()));
    return ranking::roc_auc(s, positive);
}

TrainHistory train(EmbeddingModel& model, const batching::ImageProvider& provider,
                   const std::vector<std::size_t>& train_scenes,
                   const std::vector<std::size_t>& val_scenes, const TrainConfig& cfg) {
    if (train_scenes.empty() || val_scenes.empty())
        throw std::invalid_argument("train: scene sets must be nonempty");

    TrainHistory history;
    if (cfg.max_epochs == 0)
        return history;

    batching::EpochOptions train_opts;
    train_opts.filters = cfg.filters;
    train_opts.augment = true;
    batching::EpochOptions val_opts = train_opts;
    val_opts.augment = false;

    // Validation batches are frozen once and reused across all epochs.
    Rng val_rng(mix_seed(cfg.seed, 0x7A11DA7EULL));
    const std::vector<batching::MiniBatch> val_batches =
        batching::sample_epoch(provider, val_scenes, cfg.batch, val_rng, val_opts);
    if (val_batches.empty())
        throw std::invalid_argument("train: validation scenes yielded no batches");

    auto evaluate_batch = [&](const batching::MiniBatch& batch) {
        BatchEval eval;
        eval.embeddings = embed(model, batch.patches);
        eval.loss = metricspace::total_loss(eval.embeddings, batch.gt, cfg.eta);
        return eval;
    };

    Adam adam(model.net, cfg);
    Rng train_rng(mix_seed(cfg.seed, 0x7E41ULL));
    double lr = cfg.learning_rate;
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<float> best_params;
    model.net.flatten(best_params);
    int flat_epochs = 0;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        auto batches = batching::sample_epoch(provider, train_scenes, cfg.batch, train_rng,
                                              train_opts);
        if (batches.empty())
            throw std::runtime_error("train: no usable training batches");

        double train_loss = 0.0;
        for (const auto& batch : batches) {
            ForwardState state;
            forward_into(model.net, patches_to_input(batch.patches, 0, batch.patches.size()),
                         state);
            const Eigen::MatrixXd y = outputs_to_embeddings(state.output);
            const auto lg = metricspace::total_loss_with_grad(y, batch.gt, cfg.eta);
            train_loss += lg.loss;
            const MatF d_output = lg.grad.transpose().cast<float>();
            Gradients grads;
            grads.init_like(model.net);
            backward(model.net, state, d_output, grads);
            adam.step(model.net, grads, lr);
        }
        train_loss /= static_cast<double>(batches.size());

        // Validation: mean loss plus pooled-pair ROC AUC.
        double val_loss = 0.0;
        std::vector<double> pair_scores;
        std::vector<bool> pair_labels;
        for (const auto& batch : val_batches) {
            const BatchEval eval = evaluate_batch(batch);
            val_loss += eval.loss;
            const Eigen::MatrixXd d = metricspace::pairwise_distances(eval.embeddings);
            for (Eigen::Index i0 = 0; i0 < d.rows(); ++i0)
                for (Eigen::Index i1 = 0; i1 < i0; ++i1) {
                    pair_scores.push_back(d(i0, i1));
                    pair_labels.push_back(batch.gt(i0, i1));
                }
        }
        val_loss /= static_cast<double>(val_batches.size());
        const Eigen::VectorXd scores = Eigen::Map<Eigen::VectorXd>(
            pair_scores.data(), static_cast<Eigen::Index>(pair_scores.size()));
        const double val_auc = ranking::roc_auc(scores, pair_labels);

        history.epochs.push_back({train_loss, val_loss, val_auc, lr});

        if (val_loss < best_val) {
            best_val = val_loss;
            model.net.flatten(best_params);
            history.best_epoch = epoch;
            flat_epochs = 0;
        } else {
            ++flat_epochs;
            if (flat_epochs % cfg.plateau_patience == 0)
                lr *= cfg.lr_decay;
            if (flat_epochs >= cfg.early_stop_factor * cfg.plateau_patience)
                break;
        }
    }

    model.net.unflatten(best_params);
    return history;
}

void save_checkpoint(const std::filesystem::path& path, const EmbeddingModel& model,
                     const TrainConfig& cfg) {
    Json header;
    header["arch"] = model.arch;
    header["init_seed"] = model.init_seed;
    header["embedding_dim"] = metricspace::kEmbeddingDim;
    header["patch_size"] = kPatch;
    Json channels = Json::array();
    for (const auto& l : model.net.conv)
        channels.push_back(l.out_channels);
    header["conv_channels"] = channels;
    header["train_config"] = {
        {"learning_rate", cfg.learning_rate},
        {"moment1", cfg.moment1},
        {"moment2", cfg.moment2},
        {"adam_epsilon", cfg.adam_epsilon},
        {"plateau_patience", cfg.plateau_patience},
        {"lr_decay", cfg.lr_decay},
        {"early_stop_factor", cfg.early_stop_factor},
        {"max_epochs", cfg.max_epochs},
        {"eta", cfg.eta},
        {"seed", cfg.seed},
        {"n_scenes", cfg.batch.n_scenes},
        {"n_pipelines", cfg.batch.n_pipelines},
        {"n_patches", cfg.batch.n_patches},
    };
    const std::string header_str = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("save_checkpoint: cannot write " + path.string());
    out.write("CFCKPT01", 8);
    const std::uint64_t header_len = header_str.size();
    out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));

    std::vector<float> params;
    model.net.flatten(params);
    const std::uint64_t count = params.size();
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    out.write(reinterpret_cast<const char*>(params.data()),
              static_cast<std::streamsize>(params.size() * sizeof(float)));
    if (!out)
        throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

EmbeddingModel load_checkpoint(const std::filesystem::path& path, TrainConfig* cfg_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("load_checkpoint: cannot read " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, "CFCKPT01", 8) != 0)
        throw std::runtime_error("load_checkpoint: bad magic in " + path.string());
    std::uint64_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
    std::string header_str(header_len, '\0');
    in.read(header_str.data(), static_cast<std::streamsize>(header_len));
    const Json header = Json::parse(header_str);

    std::vector<int> channels;
    for (const auto& c : header.at("conv_channels"))
        channels.push_back(c.get<int>());
    EmbeddingModel model = make_model(header.at("init_seed").get<std::uint64_t>(), channels);
    model.arch = header.at("arch").get<std::string>();

    std::uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    std::vector<float> params(count);
    in.read(reinterpret_cast<char*>(params.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    if (!in)
        throw std::runtime_error("load_checkpoint: truncated file " + path.string());
    model.net.unflatten(params);

    if (cfg_out) {
        const Json& tc = header.at("train_config");
        cfg_out->learning_rate = tc.at("learning_rate").get<double>();
        cfg_out->moment1 = tc.at("moment1").get<double>();
        cfg_out->moment2 = tc.at("moment2").get<double>();
        cfg_out->adam_epsilon = tc.at("adam_epsilon").get<double>();
        cfg_out->plateau_patience = tc.at("plateau_patience").get<int>();
        cfg_out->lr_decay = tc.at("lr_decay").get<double>();
        cfg_out->early_stop_factor = tc.at("early_stop_factor").get<int>();
        cfg_out->max_epochs = tc.at("max_epochs").get<int>();
        cfg_out->eta = tc.at("eta").get<double>();
        cfg_out->seed = tc.at("seed").get<std::uint64_t>();
        cfg_out->batch.n_scenes = tc.at("n_scenes").get<int>();
        cfg_out->batch.n_pipelines = tc.at("n_pipelines").get<int>();
        cfg_out->batch.n_patches = tc.at("n_patches").get<int>();
    }
    return model;
}

void save_history(const std::filesystem::path& path, const TrainHistory& history) {
    Json j;
    j["best_epoch"] = history.best_epoch;
    j["epochs"] = Json::array();
    for (const auto& e : history.epochs)
        j["epochs"].push_back({{"train_loss", e.train_loss},
                               {"val_loss", e.val_loss},
                               {"val_auc", e.val_auc},
                               {"learning_rate", e.learning_rate}});
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("save_history: cannot write " + path.string());
    out << j.dump(2) << "\n";
}

}  // namespace chromaforge::embedder
