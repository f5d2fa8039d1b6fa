// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the chromaforge Project.

#include "chromaforge/localizer.hpp"

#include "chromaforge/imageio.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <stdexcept>

namespace chromaforge::localizer {

namespace {

using Json = nlohmann::json;

Eigen::MatrixXd normalized_rows(const Eigen::MatrixXd& embeddings) {
    Eigen::MatrixXd unit = embeddings;
    for (Eigen::Index i = 0; i < unit.rows(); ++i) {
        const double n = unit.row(i).norm();
        if (n == 0.0)
            throw std::invalid_argument("localizer: zero embedding");
        unit.row(i) /= n;
    }
    return unit;
}

// FNV-1a over the analysis inputs; good enough to key a local cache.
std::uint64_t fnv1a(const unsigned char* data, std::size_t n, std::uint64_t h) {
    for (std::size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t cache_key(const Image3u8& image, const std::string& model_id,
                        const AnalyzeOptions& opts) {
    std::uint64_t h = 1469598103934665603ULL;
    h = fnv1a(reinterpret_cast<const unsigned char*>(model_id.data()), model_id.size(), h);
    const std::int64_t geom[4] = {image.rows(), image.cols(), opts.stride,
                                  opts.analysis_larger_dim};
    h = fnv1a(reinterpret_cast<const unsigned char*>(geom), sizeof(geom), h);
    for (int k = 0; k < 3; ++k)
        h = fnv1a(image.plane[k].data(), static_cast<std::size_t>(image.plane[k].size()), h);
    return h;
}

bool load_cached(const std::filesystem::path& file, Eigen::MatrixXd& embeddings) {
    std::ifstream in(file, std::ios::binary);
    if (!in)
        return false;
    std::uint64_t rows = 0, cols = 0;
    in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
    in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
    if (!in || rows == 0 || cols == 0 || cols > 4096)
        return false;
    embeddings.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    in.read(reinterpret_cast<char*>(embeddings.data()),
            static_cast<std::streamsize>(rows * cols * sizeof(double)));
    return static_cast<bool>(in);
}

void store_cached(const std::filesystem::path& file, const Eigen::MatrixXd& embeddings) {
    std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    if (!out)
        return;  // cache is best-effort
    const std::uint64_t rows = static_cast<std::uint64_t>(embeddings.rows());
    const std::uint64_t cols = static_cast<std::uint64_t>(embeddings.cols());
    out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
    out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
    out.write(reinterpret_cast<const char*>(embeddings.data()),
              static_cast<std::streamsize>(rows * cols * sizeof(double)));
}

}  // namespace

std::string to_string(Aggregation a) {
    return a == Aggregation::medoid ? "medoid" : "meanshift";
}

Aggregation aggregation_from_string(const std::string& s) {
    if (s == "medoid")
        return Aggregation::medoid;
    if (s == "meanshift")
        return Aggregation::meanshift;
    throw std::invalid_argument("unknown aggregation: " + s);
}

Eigen::Index medoid_index(const Eigen::MatrixXd& embeddings) {
    if (embeddings.rows() == 0)
        throw std::invalid_argument("medoid: empty embedding set");
    const Eigen::MatrixXd unit = normalized_rows(embeddings);
    // sum_j d(y_i, y_j) = (n - sum_j cos(y_i, y_j)) / 2, so the medoid
    // maximizes the row sum of the unit-vector Gram matrix.
    const Eigen::VectorXd sums = unit * (unit.colwise().sum().transpose());
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < sums.size(); ++i)
        if (sums[i] > sums[best])
            best = i;
    return best;
}

metricspace::Embedding medoid(const Eigen::MatrixXd& embeddings) {
    return embeddings.row(medoid_index(embeddings));
}

Eigen::VectorXd inconsistency_scores(const Eigen::MatrixXd& embeddings,
                                     const metricspace::Embedding& mu) {
    Eigen::VectorXd scores(embeddings.rows());
    for (Eigen::Index i = 0; i < embeddings.rows(); ++i) {
        const metricspace::Embedding yi = embeddings.row(i);
        scores[i] = metricspace::distance<double>(mu, yi);
    }
    return scores;
}

Eigen::VectorXd meanshift_scores(const Eigen::MatrixXd& embeddings, double bandwidth) {
    const Eigen::Index n = embeddings.rows();
    if (n == 0)
        throw std::invalid_argument("meanshift_scores: empty embedding set");
    const Eigen::MatrixXd unit = normalized_rows(embeddings);

    // Flat kernel over cosine distance d = (1 - s)/2: neighbors satisfy
    // s >= 1 - 2*bandwidth. All modes iterate in lockstep until converged.
    const double sim_floor = 1.0 - 2.0 * bandwidth;
    Eigen::MatrixXd modes = unit;
    constexpr int kMaxIter = 100;
    constexpr double kTol = 1e-8;
    for (int iter = 0; iter < kMaxIter; ++iter) {
        const Eigen::MatrixXd sims = modes * unit.transpose();  // n x n
        Eigen::MatrixXd next(n, modes.cols());
        double shift = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(modes.cols());
            int count = 0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (sims(i, j) >= sim_floor) {
                    mean += unit.row(j);
                    ++count;
                }
            }
            if (count == 0 || mean.norm() == 0.0) {
                next.row(i) = modes.row(i);
                continue;
            }
            next.row(i) = mean / mean.norm();
            shift = std::max(shift, 1.0 - next.row(i).dot(modes.row(i)));
        }
        modes = std::move(next);
        if (shift < kTol)
            break;
    }

    // Group converged modes, pick the most populated one (first on ties).
    constexpr double kMergeSim = 1.0 - 1e-6;
    std::vector<Eigen::Index> representative;
    std::vector<int> counts;
    std::vector<int> assignment(static_cast<std::size_t>(n), -1);
    for (Eigen::Index i = 0; i < n; ++i) {
        int cluster = -1;
        for (std::size_t c = 0; c < representative.size(); ++c) {
            if (modes.row(i).dot(modes.row(representative[c])) >= kMergeSim) {
                cluster = static_cast<int>(c);
                break;
            }
        }
        if (cluster < 0) {
            representative.push_back(i);
            counts.push_back(0);
            cluster = static_cast<int>(representative.size()) - 1;
        }
        assignment[static_cast<std::size_t>(i)] = cluster;
        counts[static_cast<std::size_t>(cluster)] += 1;
    }
    int best_cluster = 0;
    for (std::size_t c = 1; c < counts.size(); ++c)
        if (counts[c] > counts[static_cast<std::size_t>(best_cluster)])
            best_cluster = static_cast<int>(c);

    const Eigen::RowVectorXd mode = modes.row(representative[static_cast<std::size_t>(best_cluster)]);
    Eigen::VectorXd scores(n);
    for (Eigen::Index i = 0; i < n; ++i)
        scores[i] = 0.5 * (1.0 - mode.dot(unit.row(i)));
    return scores.cwiseMax(0.0).cwiseMin(1.0);
}

Heatmap project_heatmap(const Eigen::VectorXd& scores,
                        const std::vector<std::pair<int, int>>& centers, Eigen::Index grid_rows,
                        Eigen::Index grid_cols, Eigen::Index image_rows, Eigen::Index image_cols,
                        int patch_size, int stride) {
    if (static_cast<std::size_t>(scores.size()) != centers.size())
        throw std::invalid_argument("project_heatmap: scores/centers size mismatch");
    if (grid_rows < patch_size || grid_cols < patch_size)
        throw std::invalid_argument("project_heatmap: grid smaller than a patch");

    Eigen::ArrayXXd sum = Eigen::ArrayXXd::Zero(grid_rows, grid_cols);
    Eigen::ArrayXXd cover = Eigen::ArrayXXd::Zero(grid_rows, grid_cols);
    for (std::size_t i = 0; i < centers.size(); ++i) {
        const int top = centers[i].first - patch_size / 2;
        const int left = centers[i].second - patch_size / 2;
        if (top < 0 || left < 0 || top + patch_size > grid_rows || left + patch_size > grid_cols)
            throw std::invalid_argument("project_heatmap: patch footprint outside grid");
        sum.block(top, left, patch_size, patch_size) += scores[static_cast<Eigen::Index>(i)];
        cover.block(top, left, patch_size, patch_size) += 1.0;
    }

    Eigen::ArrayXXd grid = Eigen::ArrayXXd::Zero(grid_rows, grid_cols);
    std::vector<std::pair<Eigen::Index, Eigen::Index>> frontier;
    BoolMat seen = BoolMat::Constant(grid_rows, grid_cols, false);
    for (Eigen::Index c = 0; c < grid_cols; ++c)
        for (Eigen::Index r = 0; r < grid_rows; ++r)
            if (cover(r, c) > 0.0) {
                grid(r, c) = sum(r, c) / cover(r, c);
                seen(r, c) = true;
                frontier.emplace_back(r, c);
            }
    // Uncovered pixels inherit the nearest covered value (multi-source BFS).
    while (!frontier.empty()) {
        std::vector<std::pair<Eigen::Index, Eigen::Index>> next;
        for (const auto& [r, c] : frontier) {
            constexpr int dr[4] = {-1, 1, 0, 0};
            constexpr int dc[4] = {0, 0, -1, 1};
            for (int d = 0; d < 4; ++d) {
                const Eigen::Index nr = r + dr[d], nc = c + dc[d];
                if (nr < 0 || nr >= grid_rows || nc < 0 || nc >= grid_cols || seen(nr, nc))
                    continue;
                seen(nr, nc) = true;
                grid(nr, nc) = grid(r, c);
                next.emplace_back(nr, nc);
            }
        }
        frontier = std::move(next);
    }

    Heatmap map;
    map.stride = stride;
    map.values = resize_bilinear_plane(grid, image_rows, image_cols).cwiseMax(0.0).cwiseMin(1.0);
    return map;
}

double detection_score(const Heatmap& heatmap) {
    return heatmap.values.mean();
}

AnalysisReport analyze(const Image3u8& image, const embedder::EmbeddingModel& model,
                       const AnalyzeOptions& opts) {
    const Image3u8 resized = resize_larger_dim(image, opts.analysis_larger_dim);
    if (resized.rows() < patchlab::kPatchSize || resized.cols() < patchlab::kPatchSize)
        throw std::invalid_argument("analyze: image too small after analysis resize");

    std::vector<patchlab::Patch> patches = patchlab::extract_patches(resized, opts.stride);
    std::vector<std::pair<int, int>> centers;
    centers.reserve(patches.size());
    std::vector<bool> admitted(patches.size(), false);
    std::vector<patchlab::Patch> kept;
    for (std::size_t i = 0; i < patches.size(); ++i) {
        centers.emplace_back(patches[i].row, patches[i].col);
        // Per-patch admission at analysis time: color variation and exposure;
        // the cross-pipeline Lab floor has no peers here.
        if (patchlab::has_color_variation(patches[i]) &&
            !patchlab::is_overexposed(patches[i], opts.filters) &&
            !patchlab::is_underexposed(patches[i], opts.filters)) {
            admitted[i] = true;
            kept.push_back(std::move(patches[i]));
        }
    }

    Eigen::VectorXd scores = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(patches.size()));
    if (!kept.empty()) {
        Eigen::MatrixXd embeddings;
        bool cached = false;
        std::filesystem::path cache_file;
        if (!opts.cache_dir.empty()) {
            char hex[17];
            std::snprintf(hex, sizeof(hex), "%016llx",
                          static_cast<unsigned long long>(cache_key(image, model.model_id(), opts)));
            cache_file = opts.cache_dir / (std::string(hex) + ".emb");
            cached = load_cached(cache_file, embeddings) &&
                     embeddings.rows() == static_cast<Eigen::Index>(kept.size());
        }
        if (!cached) {
            embeddings = embedder::embed(model, kept);
            if (!cache_file.empty())
                store_cached(cache_file, embeddings);
        }

        Eigen::VectorXd kept_scores;
        if (opts.aggregation == Aggregation::medoid)
            kept_scores = inconsistency_scores(embeddings, medoid(embeddings));
        else
            kept_scores = meanshift_scores(embeddings, opts.meanshift_bandwidth);
        Eigen::Index j = 0;
        for (std::size_t i = 0; i < admitted.size(); ++i)
            if (admitted[i])
                scores[static_cast<Eigen::Index>(i)] = kept_scores[j++];
    }

    AnalysisReport report;
    report.n_patches = static_cast<int>(admitted.size());
    report.n_filtered = report.n_patches - static_cast<int>(kept.size());
    report.heatmap = project_heatmap(scores, centers, resized.rows(), resized.cols(), image.rows(),
                                     image.cols(), patchlab::kPatchSize, opts.stride);
    report.heatmap.model_id = model.model_id();
    report.heatmap.aggregation = opts.aggregation;
    report.heatmap.stride = opts.stride;
    report.detection_score = detection_score(report.heatmap);
    return report;
}

void write_heatmap(const std::filesystem::path& prefix, const AnalysisReport& report) {
    const auto& h = report.heatmap;
    png_write_gray(prefix.string() + ".png", h.values);

    std::ofstream raw(prefix.string() + ".f32", std::ios::binary);
    if (!raw)
        throw std::runtime_error("write_heatmap: cannot write raw grid");
    std::vector<float> row_major(static_cast<std::size_t>(h.values.size()));
    for (Eigen::Index r = 0; r < h.values.rows(); ++r)
        for (Eigen::Index c = 0; c < h.values.cols(); ++c)
            row_major[static_cast<std::size_t>(r) * h.values.cols() + c] =
                static_cast<float>(h.values(r, c));
    raw.write(reinterpret_cast<const char*>(row_major.data()),
              static_cast<std::streamsize>(row_major.size() * sizeof(float)));

    Json sidecar;
    sidecar["height"] = h.values.rows();
    sidecar["width"] = h.values.cols();
    sidecar["stride"] = h.stride;
    sidecar["aggregation"] = to_string(h.aggregation);
    sidecar["model_id"] = h.model_id;
    sidecar["detection_score"] = report.detection_score;
    std::ofstream meta(prefix.string() + ".json");
    meta << sidecar.dump(2) << "\n";
}

Eigen::ArrayXXd read_heatmap_grid(const std::filesystem::path& raw_path,
                                  const std::filesystem::path& json_path) {
    std::ifstream meta(json_path);
    if (!meta)
        throw std::runtime_error("read_heatmap_grid: cannot read " + json_path.string());
    const Json sidecar = Json::parse(meta);
    const Eigen::Index rows = sidecar.at("height").get<Eigen::Index>();
    const Eigen::Index cols = sidecar.at("width").get<Eigen::Index>();

    std::ifstream raw(raw_path, std::ios::binary);
    if (!raw)
        throw std::runtime_error("read_heatmap_grid: cannot read " + raw_path.string());
    std::vector<float> row_major(static_cast<std::size_t>(rows * cols));
    raw.read(reinterpret_cast<char*>(row_major.data()),
             static_cast<std::streamsize>(row_major.size() * sizeof(float)));
    if (!raw)
        throw std::runtime_error("read_heatmap_grid: truncated " + raw_path.string());
    Eigen::ArrayXXd grid(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            grid(r, c) = row_major[static_cast<std::size_t>(r) * cols + c];
    return grid;
}

}  // namespace chromaforge::localizer
