// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the chromaforge Project.

#include "chromaforge/evalkit.hpp"

#include "chromaforge/imageio.hpp"
#include "chromaforge/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <thread>

namespace chromaforge::evalkit {

namespace {

using Json = nlohmann::json;

struct Confusion {
    double tp = 0, tn = 0, fp = 0, fn = 0;
};

double mcc_from_counts(const Confusion& c) {
    const double denom =
        (c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn);
    if (denom == 0.0)
        return 0.0;
    return (c.tp * c.tn - c.fp * c.fn) / std::sqrt(denom);
}

// Best MCC over the distinct values of `scores` as thresholds (prediction:
// score > threshold), sweeping from strict to permissive.
std::pair<double, double> sweep_best_mcc(std::vector<std::pair<double, bool>>& items,
                                         double n_pos, double n_neg) {
    std::sort(items.begin(), items.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    double best = -2.0, best_threshold = 0.0;
    double tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < items.size()) {
        // Threshold equal to this group's value: strictly larger values are
        // already classified positive.
        Confusion c{tp, n_neg - fp, fp, n_pos - tp};
        const double m = mcc_from_counts(c);
        if (m > best) {
            best = m;
            best_threshold = items[i].first;
        }
        std::size_t j = i;
        while (j < items.size() && items[j].first == items[i].first) {
            (items[j].second ? tp : fp) += 1.0;
            ++j;
        }
        i = j;
    }
    return {best, best_threshold};
}

Eigen::VectorXd flatten(const Eigen::ArrayXXd& a) {
    return Eigen::Map<const Eigen::VectorXd>(a.data(), a.size());
}

}  // namespace

double mcc(const BinaryMask& pred, const BinaryMask& gt) {
    if (pred.rows() != gt.rows() || pred.cols() != gt.cols())
        throw std::invalid_argument("mcc: shape mismatch");
    Confusion c;
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
        if (pred(i) && gt(i))
            c.tp += 1;
        else if (pred(i) && !gt(i))
            c.fp += 1;
        else if (!pred(i) && gt(i))
            c.fn += 1;
        else
            c.tn += 1;
    }
    return mcc_from_counts(c);
}

BestMcc best_mcc_over_thresholds(const Eigen::ArrayXXd& heatmap, const BinaryMask& gt) {
    if (heatmap.rows() != gt.rows() || heatmap.cols() != gt.cols())
        throw std::invalid_argument("best_mcc_over_thresholds: shape mismatch");
    const Eigen::Index n_pos_i = gt.count();
    if (n_pos_i == 0 || n_pos_i == gt.size())
        throw UndefinedMetricError("best_mcc_over_thresholds: single-class ground truth");
    const double n_pos = static_cast<double>(n_pos_i);
    const double n_neg = static_cast<double>(gt.size() - n_pos_i);

    std::vector<std::pair<double, bool>> items(static_cast<std::size_t>(heatmap.size()));
    for (Eigen::Index i = 0; i < heatmap.size(); ++i)
        items[static_cast<std::size_t>(i)] = {heatmap(i), gt(i)};
    auto [m_plain, t_plain] = sweep_best_mcc(items, n_pos, n_neg);

    for (Eigen::Index i = 0; i < heatmap.size(); ++i)
        items[static_cast<std::size_t>(i)] = {1.0 - heatmap(i), gt(i)};
    auto [m_inv, t_inv] = sweep_best_mcc(items, n_pos, n_neg);

    BestMcc out;
    if (m_inv > m_plain) {
        out.mcc = m_inv;
        out.threshold = t_inv;
        out.inverted = true;
    } else {
        out.mcc = m_plain;
        out.threshold = t_plain;
        out.inverted = false;
    }
    return out;
}

double roc_auc(const Eigen::VectorXd& scores, const std::vector<bool>& positive) {
    return ranking::roc_auc(scores, positive);
}

double tpr_at_far(const Eigen::VectorXd& scores, const std::vector<bool>& positive, double far) {
    return ranking::tpr_at_far(scores, positive, far);
}

PrecisionRecall precision_recall_at(const Eigen::VectorXd& scores,
                                    const std::vector<bool>& positive, double threshold) {
    if (static_cast<std::size_t>(scores.size()) != positive.size())
        throw std::invalid_argument("precision_recall_at: label count mismatch");
    double tp = 0, fp = 0, fn = 0;
    for (Eigen::Index i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] > threshold;
        const bool truth = positive[static_cast<std::size_t>(i)];
        if (pred && truth)
            tp += 1;
        else if (pred && !truth)
            fp += 1;
        else if (!pred && truth)
            fn += 1;
    }
    PrecisionRecall pr;
    if (tp + fp > 0)
        pr.precision = tp / (tp + fp);
    if (tp + fn > 0)
        pr.recall = tp / (tp + fn);
    return pr;
}

double angular_error(const Eigen::Vector3d& w, const Eigen::Vector3d& w_star) {
    const double nw = w.norm(), ns = w_star.norm();
    if (nw == 0.0 || ns == 0.0)
        throw std::invalid_argument("angular_error: zero vector");
    const double arg = std::min(1.0, std::max(-1.0, w.dot(w_star) / (nw * ns)));
    return std::acos(arg) * 180.0 / M_PI;
}

std::string DegradationSpec::label() const {
    std::string q = jpeg_quality ? "Q" + std::to_string(*jpeg_quality) : "Qid";
    if (resize_to_larger_dim)
        return "dim" + std::to_string(*resize_to_larger_dim) + "_" + q;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "f%.2f_", resize_factor);
    return buf + q;
}

DegradationSpec DegradationSpec::variant(const std::string& name) {
    if (name == "hq")
        return hq();
    if (name == "mq")
        return mq();
    if (name == "lq")
        return lq();
    throw std::invalid_argument("unknown degradation variant: " + name);
}

Image3u8 degrade(const Image3u8& image, const DegradationSpec& spec) {
    Image3u8 out = image;
    if (spec.resize_to_larger_dim) {
        out = resize_larger_dim(out, *spec.resize_to_larger_dim);
    } else if (spec.resize_factor != 1.0) {
        if (spec.resize_factor <= 0.0)
            throw std::invalid_argument("degrade: resize factor must be positive");
        const Eigen::Index rows =
            std::max<Eigen::Index>(1, std::llround(image.rows() * spec.resize_factor));
        const Eigen::Index cols =
            std::max<Eigen::Index>(1, std::llround(image.cols() * spec.resize_factor));
        out = resize_bilinear(out, rows, cols);
    }
    if (spec.jpeg_quality)
        out = jpeg_roundtrip(out, *spec.jpeg_quality);
    return out;
}

std::vector<SplicedItem> build_spliced_dataset(int n, std::uint64_t seed,
                                               const SplicedDatasetOptions& opts) {
    if (n < 1)
        throw std::invalid_argument("build_spliced_dataset: n must be >= 1");
    const auto pipelines = colorpipe::enumerate_pipelines(seed);

    std::vector<SplicedItem> items;
    items.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Rng rng(mix_seed(seed, 0x5000000ULL + static_cast<std::uint64_t>(i)));
        bool built = false;
        for (int attempt = 0; attempt < opts.max_scene_retries && !built; ++attempt) {
            const std::uint64_t scene_seed = rng.next_u64();
            const auto scene = colorpipe::synthesize_scene(scene_seed, opts.height, opts.width);
            const std::size_t a = rng.uniform_int(pipelines.size());
            std::size_t b = rng.uniform_int(pipelines.size() - 1);
            if (b >= a)
                ++b;
            const auto dev_a = colorpipe::develop(scene, pipelines[a]);
            const auto dev_b = colorpipe::develop(scene, pipelines[b]);

            Eigen::ArrayXXi labels;
            if (opts.rectangle_fallback) {
                labels = Eigen::ArrayXXi::Zero(opts.height, opts.width);
                const int min_side = static_cast<int>(std::ceil(std::sqrt(
                    static_cast<double>(opts.min_region_pixels))));
                const int rh = rng.uniform_int(std::min(min_side, opts.height - 1), opts.height - 1);
                const int rw = std::max<int>(
                    static_cast<int>((opts.min_region_pixels + rh - 1) / rh),
                    rng.uniform_int(1, opts.width - 1));
                if (rh >= opts.height || rw >= opts.width)
                    continue;
                const int top = rng.uniform_int(0, opts.height - rh - 1);
                const int left = rng.uniform_int(0, opts.width - rw - 1);
                labels.block(top, left, rh, rw).setConstant(1);
            } else {
                labels = segmentation::felzenszwalb_segment(dev_a.pixels, opts.fh);
            }

            const Eigen::ArrayXXd dist = patchlab::lab_distance_map(
                patchlab::rgb_to_lab(dev_a.pixels), patchlab::rgb_to_lab(dev_b.pixels));
            const int n_segments = labels.maxCoeff() + 1;
            std::vector<long long> seg_size(static_cast<std::size_t>(n_segments), 0);
            std::vector<double> seg_dist(static_cast<std::size_t>(n_segments), 0.0);
            for (Eigen::Index p = 0; p < labels.size(); ++p) {
                seg_size[static_cast<std::size_t>(labels(p))] += 1;
                seg_dist[static_cast<std::size_t>(labels(p))] += dist(p);
            }
            std::vector<int> candidates;
            // The fallback's label 0 is the complement, not a real segment.
            for (int s = opts.rectangle_fallback ? 1 : 0; s < n_segments; ++s)
                if (seg_size[static_cast<std::size_t>(s)] >= opts.min_region_pixels &&
                    seg_dist[static_cast<std::size_t>(s)] /
                            static_cast<double>(seg_size[static_cast<std::size_t>(s)]) >=
                        opts.min_lab_distance)
                    candidates.push_back(s);
            if (candidates.empty())
                continue;

            const int chosen = candidates[rng.uniform_int(candidates.size())];
            SplicedItem item;
            item.item_id = "splice_" + std::to_string(seed) + "_" + std::to_string(i);
            item.pristine = dev_a.pixels;
            item.pipeline_a = pipelines[a].id();
            item.pipeline_b = pipelines[b].id();
            item.mask = (labels == chosen);
            item.spliced = dev_a.pixels;
            for (Eigen::Index p = 0; p < labels.size(); ++p)
                if (item.mask(p))
                    for (int k = 0; k < 3; ++k)
                        item.spliced.plane[k](p) = dev_b.pixels.plane[k](p);
            items.push_back(std::move(item));
            built = true;
        }
        if (!built)
            throw std::runtime_error("build_spliced_dataset: no qualifying segment after retries");
    }
    return items;
}

void write_spliced_dataset(const std::filesystem::path& root,
                           const std::vector<SplicedItem>& items) {
    for (const auto& item : items) {
        const auto dir = root / item.item_id;
        std::filesystem::create_directories(dir);
        png_write(dir / "spliced.png", item.spliced);
        png_write(dir / "pristine.png", item.pristine);
        png_write_gray(dir / "mask.png", item.mask.cast<double>());
        Json meta;
        meta["item_id"] = item.item_id;
        meta["pipeline_a"] = item.pipeline_a;
        meta["pipeline_b"] = item.pipeline_b;
        std::ofstream out(dir / "meta.json");
        out << meta.dump(2) << "\n";
    }
}

std::vector<SplicedItem> load_spliced_dataset(const std::filesystem::path& root) {
    std::vector<std::string> ids;
    for (const auto& entry : std::filesystem::directory_iterator(root))
        if (entry.is_directory() && std::filesystem::exists(entry.path() / "spliced.png"))
            ids.push_back(entry.path().filename().string());
    std::sort(ids.begin(), ids.end());
    if (ids.empty())
        throw std::runtime_error("load_spliced_dataset: no items under " + root.string());

    std::vector<SplicedItem> items;
    items.reserve(ids.size());
    for (const auto& id : ids) {
        const auto dir = root / id;
        SplicedItem item;
        item.item_id = id;
        item.spliced = png_read(dir / "spliced.png");
        item.pristine = png_read(dir / "pristine.png");
        const Image3u8 mask_img = png_read(dir / "mask.png");
        item.mask = mask_img.plane[0] > static_cast<std::uint8_t>(127);
        std::ifstream meta_in(dir / "meta.json");
        if (meta_in) {
            const Json meta = Json::parse(meta_in);
            item.pipeline_a = meta.value("pipeline_a", "");
            item.pipeline_b = meta.value("pipeline_b", "");
        }
        items.push_back(std::move(item));
    }
    return items;
}

EvalSummary evaluate_spliced(const embedder::EmbeddingModel& model,
                             const std::vector<SplicedItem>& items, const DegradationSpec& spec,
                             const localizer::AnalyzeOptions& analyze_opts,
                             std::vector<EvalRow>* rows_out, int jobs) {
    EvalSummary summary;
    summary.variant = spec.label();
    summary.n_items = static_cast<int>(items.size());

    std::vector<EvalRow> rows(items.size());
    auto eval_item = [&](std::size_t idx) {
        const auto& item = items[idx];
        const Image3u8 spliced_d = degrade(item.spliced, spec);
        const Image3u8 pristine_d = degrade(item.pristine, spec);
        const auto rep_s = localizer::analyze(spliced_d, model, analyze_opts);
        const auto rep_p = localizer::analyze(pristine_d, model, analyze_opts);

        Eigen::ArrayXXd heat = rep_s.heatmap.values;
        if (heat.rows() != item.mask.rows() || heat.cols() != item.mask.cols())
            heat = resize_bilinear_plane(heat, item.mask.rows(), item.mask.cols());

        const BestMcc best = best_mcc_over_thresholds(heat, item.mask);
        std::vector<bool> pixel_labels(static_cast<std::size_t>(item.mask.size()));
        for (Eigen::Index p = 0; p < item.mask.size(); ++p)
            pixel_labels[static_cast<std::size_t>(p)] = item.mask(p);
        const PrecisionRecall pr = precision_recall_at(flatten(heat), pixel_labels, 0.3);

        EvalRow row;
        row.item_id = item.item_id;
        row.variant = summary.variant;
        row.mcc = best.mcc;
        row.threshold = best.threshold;
        row.inverted = best.inverted;
        row.precision = pr.precision;
        row.recall = pr.recall;
        row.gamma_spliced = rep_s.detection_score;
        row.gamma_pristine = rep_p.detection_score;
        rows[idx] = std::move(row);
    };

    if (jobs <= 1) {
        for (std::size_t i = 0; i < items.size(); ++i)
            eval_item(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        const int n_workers = std::min<int>(jobs, static_cast<int>(items.size()));
        workers.reserve(static_cast<std::size_t>(n_workers));
        for (int w = 0; w < n_workers; ++w)
            workers.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < items.size(); i = next.fetch_add(1))
                    eval_item(i);
            });
        for (auto& t : workers)
            t.join();
    }

    std::vector<double> gammas;
    std::vector<bool> gamma_labels;
    double mcc_sum = 0.0, prec_sum = 0.0, rec_sum = 0.0;
    int prec_count = 0, rec_count = 0;
    for (const auto& row : rows) {
        if (rows_out)
            rows_out->push_back(row);
        mcc_sum += row.mcc;
        if (row.precision) {
            prec_sum += *row.precision;
            ++prec_count;
        }
        if (row.recall) {
            rec_sum += *row.recall;
            ++rec_count;
        }
        gammas.push_back(row.gamma_spliced);
        gamma_labels.push_back(true);
        gammas.push_back(row.gamma_pristine);
        gamma_labels.push_back(false);
    }

    summary.mean_mcc = items.empty() ? 0.0 : mcc_sum / static_cast<double>(items.size());
    summary.mean_precision = prec_count ? prec_sum / prec_count : 0.0;
    summary.mean_recall = rec_count ? rec_sum / rec_count : 0.0;
    if (!gammas.empty()) {
        const Eigen::VectorXd g =
            Eigen::Map<Eigen::VectorXd>(gammas.data(), static_cast<Eigen::Index>(gammas.size()));
        summary.detection_auc = ranking::roc_auc(g, gamma_labels);
        summary.detection_tpr_at_far = ranking::tpr_at_far(g, gamma_labels, 0.05);
    }
    return summary;
}

void write_eval_csv(const std::filesystem::path& path, const std::vector<EvalRow>& rows) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("write_eval_csv: cannot write " + path.string());
    out << "item_id,variant,mcc,threshold,inverted,precision,recall,gamma_spliced,gamma_pristine\n";
    out.precision(17);
    for (const auto& r : rows) {
        out << r.item_id << ',' << r.variant << ',' << r.mcc << ',' << r.threshold << ','
            << (r.inverted ? 1 : 0) << ',';
        if (r.precision)
            out << *r.precision;
        else
            out << "undefined";
        out << ',';
        if (r.recall)
            out << *r.recall;
        else
            out << "undefined";
        out << ',' << r.gamma_spliced << ',' << r.gamma_pristine << '\n';
    }
}

void write_eval_summary(const std::filesystem::path& path, const EvalSummary& summary) {
    Json j;
    j["variant"] = summary.variant;
    j["n_items"] = summary.n_items;
    j["mean_mcc"] = summary.mean_mcc;
    j["detection_auc"] = summary.detection_auc;
    j["detection_tpr_at_5far"] = summary.detection_tpr_at_far;
    j["mean_precision"] = summary.mean_precision;
    j["mean_recall"] = summary.mean_recall;
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("write_eval_summary: cannot write " + path.string());
    out << j.dump(2) << "\n";
}

namespace {

struct PairData {
    Image3u8 base_a, base_b;  // clean images at original resolution
    std::vector<std::pair<int, int>> pos_a, pos_b;  // top-left, analysis scale
    std::vector<std::pair<int, int>> cross_pairs;   // indices into pos_a/pos_b
};

std::vector<std::pair<int, int>> draw_positions(const Image3u8& clean, int count, int max_draws,
                                                const patchlab::FilterParams& filters, Rng& rng) {
    std::vector<std::pair<int, int>> positions;
    const int max_top = static_cast<int>(clean.rows()) - patchlab::kPatchSize;
    const int max_left = static_cast<int>(clean.cols()) - patchlab::kPatchSize;
    if (max_top < 0 || max_left < 0)
        return positions;
    for (int d = 0; d < max_draws && positions.size() < static_cast<std::size_t>(count); ++d) {
        const int top = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(max_top + 1)));
        const int left = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(max_left + 1)));
        const patchlab::Patch p = patchlab::cut_patch(clean, top, left);
        if (patchlab::has_color_variation(p) && !patchlab::is_overexposed(p, filters) &&
            !patchlab::is_underexposed(p, filters))
            positions.emplace_back(top, left);
    }
    return positions;
}

std::vector<patchlab::Patch> cut_at(const Image3u8& image,
                                    const std::vector<std::pair<int, int>>& positions) {
    std::vector<patchlab::Patch> patches;
    patches.reserve(positions.size());
    const int max_top = static_cast<int>(image.rows()) - patchlab::kPatchSize;
    const int max_left = static_cast<int>(image.cols()) - patchlab::kPatchSize;
    for (const auto& [top, left] : positions)
        patches.push_back(
            patchlab::cut_patch(image, std::min(top, max_top), std::min(left, max_left)));
    return patches;
}

}  // namespace

RobustnessGrid robustness_grid(const embedder::EmbeddingModel& model,
                               const batching::ImageProvider& provider,
                               const std::vector<double>& resize_factors,
                               const std::vector<std::optional<int>>& jpeg_qualities,
                               const RobustnessOptions& opts) {
    if (resize_factors.empty() || jpeg_qualities.empty())
        throw std::invalid_argument("robustness_grid: empty degradation axes");

    Rng rng(mix_seed(opts.seed, 0x60B057ULL));

    // Image pairs with positions and cross-pair sets fixed on clean images.
    std::vector<std::size_t> scene_order(provider.scene_count());
    std::iota(scene_order.begin(), scene_order.end(), 0);
    rng.shuffle(scene_order);

    std::vector<PairData> pairs;
    std::size_t cursor = 0;
    auto next_scene = [&]() {
        const std::size_t s = scene_order[cursor % scene_order.size()];
        ++cursor;
        return s;
    };
    for (int p = 0; p < opts.n_pairs; ++p) {
        PairData pd;
        if (opts.mode == RobustnessMode::different_scenes) {
            const std::size_t s0 = next_scene();
            std::size_t s1 = next_scene();
            while (s1 == s0)
                s1 = next_scene();
            pd.base_a = provider.image(s0, rng.uniform_int(provider.pipeline_count()));
            pd.base_b = provider.image(s1, rng.uniform_int(provider.pipeline_count()));
        } else {
            const std::size_t s = next_scene();
            const std::size_t c0 = rng.uniform_int(provider.pipeline_count());
            std::size_t c1 = rng.uniform_int(provider.pipeline_count() - 1);
            if (c1 >= c0)
                ++c1;
            pd.base_a = provider.image(s, c0);
            pd.base_b = provider.image(s, c1);
        }

        const Image3u8 clean_a = resize_larger_dim(pd.base_a, opts.analysis_larger_dim);
        const Image3u8 clean_b = resize_larger_dim(pd.base_b, opts.analysis_larger_dim);
        pd.pos_a = draw_positions(clean_a, opts.patches_per_image, opts.max_position_draws,
                                  opts.filters, rng);
        pd.pos_b = draw_positions(clean_b, opts.patches_per_image, opts.max_position_draws,
                                  opts.filters, rng);

        if (opts.mode == RobustnessMode::different_scenes || opts.min_lab <= 0.0) {
            for (std::size_t i = 0; i < pd.pos_a.size(); ++i)
                for (std::size_t j = 0; j < pd.pos_b.size(); ++j)
                    pd.cross_pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
        } else {
            // Keep cross pairs whose clean-image Lab distance clears the floor.
            std::vector<Image3d> lab_a, lab_b;
            for (const auto& pos : pd.pos_a)
                lab_a.push_back(patchlab::rgb_to_lab(
                    patchlab::cut_patch(clean_a, pos.first, pos.second)));
            for (const auto& pos : pd.pos_b)
                lab_b.push_back(patchlab::rgb_to_lab(
                    patchlab::cut_patch(clean_b, pos.first, pos.second)));
            for (std::size_t i = 0; i < lab_a.size(); ++i)
                for (std::size_t j = 0; j < lab_b.size(); ++j)
                    if (patchlab::lab_distance(lab_a[i], lab_b[j]) >= opts.min_lab)
                        pd.cross_pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
        }
        pairs.push_back(std::move(pd));
    }

    std::size_t total_cross = 0;
    for (const auto& pd : pairs)
        total_cross += pd.cross_pairs.size();
    if (total_cross < 50)
        throw std::runtime_error("robustness_grid: too few dissimilar pairs after Lab floor");

    RobustnessGrid grid;
    grid.resize_factors = resize_factors;
    grid.jpeg_qualities = jpeg_qualities;
    grid.tpr.resize(static_cast<Eigen::Index>(resize_factors.size()),
                    static_cast<Eigen::Index>(jpeg_qualities.size()));

    for (std::size_t fi = 0; fi < resize_factors.size(); ++fi) {
        for (std::size_t qi = 0; qi < jpeg_qualities.size(); ++qi) {
            const DegradationSpec spec =
                DegradationSpec::factor(resize_factors[fi], jpeg_qualities[qi]);
            std::vector<double> scores;
            std::vector<bool> dissimilar;
            for (const auto& pd : pairs) {
                const Image3u8 deg_a =
                    resize_larger_dim(degrade(pd.base_a, spec), opts.analysis_larger_dim);
                const Image3u8 deg_b =
                    resize_larger_dim(degrade(pd.base_b, spec), opts.analysis_larger_dim);
                auto patches_a = cut_at(deg_a, pd.pos_a);
                auto patches_b = cut_at(deg_b, pd.pos_b);
                const Eigen::Index na = static_cast<Eigen::Index>(patches_a.size());
                std::vector<patchlab::Patch> all = std::move(patches_a);
                all.insert(all.end(), std::make_move_iterator(patches_b.begin()),
                           std::make_move_iterator(patches_b.end()));
                const Eigen::MatrixXd y = embedder::embed(model, all);
                Eigen::MatrixXd unit = y;
                for (Eigen::Index r = 0; r < unit.rows(); ++r)
                    unit.row(r) /= unit.row(r).norm() + metricspace::kNormEpsilon;

                auto dist = [&](Eigen::Index i, Eigen::Index j) {
                    return 0.5 * (1.0 - unit.row(i).dot(unit.row(j)));
                };
                for (Eigen::Index i = 0; i < na; ++i)
                    for (Eigen::Index j = 0; j < i; ++j) {
                        scores.push_back(dist(i, j));
                        dissimilar.push_back(false);
                    }
                const Eigen::Index nb = static_cast<Eigen::Index>(all.size()) - na;
                for (Eigen::Index i = 0; i < nb; ++i)
                    for (Eigen::Index j = 0; j < i; ++j) {
                        scores.push_back(dist(na + i, na + j));
                        dissimilar.push_back(false);
                    }
                for (const auto& [i, j] : pd.cross_pairs) {
                    scores.push_back(dist(i, na + j));
                    dissimilar.push_back(true);
                }
            }
            const Eigen::VectorXd s = Eigen::Map<Eigen::VectorXd>(
                scores.data(), static_cast<Eigen::Index>(scores.size()));
            grid.tpr(static_cast<Eigen::Index>(fi), static_cast<Eigen::Index>(qi)) =
                ranking::tpr_at_far(s, dissimilar, 0.05);
        }
    }
    return grid;
}

void write_grid_csv(const std::filesystem::path& path, const RobustnessGrid& grid) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("write_grid_csv: cannot write " + path.string());
    out << "f";
    for (const auto& q : grid.jpeg_qualities)
        out << ',' << (q ? "Q" + std::to_string(*q) : std::string("Qid"));
    out << '\n';
    out.precision(17);
    for (Eigen::Index r = 0; r < grid.tpr.rows(); ++r) {
        out << grid.resize_factors[static_cast<std::size_t>(r)];
        for (Eigen::Index c = 0; c < grid.tpr.cols(); ++c)
            out << ',' << grid.tpr(r, c);
        out << '\n';
    }
}

void write_grid_plot(const std::filesystem::path& path, const RobustnessGrid& grid,
                     int cell_pixels) {
    // Compact viridis-like ramp.
    static const double stops[5][3] = {{0.267, 0.005, 0.329},
                                       {0.229, 0.322, 0.546},
                                       {0.128, 0.567, 0.551},
                                       {0.369, 0.789, 0.383},
                                       {0.993, 0.906, 0.144}};
    auto colormap = [&](double v) {
        v = std::min(1.0, std::max(0.0, v)) * 4.0;
        const int lo = std::min(3, static_cast<int>(v));
        const double w = v - lo;
        Eigen::Vector3d c;
        for (int k = 0; k < 3; ++k)
            c[k] = (1.0 - w) * stops[lo][k] + w * stops[lo + 1][k];
        return c;
    };

    const int border = 2;
    const Eigen::Index rows = grid.tpr.rows() * (cell_pixels + border) + border;
    const Eigen::Index cols = grid.tpr.cols() * (cell_pixels + border) + border;
    Image3u8 img(rows, cols);
    img.setConstant(255);
    for (Eigen::Index r = 0; r < grid.tpr.rows(); ++r)
        for (Eigen::Index c = 0; c < grid.tpr.cols(); ++c) {
            const Eigen::Vector3d color = colormap(grid.tpr(r, c));
            const Eigen::Index top = border + r * (cell_pixels + border);
            const Eigen::Index left = border + c * (cell_pixels + border);
            for (int k = 0; k < 3; ++k)
                img.plane[k].block(top, left, cell_pixels, cell_pixels)
                    .setConstant(quantize_u8(color[k] * 255.0));
        }
    png_write(path, img);
}

}  // namespace chromaforge::evalkit
