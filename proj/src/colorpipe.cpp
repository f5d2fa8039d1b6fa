// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the chromaforge Project.

#include "chromaforge/colorpipe.hpp"

#include "chromaforge/imageio.hpp"
#include "chromaforge/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace chromaforge::colorpipe {

namespace {

using Json = nlohmann::json;

// White-preserving reference matrices (rows sum to 1). The raw transform is
// the identity; the others approximate typical camera-to-working-space
// corrections of increasing gamut width.
const Eigen::Matrix3d& reference_matrix(ColorTransform t) {
    static const Eigen::Matrix3d srgb = (Eigen::Matrix3d() << 1.66, -0.55, -0.11,
                                         -0.25, 1.50, -0.25,
                                         -0.05, -0.55, 1.60).finished();
    static const Eigen::Matrix3d adobe = (Eigen::Matrix3d() << 1.45, -0.35, -0.10,
                                          -0.17, 1.40, -0.23,
                                          -0.02, -0.43, 1.45).finished();
    static const Eigen::Matrix3d prophoto = (Eigen::Matrix3d() << 1.20, -0.15, -0.05,
                                             -0.08, 1.18, -0.10,
                                             -0.01, -0.22, 1.23).finished();
    static const Eigen::Matrix3d identity = Eigen::Matrix3d::Identity();
    switch (t) {
        case ColorTransform::sRGB: return srgb;
        case ColorTransform::Adobe: return adobe;
        case ColorTransform::ProPhoto: return prophoto;
        case ColorTransform::raw: return identity;
    }
    return identity;
}

double transform_gamma(ColorTransform t) {
    switch (t) {
        case ColorTransform::raw: return 1.0;
        case ColorTransform::sRGB: return 2.2;
        case ColorTransform::Adobe: return 2.2;
        case ColorTransform::ProPhoto: return 1.8;
    }
    return 1.0;
}

// Bilinear upsample of a coarse control lattice to (rows, cols).
Eigen::ArrayXXf upsample_lattice(const Eigen::ArrayXXd& lattice, int rows, int cols) {
    Eigen::ArrayXXf out(rows, cols);
    const int lr = static_cast<int>(lattice.rows());
    const int lc = static_cast<int>(lattice.cols());
    for (int c = 0; c < cols; ++c) {
        const double x = (lc - 1) * static_cast<double>(c) / std::max(1, cols - 1);
        const int x0 = std::min(lc - 2, static_cast<int>(x));
        const double wx = x - x0;
        for (int r = 0; r < rows; ++r) {
            const double y = (lr - 1) * static_cast<double>(r) / std::max(1, rows - 1);
            const int y0 = std::min(lr - 2, static_cast<int>(y));
            const double wy = y - y0;
            out(r, c) = static_cast<float>((1 - wy) * ((1 - wx) * lattice(y0, x0) + wx * lattice(y0, x0 + 1)) +
                                           wy * ((1 - wx) * lattice(y0 + 1, x0) + wx * lattice(y0 + 1, x0 + 1)));
        }
    }
    return out;
}

Eigen::ArrayXXd random_lattice(Rng& rng, int rows, int cols, double lo, double hi) {
    Eigen::ArrayXXd lattice(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            lattice(r, c) = rng.uniform(lo, hi);
    return lattice;
}

double percentile(std::vector<float>& values, double q) {
    const std::size_t k = static_cast<std::size_t>(q * (values.size() - 1));
    std::nth_element(values.begin(), values.begin() + k, values.end());
    return values[k];
}

Json matrix_to_json(const Eigen::Matrix3d& m) {
    Json rows = Json::array();
    for (int r = 0; r < 3; ++r)
        rows.push_back({m(r, 0), m(r, 1), m(r, 2)});
    return rows;
}

}  // namespace

std::string to_string(WbMode mode) {
    switch (mode) {
        case WbMode::autoWB: return "autoWB";
        case WbMode::cameraWB: return "cameraWB";
        case WbMode::noWB: return "noWB";
    }
    return "noWB";
}

std::string to_string(ColorTransform transform) {
    switch (transform) {
        case ColorTransform::raw: return "raw";
        case ColorTransform::sRGB: return "sRGB";
        case ColorTransform::Adobe: return "Adobe";
        case ColorTransform::ProPhoto: return "ProPhoto";
    }
    return "raw";
}

WbMode wb_mode_from_string(const std::string& s) {
    if (s == "autoWB") return WbMode::autoWB;
    if (s == "cameraWB") return WbMode::cameraWB;
    if (s == "noWB") return WbMode::noWB;
    throw std::invalid_argument("unknown wb mode: " + s);
}

ColorTransform color_transform_from_string(const std::string& s) {
    if (s == "raw") return ColorTransform::raw;
    if (s == "sRGB") return ColorTransform::sRGB;
    if (s == "Adobe") return ColorTransform::Adobe;
    if (s == "ProPhoto") return ColorTransform::ProPhoto;
    throw std::invalid_argument("unknown color transform: " + s);
}

LinearScene synthesize_scene(std::uint64_t seed, int height, int width) {
    if (height < 256 || width < 256)
        throw std::invalid_argument("synthesize_scene: dimensions must be >= 256");

    Rng rng(mix_seed(seed, 0xC0105CE7EULL));
    LinearScene scene;
    scene.scene_id = "scene_" + std::to_string(seed);
    scene.rng_seed = seed;
    scene.pixels.resize(height, width);

    // Smooth base reflectance field per channel.
    for (int k = 0; k < 3; ++k)
        scene.pixels.plane[k] = upsample_lattice(random_lattice(rng, 5, 5, 0.08, 1.0), height, width);

    // Soft elliptical color blobs.
    const int n_blobs = 6 + static_cast<int>(rng.uniform_int(std::uint64_t{7}));
    const double dim = std::min(height, width);
    for (int b = 0; b < n_blobs; ++b) {
        const double cy = rng.uniform(0.0, height - 1.0);
        const double cx = rng.uniform(0.0, width - 1.0);
        const double ry = rng.uniform(0.06, 0.25) * dim;
        const double rx = rng.uniform(0.06, 0.25) * dim;
        const double angle = rng.uniform(0.0, M_PI);
        Eigen::Vector3d color(rng.uniform(), rng.uniform(), rng.uniform());
        const double amp = rng.uniform(-0.5, 0.8);
        const double ca = std::cos(angle), sa = std::sin(angle);
        const int r_lo = std::max(0, static_cast<int>(cy - 3 * std::max(ry, rx)));
        const int r_hi = std::min(height - 1, static_cast<int>(cy + 3 * std::max(ry, rx)));
        const int c_lo = std::max(0, static_cast<int>(cx - 3 * std::max(ry, rx)));
        const int c_hi = std::min(width - 1, static_cast<int>(cx + 3 * std::max(ry, rx)));
        for (int c = c_lo; c <= c_hi; ++c) {
            for (int r = r_lo; r <= r_hi; ++r) {
                const double dy = r - cy, dx = c - cx;
                const double u = (ca * dx + sa * dy) / rx;
                const double v = (-sa * dx + ca * dy) / ry;
                const double w = std::exp(-(u * u + v * v));
                if (w < 1e-4)
                    continue;
                for (int k = 0; k < 3; ++k)
                    scene.pixels.plane[k](r, c) += static_cast<float>(amp * w * color[k]);
            }
        }
    }

    // Band-limited multiplicative texture, two octaves.
    const Eigen::ArrayXXf tex_lo = upsample_lattice(random_lattice(rng, 24, 24, -1.0, 1.0), height, width);
    const Eigen::ArrayXXf tex_hi = upsample_lattice(random_lattice(rng, 96, 96, -1.0, 1.0), height, width);
    const Eigen::ArrayXXf texture = 1.0f + 0.06f * tex_lo + 0.04f * tex_hi;

    // Global illuminant tint (chromatic, geometric mean 1) and mild spatial
    // illuminant variation.
    Eigen::Vector3d tint(rng.uniform(0.7, 1.4), 1.0, rng.uniform(0.7, 1.4));
    tint /= std::cbrt(tint.prod());
    scene.illuminant_tint = tint;
    for (int k = 0; k < 3; ++k) {
        const Eigen::ArrayXXf illum = upsample_lattice(random_lattice(rng, 3, 3, 0.85, 1.15), height, width);
        scene.pixels.plane[k] =
            (scene.pixels.plane[k].max(0.0f) + 0.02f) * texture * illum * static_cast<float>(tint[k]);
    }

    // Scale so the 99.5th percentile sits at 0.6; the highest per-pipeline
    // gains then rarely clip and the exposure filters stay permissive.
    std::vector<float> sample;
    sample.reserve(static_cast<std::size_t>(height) * width);
    for (Eigen::Index i = 0; i < scene.pixels.plane[1].size(); ++i)
        sample.push_back(scene.pixels.plane[1](i));
    const double p995 = std::max(1e-6, percentile(sample, 0.995));
    const float scale = static_cast<float>(0.6 / p995);
    for (int k = 0; k < 3; ++k)
        scene.pixels.plane[k] *= scale;

    return scene;
}

std::vector<PipelineSpec> enumerate_pipelines(std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0x9190E11E5ULL));
    std::vector<PipelineSpec> specs;
    specs.reserve(12);
    for (WbMode mode : {WbMode::autoWB, WbMode::cameraWB, WbMode::noWB}) {
        for (ColorTransform transform :
             {ColorTransform::raw, ColorTransform::sRGB, ColorTransform::Adobe, ColorTransform::ProPhoto}) {
            PipelineSpec spec;
            spec.wb_mode = mode;
            spec.color_transform = transform;
            spec.tone_gamma = transform_gamma(transform);
            // Draw in a fixed order so specs are stable under enumeration.
            const Eigen::Vector3d gains(rng.uniform(0.6, 1.6), rng.uniform(0.6, 1.6),
                                        rng.uniform(0.6, 1.6));
            const double blend = rng.uniform(0.7, 1.0);
            spec.wb_gains = mode == WbMode::cameraWB ? gains : Eigen::Vector3d::Ones();
            spec.color_matrix = transform == ColorTransform::raw
                                    ? Eigen::Matrix3d::Identity()
                                    : ((1.0 - blend) * Eigen::Matrix3d::Identity() +
                                       blend * reference_matrix(transform))
                                          .eval();
            specs.push_back(spec);
        }
    }
    return specs;
}

Eigen::Vector3d effective_gains(const LinearScene& scene, const PipelineSpec& pipeline) {
    switch (pipeline.wb_mode) {
        case WbMode::noWB:
            return pipeline.wb_gains;
        case WbMode::cameraWB: {
            Eigen::Vector3d inv = scene.illuminant_tint.cwiseInverse();
            inv /= std::cbrt(inv.prod());
            return pipeline.wb_gains.cwiseProduct(inv);
        }
        case WbMode::autoWB: {
            Eigen::Vector3d mean;
            for (int k = 0; k < 3; ++k)
                mean[k] = std::max(1e-9, static_cast<double>(scene.pixels.plane[k].mean()));
            const double gray = mean.mean();
            return pipeline.wb_gains.cwiseProduct(Eigen::Vector3d(gray / mean[0], gray / mean[1],
                                                                  gray / mean[2]));
        }
    }
    return pipeline.wb_gains;
}

DevelopedImage develop(const LinearScene& scene, const PipelineSpec& pipeline) {
    if ((pipeline.wb_gains.array() <= 0.0).any())
        throw std::invalid_argument("develop: wb_gains must be strictly positive");

    const Eigen::Vector3d g = effective_gains(scene, pipeline);
    const Eigen::Matrix3d& m = pipeline.color_matrix;
    const double inv_gamma = 1.0 / pipeline.tone_gamma;

    DevelopedImage out;
    out.scene_id = scene.scene_id;
    out.pipeline = pipeline;
    out.pixels.resize(scene.pixels.rows(), scene.pixels.cols());

    using PlaneD = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic>;
    std::array<PlaneD, 3> balanced;
    for (int k = 0; k < 3; ++k)
        balanced[k] = scene.pixels.plane[k].cast<double>() * g[k];
    for (int k = 0; k < 3; ++k) {
        PlaneD mixed = m(k, 0) * balanced[0] + m(k, 1) * balanced[1] + m(k, 2) * balanced[2];
        mixed = mixed.max(0.0).pow(inv_gamma) * 255.0;
        auto& q = out.pixels.plane[k];
        q.resize(mixed.rows(), mixed.cols());
        for (Eigen::Index i = 0; i < mixed.size(); ++i)
            q(i) = quantize_u8(mixed(i));
    }
    return out;
}

void write_scene_dataset(const std::filesystem::path& root, const LinearScene& scene,
                         const std::vector<PipelineSpec>& pipelines) {
    const auto dir = root / scene.scene_id;
    std::filesystem::create_directories(dir);

    Json meta;
    meta["scene_id"] = scene.scene_id;
    meta["rng_seed"] = scene.rng_seed;
    meta["height"] = scene.pixels.rows();
    meta["width"] = scene.pixels.cols();
    meta["illuminant_tint"] = {scene.illuminant_tint[0], scene.illuminant_tint[1],
                               scene.illuminant_tint[2]};
    meta["pipelines"] = Json::array();
    for (const auto& p : pipelines) {
        Json entry;
        entry["id"] = p.id();
        entry["wb_mode"] = to_string(p.wb_mode);
        entry["color_transform"] = to_string(p.color_transform);
        entry["wb_gains"] = {p.wb_gains[0], p.wb_gains[1], p.wb_gains[2]};
        entry["color_matrix"] = matrix_to_json(p.color_matrix);
        entry["tone_gamma"] = p.tone_gamma;
        meta["pipelines"].push_back(entry);
        png_write(dir / (p.id() + ".png"), develop(scene, p).pixels);
    }
    std::ofstream meta_out(dir / "meta.json");
    if (!meta_out)
        throw std::runtime_error("write_scene_dataset: cannot write meta.json in " + dir.string());
    meta_out << meta.dump(2) << "\n";
}

DatasetIndex load_dataset_index(const std::filesystem::path& root) {
    DatasetIndex index;
    index.root = root;
    if (!std::filesystem::is_directory(root))
        throw std::runtime_error("load_dataset_index: no such directory " + root.string());
    for (const auto& entry : std::filesystem::directory_iterator(root))
        if (entry.is_directory() && std::filesystem::exists(entry.path() / "meta.json"))
            index.scene_ids.push_back(entry.path().filename().string());
    std::sort(index.scene_ids.begin(), index.scene_ids.end());
    if (index.scene_ids.empty())
        throw std::runtime_error("load_dataset_index: no scenes under " + root.string());

    std::ifstream meta_in(root / index.scene_ids.front() / "meta.json");
    Json meta = Json::parse(meta_in);
    for (const auto& p : meta.at("pipelines"))
        index.pipeline_ids.push_back(p.at("id").get<std::string>());
    return index;
}

Image3u8 load_dataset_image(const DatasetIndex& index, std::size_t scene, std::size_t pipeline) {
    return png_read(index.root / index.scene_ids.at(scene) /
                    (index.pipeline_ids.at(pipeline) + ".png"));
}

}  // namespace chromaforge::colorpipe
