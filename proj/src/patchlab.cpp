// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the chromaforge Project.

#include "chromaforge/patchlab.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace chromaforge::patchlab {

namespace {

// sRGB -> XYZ (D65), IEC 61966-2-1.
constexpr double kRgbToXyz[3][3] = {
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
};
constexpr double kD65[3] = {0.95047, 1.0, 1.08883};
constexpr double kLabEps = 216.0 / 24389.0;
constexpr double kLabKappa = 24389.0 / 27.0;

inline double srgb_to_linear(double c) {
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

// 8-bit inputs hit only 256 distinct code values; precomputing the transfer
// curve removes the pow() from the per-pixel path without changing results.
const std::array<double, 256>& srgb_linear_lut() {
    static const std::array<double, 256> lut = [] {
        std::array<double, 256> t{};
        for (int i = 0; i < 256; ++i)
            t[static_cast<std::size_t>(i)] = srgb_to_linear(i / 255.0);
        return t;
    }();
    return lut;
}

inline double lab_f(double t) {
    return t > kLabEps ? std::cbrt(t) : (kLabKappa * t + 16.0) / 116.0;
}

}  // namespace

Patch cut_patch(const Image3u8& image, int top, int left) {
    if (top < 0 || left < 0 || top + kPatchSize > image.rows() || left + kPatchSize > image.cols())
        throw std::invalid_argument("cut_patch: patch exceeds image bounds");
    Patch patch;
    patch.pixels.resize(kPatchSize, kPatchSize);
    for (int k = 0; k < 3; ++k)
        patch.pixels.plane[k] = image.plane[k].block(top, left, kPatchSize, kPatchSize);
    patch.row = top + kPatchSize / 2;
    patch.col = left + kPatchSize / 2;
    return patch;
}

std::vector<Patch> extract_patches(const Image3u8& image, int stride) {
    if (stride <= 0)
        throw std::invalid_argument("extract_patches: stride must be positive");
    std::vector<Patch> patches;
    if (image.rows() < kPatchSize || image.cols() < kPatchSize)
        return patches;
    const int n_rows = static_cast<int>((image.rows() - kPatchSize) / stride) + 1;
    const int n_cols = static_cast<int>((image.cols() - kPatchSize) / stride) + 1;
    patches.reserve(static_cast<std::size_t>(n_rows) * n_cols);
    for (int r = 0; r < n_rows; ++r)
        for (int c = 0; c < n_cols; ++c)
            patches.push_back(cut_patch(image, r * stride, c * stride));
    return patches;
}

bool is_overexposed(const Patch& patch, const FilterParams& params) {
    int tripped = 0;
    for (int k = 0; k < 3; ++k) {
        const auto count = (patch.pixels.plane[k] > static_cast<std::uint8_t>(params.rho_hi)).count();
        if (static_cast<double>(count) > params.delta_hi)
            ++tripped;
    }
    return tripped > params.n_hi;
}

bool is_underexposed(const Patch& patch, const FilterParams& params) {
    int tripped = 0;
    for (int k = 0; k < 3; ++k) {
        const auto count = (patch.pixels.plane[k] < static_cast<std::uint8_t>(params.rho_lo)).count();
        if (static_cast<double>(count) > params.delta_lo)
            ++tripped;
    }
    return tripped > params.n_lo;
}

bool has_color_variation(const Patch& patch) {
    std::uint8_t lo = 255, hi = 0;
    for (int k = 0; k < 3; ++k) {
        lo = std::min(lo, patch.pixels.plane[k].minCoeff());
        hi = std::max(hi, patch.pixels.plane[k].maxCoeff());
    }
    return lo != hi;
}

Image3d rgb_to_lab(const Image3u8& rgb) {
    const auto& lut = srgb_linear_lut();
    Image3d lab(rgb.rows(), rgb.cols());
    for (Eigen::Index i = 0; i < rgb.plane[0].size(); ++i) {
        const double rl = lut[rgb.plane[0](i)];
        const double gl = lut[rgb.plane[1](i)];
        const double bl = lut[rgb.plane[2](i)];
        double f[3];
        for (int k = 0; k < 3; ++k) {
            const double xyz = kRgbToXyz[k][0] * rl + kRgbToXyz[k][1] * gl + kRgbToXyz[k][2] * bl;
            f[k] = lab_f(xyz / kD65[k]);
        }
        const double l = 116.0 * f[1] - 16.0;
        const double a = 500.0 * (f[0] - f[1]);
        const double b = 200.0 * (f[1] - f[2]);
        lab.plane[0](i) = l * (255.0 / 100.0);
        lab.plane[1](i) = a + 128.0;
        lab.plane[2](i) = b + 128.0;
    }
    return lab;
}

Image3d rgb_to_lab(const Patch& patch) {
    return rgb_to_lab(patch.pixels);
}

double lab_distance(const Image3d& lab0, const Image3d& lab1) {
    if (lab0.rows() != lab1.rows() || lab0.cols() != lab1.cols())
        throw std::invalid_argument("lab_distance: shape mismatch");
    const Eigen::ArrayXXd d0 = lab0.plane[0] - lab1.plane[0];
    const Eigen::ArrayXXd d1 = lab0.plane[1] - lab1.plane[1];
    const Eigen::ArrayXXd d2 = lab0.plane[2] - lab1.plane[2];
    return (d0.square() + d1.square() + d2.square()).sqrt().mean();
}

double lab_distance(const Patch& p0, const Patch& p1) {
    if (p0.pixels.rows() != p1.pixels.rows() || p0.pixels.cols() != p1.pixels.cols())
        throw std::invalid_argument("lab_distance: shape mismatch");
    return lab_distance(rgb_to_lab(p0), rgb_to_lab(p1));
}

Eigen::ArrayXXd lab_distance_map(const Image3d& lab0, const Image3d& lab1) {
    if (lab0.rows() != lab1.rows() || lab0.cols() != lab1.cols())
        throw std::invalid_argument("lab_distance_map: shape mismatch");
    const Eigen::ArrayXXd d0 = lab0.plane[0] - lab1.plane[0];
    const Eigen::ArrayXXd d1 = lab0.plane[1] - lab1.plane[1];
    const Eigen::ArrayXXd d2 = lab0.plane[2] - lab1.plane[2];
    return (d0.square() + d1.square() + d2.square()).sqrt();
}

bool admit(const Patch& patch, const std::vector<Patch>& peers, const FilterParams& params) {
    if (!has_color_variation(patch) || is_overexposed(patch, params) ||
        is_underexposed(patch, params))
        return false;
    if (peers.empty())
        return true;
    const Image3d lab = rgb_to_lab(patch);
    for (const auto& peer : peers)
        if (!passes_lab_floor(lab_distance(lab, rgb_to_lab(peer)), params.delta_lab))
            return false;
    return true;
}

}  // namespace chromaforge::patchlab
