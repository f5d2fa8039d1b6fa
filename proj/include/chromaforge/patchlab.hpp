// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the chromaforge Project.

#pragma once

#include "chromaforge/image.hpp"

#include <string>
#include <vector>

namespace chromaforge::patchlab {

inline constexpr int kPatchSize = 128;

/// 128x128x3 intensity block with provenance. `row`/`col` give the patch
/// center in source-image coordinates (top-left + 64).
struct Patch {
    Image3u8 pixels;
    int row = 0;
    int col = 0;
    std::string scene_id;
    std::string pipeline_id;

    int top() const { return row - kPatchSize / 2; }
    int left() const { return col - kPatchSize / 2; }
};

/// Admission thresholds. Defaults carry the reference operating point:
/// intensity bounds 252/5, per-channel pixel budgets 0.3*128*128, channel
/// limits 2/3, Lab floor 5.
struct FilterParams {
    int rho_hi = 252;
    int rho_lo = 5;
    double delta_hi = 0.3 * kPatchSize * kPatchSize;
    double delta_lo = 0.3 * kPatchSize * kPatchSize;
    int n_hi = 2;
    int n_lo = 3;
    double delta_lab = 5.0;
};

/// Cuts a patch with the given top-left corner out of an image.
Patch cut_patch(const Image3u8& image, int top, int left);

/// Dense raster-scan extraction. Images smaller than one patch yield an
/// empty list. Count is (floor((H-128)/stride)+1) * (floor((W-128)/stride)+1).
std::vector<Patch> extract_patches(const Image3u8& image, int stride);

/// True iff more than n_hi channels each contain more than delta_hi pixels
/// with intensity > rho_hi.
bool is_overexposed(const Patch& patch, const FilterParams& params);

/// Mirror of is_overexposed with rho_lo (strict <), delta_lo and n_lo.
bool is_underexposed(const Patch& patch, const FilterParams& params);

/// True iff the patch is not constant across all values and channels.
bool has_color_variation(const Patch& patch);

/// CIE L*a*b* (sRGB-encoded input, D65 white) rescaled so each channel
/// occupies [0, 255]: L' = L * 255/100, a' = a + 128, b' = b + 128.
Image3d rgb_to_lab(const Image3u8& rgb);
Image3d rgb_to_lab(const Patch& patch);

/// Mean over pixels of the Euclidean norm across the three Lab channels.
double lab_distance(const Image3d& lab0, const Image3d& lab1);
double lab_distance(const Patch& p0, const Patch& p1);

/// Per-pixel Lab-difference norm between two equally shaped images.
/// Patch-mean distances can then be read off an integral image in O(1).
Eigen::ArrayXXd lab_distance_map(const Image3d& lab0, const Image3d& lab1);

/// Admission: color variation, neither over- nor underexposed, and Lab
/// distance >= delta_lab against every co-located peer.
bool admit(const Patch& patch, const std::vector<Patch>& peers, const FilterParams& params);

/// Lab floor predicate used by admit; distance exactly at delta passes.
inline bool passes_lab_floor(double distance, double delta) { return distance >= delta; }

}  // namespace chromaforge::patchlab
