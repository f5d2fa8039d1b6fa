// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the chromaforge Project.

#pragma once

#include "chromaforge/image.hpp"

namespace chromaforge::segmentation {

struct FelzenszwalbParams {
    double scale = 10.0;  // threshold constant k on [0,1]-scaled intensities
    double sigma = 0.5;   // Gaussian pre-smoothing
    int min_size = 20;    // post-merge floor on component size
};

/// Graph-based segmentation (Felzenszwalb-Huttenlocher): Gaussian smoothing,
/// 8-connected grid graph with Euclidean RGB edge weights on [0,1]-scaled
/// intensities, greedy merging with threshold function k/|C|, then a merge
/// pass removing components below min_size. Labels are compact and assigned
/// in raster order of first occurrence.
Eigen::ArrayXXi felzenszwalb_segment(const Image3u8& image, const FelzenszwalbParams& params = {});

}  // namespace chromaforge::segmentation
