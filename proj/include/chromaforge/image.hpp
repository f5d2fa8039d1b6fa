// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the chromaforge Project.

#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace chromaforge {

/// Three-channel raster stored as per-channel Eigen planes (RGB order).
/// Planes are dense column-major arrays indexed (row, col).
template <typename T>
struct Image3 {
    using Plane = Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic>;

    std::array<Plane, 3> plane;

    Image3() = default;
    Image3(Eigen::Index rows, Eigen::Index cols) { resize(rows, cols); }

    void resize(Eigen::Index rows, Eigen::Index cols) {
        for (auto& p : plane)
            p.resize(rows, cols);
    }

    Eigen::Index rows() const { return plane[0].rows(); }
    Eigen::Index cols() const { return plane[0].cols(); }
    Eigen::Index pixels() const { return rows() * cols(); }

    T& operator()(Eigen::Index r, Eigen::Index c, int k) { return plane[k](r, c); }
    T operator()(Eigen::Index r, Eigen::Index c, int k) const { return plane[k](r, c); }

    void setConstant(T v) {
        for (auto& p : plane)
            p.setConstant(v);
    }

    template <typename U>
    Image3<U> cast() const {
        Image3<U> out(rows(), cols());
        for (int k = 0; k < 3; ++k)
            out.plane[k] = plane[k].template cast<U>();
        return out;
    }
};

using Image3u8 = Image3<std::uint8_t>;
using Image3f = Image3<float>;
using Image3d = Image3<double>;

using BoolMat = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Rounds half away from zero and clamps into the 8-bit range.
inline std::uint8_t quantize_u8(double v) {
    const long long q = std::llround(v);
    if (q < 0)
        return 0;
    if (q > 255)
        return 255;
    return static_cast<std::uint8_t>(q);
}

/// Mirror index into [0, n) with edge repetition (…2 1 0 | 0 1 2… n-1 | n-1…).
inline Eigen::Index reflect_index(Eigen::Index i, Eigen::Index n) {
    if (n == 1)
        return 0;
    const Eigen::Index period = 2 * n;
    i %= period;
    if (i < 0)
        i += period;
    return i < n ? i : period - 1 - i;
}

/// Bilinear resize to an explicit target shape. Integer destinations are
/// rounded half away from zero. A same-shape call returns an exact copy.
template <typename T>
Image3<T> resize_bilinear(const Image3<T>& src, Eigen::Index out_rows, Eigen::Index out_cols);

/// Resize preserving aspect ratio so the larger dimension equals target.
template <typename T>
Image3<T> resize_larger_dim(const Image3<T>& src, Eigen::Index target);

/// Single-plane bilinear resize (used for heatmaps).
Eigen::ArrayXXd resize_bilinear_plane(const Eigen::ArrayXXd& src, Eigen::Index out_rows,
                                      Eigen::Index out_cols);

/// Inverse-mapped affine warp about the image center with bilinear sampling
/// and reflect padding. `fwd` maps centered source coords to centered output
/// coords; an exact identity map copies pixels bit-for-bit.
Image3u8 warp_affine(const Image3u8& src, const Eigen::Matrix2d& fwd);

Image3u8 flip_horizontal(const Image3u8& src);
Image3u8 flip_vertical(const Image3u8& src);

}  // namespace chromaforge
