// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the chromaforge Project.

#include "chromaforge/image.hpp"

#include <Eigen/LU>

namespace chromaforge {

namespace {

template <typename T>
double fetch_clamped(const typename Image3<T>::Plane& p, Eigen::Index r, Eigen::Index c) {
    r = std::min(std::max<Eigen::Index>(r, 0), p.rows() - 1);
    c = std::min(std::max<Eigen::Index>(c, 0), p.cols() - 1);
    return static_cast<double>(p(r, c));
}

template <typename T>
T to_pixel(double v) {
    if constexpr (std::is_integral_v<T>)
        return static_cast<T>(quantize_u8(v));
    else
        return static_cast<T>(v);
}

template <typename T>
Image3<T> resize_bilinear_impl(const Image3<T>& src, Eigen::Index out_rows, Eigen::Index out_cols) {
    if (out_rows <= 0 || out_cols <= 0)
        throw std::invalid_argument("resize_bilinear: nonpositive target shape");
    if (out_rows == src.rows() && out_cols == src.cols())
        return src;

    Image3<T> out(out_rows, out_cols);
    const double sy = static_cast<double>(src.rows()) / static_cast<double>(out_rows);
    const double sx = static_cast<double>(src.cols()) / static_cast<double>(out_cols);
    for (int k = 0; k < 3; ++k) {
        const auto& p = src.plane[k];
        auto& q = out.plane[k];
        for (Eigen::Index c = 0; c < out_cols; ++c) {
            const double xs = (static_cast<double>(c) + 0.5) * sx - 0.5;
            const Eigen::Index x0 = static_cast<Eigen::Index>(std::floor(xs));
            const double wx = xs - static_cast<double>(x0);
            for (Eigen::Index r = 0; r < out_rows; ++r) {
                const double ys = (static_cast<double>(r) + 0.5) * sy - 0.5;
                const Eigen::Index y0 = static_cast<Eigen::Index>(std::floor(ys));
                const double wy = ys - static_cast<double>(y0);
                const double v00 = fetch_clamped<T>(p, y0, x0);
                const double v01 = fetch_clamped<T>(p, y0, x0 + 1);
                const double v10 = fetch_clamped<T>(p, y0 + 1, x0);
                const double v11 = fetch_clamped<T>(p, y0 + 1, x0 + 1);
                const double v = (1.0 - wy) * ((1.0 - wx) * v00 + wx * v01) +
                                 wy * ((1.0 - wx) * v10 + wx * v11);
                q(r, c) = to_pixel<T>(v);
            }
        }
    }
    return out;
}

}  // namespace

template <typename T>
Image3<T> resize_bilinear(const Image3<T>& src, Eigen::Index out_rows, Eigen::Index out_cols) {
    return resize_bilinear_impl(src, out_rows, out_cols);
}

template Image3<std::uint8_t> resize_bilinear(const Image3<std::uint8_t>&, Eigen::Index, Eigen::Index);
template Image3<float> resize_bilinear(const Image3<float>&, Eigen::Index, Eigen::Index);
template Image3<double> resize_bilinear(const Image3<double>&, Eigen::Index, Eigen::Index);

template <typename T>
Image3<T> resize_larger_dim(const Image3<T>& src, Eigen::Index target) {
    if (target <= 0)
        throw std::invalid_argument("resize_larger_dim: nonpositive target");
    const Eigen::Index larger = std::max(src.rows(), src.cols());
    if (larger == target)
        return src;
    const double scale = static_cast<double>(target) / static_cast<double>(larger);
    const Eigen::Index rows = std::max<Eigen::Index>(1, std::llround(src.rows() * scale));
    const Eigen::Index cols = std::max<Eigen::Index>(1, std::llround(src.cols() * scale));
    return resize_bilinear(src, src.rows() >= src.cols() ? target : rows,
                           src.cols() > src.rows() ? target : cols);
}

template Image3<std::uint8_t> resize_larger_dim(const Image3<std::uint8_t>&, Eigen::Index);
template Image3<float> resize_larger_dim(const Image3<float>&, Eigen::Index);
template Image3<double> resize_larger_dim(const Image3<double>&, Eigen::Index);

Eigen::ArrayXXd resize_bilinear_plane(const Eigen::ArrayXXd& src, Eigen::Index out_rows,
                                      Eigen::Index out_cols) {
    if (out_rows == src.rows() && out_cols == src.cols())
        return src;
    Eigen::ArrayXXd out(out_rows, out_cols);
    const double sy = static_cast<double>(src.rows()) / static_cast<double>(out_rows);
    const double sx = static_cast<double>(src.cols()) / static_cast<double>(out_cols);
    auto fetch = [&](Eigen::Index r, Eigen::Index c) {
        r = std::min(std::max<Eigen::Index>(r, 0), src.rows() - 1);
        c = std::min(std::max<Eigen::Index>(c, 0), src.cols() - 1);
        return src(r, c);
    };
    for (Eigen::Index c = 0; c < out_cols; ++c) {
        const double xs = (static_cast<double>(c) + 0.5) * sx - 0.5;
        const Eigen::Index x0 = static_cast<Eigen::Index>(std::floor(xs));
        const double wx = xs - static_cast<double>(x0);
        for (Eigen::Index r = 0; r < out_rows; ++r) {
            const double ys = (static_cast<double>(r) + 0.5) * sy - 0.5;
            const Eigen::Index y0 = static_cast<Eigen::Index>(std::floor(ys));
            const double wy = ys - static_cast<double>(y0);
            out(r, c) = (1.0 - wy) * ((1.0 - wx) * fetch(y0, x0) + wx * fetch(y0, x0 + 1)) +
                        wy * ((1.0 - wx) * fetch(y0 + 1, x0) + wx * fetch(y0 + 1, x0 + 1));
        }
    }
    return out;
}

Image3u8 warp_affine(const Image3u8& src, const Eigen::Matrix2d& fwd) {
    const Eigen::Matrix2d inv = fwd.inverse();
    const double cy = 0.5 * static_cast<double>(src.rows() - 1);
    const double cx = 0.5 * static_cast<double>(src.cols() - 1);

    Image3u8 out(src.rows(), src.cols());
    for (Eigen::Index c = 0; c < src.cols(); ++c) {
        for (Eigen::Index r = 0; r < src.rows(); ++r) {
            const double xo = static_cast<double>(c) - cx;
            const double yo = static_cast<double>(r) - cy;
            const double xs = inv(0, 0) * xo + inv(0, 1) * yo + cx;
            const double ys = inv(1, 0) * xo + inv(1, 1) * yo + cy;
            const Eigen::Index x0 = static_cast<Eigen::Index>(std::floor(xs));
            const Eigen::Index y0 = static_cast<Eigen::Index>(std::floor(ys));
            const double wx = xs - static_cast<double>(x0);
            const double wy = ys - static_cast<double>(y0);
            const Eigen::Index xr0 = reflect_index(x0, src.cols());
            const Eigen::Index xr1 = reflect_index(x0 + 1, src.cols());
            const Eigen::Index yr0 = reflect_index(y0, src.rows());
            const Eigen::Index yr1 = reflect_index(y0 + 1, src.rows());
            for (int k = 0; k < 3; ++k) {
                const auto& p = src.plane[k];
                const double v =
                    (1.0 - wy) * ((1.0 - wx) * p(yr0, xr0) + wx * p(yr0, xr1)) +
                    wy * ((1.0 - wx) * p(yr1, xr0) + wx * p(yr1, xr1));
                out.plane[k](r, c) = quantize_u8(v);
            }
        }
    }
    return out;
}

Image3u8 flip_horizontal(const Image3u8& src) {
    Image3u8 out(src.rows(), src.cols());
    for (int k = 0; k < 3; ++k)
        out.plane[k] = src.plane[k].rowwise().reverse();
    return out;
}

Image3u8 flip_vertical(const Image3u8& src) {
    Image3u8 out(src.rows(), src.cols());
    for (int k = 0; k < 3; ++k)
        out.plane[k] = src.plane[k].colwise().reverse();
    return out;
}

}  // namespace chromaforge
