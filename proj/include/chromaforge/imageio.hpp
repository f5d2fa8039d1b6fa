// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the chromaforge Project.

#pragma once

#include "chromaforge/image.hpp"

#include <filesystem>
#include <vector>

namespace chromaforge {

/// Writes an 8-bit RGB PNG. Output bytes are deterministic for fixed input.
void png_write(const std::filesystem::path& path, const Image3u8& image);

/// Writes a single-channel 8-bit grayscale PNG from values in [0, 1].
void png_write_gray(const std::filesystem::path& path, const Eigen::ArrayXXd& values);

/// Reads a PNG as 8-bit RGB (palette/gray/alpha inputs are expanded).
Image3u8 png_read(const std::filesystem::path& path);

/// Baseline JPEG round trip in memory. Encoding uses 4:4:4 chroma sampling
/// so that quality 100 stays within a few intensity levels of the input.
std::vector<unsigned char> jpeg_encode(const Image3u8& image, int quality);
Image3u8 jpeg_decode(const std::vector<unsigned char>& bytes);

/// Convenience: encode-decode at the given quality.
Image3u8 jpeg_roundtrip(const Image3u8& image, int quality);

}  // namespace chromaforge
