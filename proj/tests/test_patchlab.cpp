// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the chromaforge Project.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "chromaforge/colorpipe.hpp"
#include "chromaforge/patchlab.hpp"
#include "chromaforge/rng.hpp"

using namespace chromaforge;
using namespace chromaforge::patchlab;

namespace {

Patch constant_patch(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    Patch p;
    p.pixels.resize(kPatchSize, kPatchSize);
    p.pixels.plane[0].setConstant(r);
    p.pixels.plane[1].setConstant(g);
    p.pixels.plane[2].setConstant(b);
    return p;
}

Image3u8 random_image(Rng& rng, int rows, int cols) {
    Image3u8 img(rows, cols);
    for (int k = 0; k < 3; ++k)
        for (Eigen::Index i = 0; i < img.plane[k].size(); ++i)
            img.plane[k](i) = static_cast<std::uint8_t>(rng.uniform_int(std::uint64_t{256}));
    return img;
}

}  // namespace

TEST_CASE("patch extraction counts follow the stride formula") {
    Rng rng(3);
    const auto exact = random_image(rng, 128, 128);
    CHECK(extract_patches(exact, 32).size() == 1);

    const auto mid = random_image(rng, 256, 256);
    CHECK(extract_patches(mid, 32).size() == 25);

    const auto small = random_image(rng, 100, 300);
    CHECK(extract_patches(small, 32).empty());
}

TEST_CASE("typical analysis geometry yields about a thousand patches") {
    Image3u8 img(1536, 1024);
    img.setConstant(128);
    const auto patches = extract_patches(img, 32);
    CHECK(patches.size() == 45 * 29);
    // Raster-scan order, fully inside the image.
    CHECK(patches.front().top() == 0);
    CHECK(patches.front().left() == 0);
    CHECK(patches.back().top() == 1408);
    CHECK(patches.back().left() == 896);
}

TEST_CASE("overexposure filter counts channels past the pixel budget") {
    const FilterParams params;
    CHECK(is_overexposed(constant_patch(255, 255, 255), params));
    CHECK_FALSE(is_overexposed(constant_patch(128, 128, 128), params));

    // Exactly two saturated channels stay within N_hi = 2.
    CHECK_FALSE(is_overexposed(constant_patch(255, 255, 0), params));
}

TEST_CASE("underexposure filter admits the all-dark patch under N_lo = 3") {
    const FilterParams params;
    // All three channels trip, but the filter requires MORE than N_lo = 3.
    CHECK_FALSE(is_underexposed(constant_patch(0, 0, 0), params));
    CHECK_FALSE(is_underexposed(constant_patch(128, 128, 128), params));
    // Strict comparison: intensity 5 is not below rho_lo = 5.
    CHECK_FALSE(is_underexposed(constant_patch(5, 5, 5), params));
}

TEST_CASE("color variation requires min != max") {
    auto flat = constant_patch(37, 37, 37);
    CHECK_FALSE(has_color_variation(flat));
    flat.pixels.plane[1](64, 64) = 38;
    CHECK(has_color_variation(flat));
}

TEST_CASE("Lab conversion endpoints") {
    const auto white = rgb_to_lab(constant_patch(255, 255, 255));
    CHECK(white.plane[0](0, 0) == doctest::Approx(255.0).epsilon(1e-9));
    CHECK(white.plane[1](0, 0) == doctest::Approx(128.0).epsilon(1e-6));
    CHECK(white.plane[2](0, 0) == doctest::Approx(128.0).epsilon(1e-6));

    const auto black = rgb_to_lab(constant_patch(0, 0, 0));
    CHECK(black.plane[0](0, 0) == doctest::Approx(0.0));

    // Neutral gray maps to a* = b* = 0 before the rescale offset.
    const auto gray = rgb_to_lab(constant_patch(119, 119, 119));
    CHECK(gray.plane[1](0, 0) == doctest::Approx(128.0).epsilon(1e-9));
    CHECK(gray.plane[2](0, 0) == doctest::Approx(128.0).epsilon(1e-9));
}

TEST_CASE("Lab distance: endpoints, 3-4-5 triangle, oracle") {
    const auto p = constant_patch(10, 200, 45);
    CHECK(lab_distance(p, p) == doctest::Approx(0.0));

    Image3d lab0(kPatchSize, kPatchSize), lab1(kPatchSize, kPatchSize);
    lab0.plane[0].setConstant(50.0);
    lab0.plane[1].setConstant(120.0);
    lab0.plane[2].setConstant(130.0);
    lab1 = lab0;
    lab1.plane[0] += 3.0;
    lab1.plane[1] += 4.0;
    CHECK(lab_distance(lab0, lab1) == doctest::Approx(5.0).epsilon(1e-12));

    Rng rng(5);
    Patch a = constant_patch(0, 0, 0), b = constant_patch(0, 0, 0);
    for (int k = 0; k < 3; ++k)
        for (Eigen::Index i = 0; i < a.pixels.plane[k].size(); ++i) {
            a.pixels.plane[k](i) = static_cast<std::uint8_t>(rng.uniform_int(std::uint64_t{256}));
            b.pixels.plane[k](i) = static_cast<std::uint8_t>(rng.uniform_int(std::uint64_t{256}));
        }
    const auto la = rgb_to_lab(a);
    const auto lb = rgb_to_lab(b);
    double naive = 0.0;
    for (int m = 0; m < kPatchSize; ++m)
        for (int n = 0; n < kPatchSize; ++n) {
            double sq = 0.0;
            for (int k = 0; k < 3; ++k) {
                const double d = la.plane[k](m, n) - lb.plane[k](m, n);
                sq += d * d;
            }
            naive += std::sqrt(sq);
        }
    naive /= kPatchSize * kPatchSize;
    CHECK(lab_distance(a, b) == doctest::Approx(naive).epsilon(1e-12));
    CHECK(lab_distance(a, b) == doctest::Approx(lab_distance(b, a)).epsilon(1e-15));

    Patch tiny;
    tiny.pixels.resize(64, 64);
    CHECK_THROWS_AS(lab_distance(a, tiny), std::invalid_argument);
}

TEST_CASE("admission combines the filters with the Lab floor") {
    const FilterParams params;
    CHECK_FALSE(admit(constant_patch(80, 90, 100), {}, params));  // no variation

    // Build a genuinely admissible pair via differing white-balance gains.
    const auto scene = colorpipe::synthesize_scene(29, 256, 256);
    colorpipe::PipelineSpec s0, s1;
    s0.wb_mode = s1.wb_mode = colorpipe::WbMode::noWB;
    s0.color_transform = s1.color_transform = colorpipe::ColorTransform::raw;
    s0.wb_gains << 1.0, 1.0, 1.0;
    s1.wb_gains << 1.55, 0.85, 0.65;
    const auto d0 = colorpipe::develop(scene, s0);
    const auto d1 = colorpipe::develop(scene, s1);
    const auto p0 = cut_patch(d0.pixels, 32, 32);
    const auto p1 = cut_patch(d1.pixels, 32, 32);
    REQUIRE(lab_distance(p0, p1) >= 5.0);
    CHECK(admit(p0, {p1}, params));
    CHECK_FALSE(admit(p0, {p0}, params));  // identical peer: distance 0 < 5

    // Boundary semantics: distance exactly at the floor admits.
    CHECK(passes_lab_floor(5.0, 5.0));
    CHECK_FALSE(passes_lab_floor(5.0 - 1e-9, 5.0));
}

TEST_CASE("admission is monotone in the Lab floor") {
    Rng rng(31);
    const auto scene = colorpipe::synthesize_scene(31, 256, 256);
    const auto specs = colorpipe::enumerate_pipelines(31);
    const auto d0 = colorpipe::develop(scene, specs[1]);
    const auto d1 = colorpipe::develop(scene, specs[6]);
    for (int trial = 0; trial < 50; ++trial) {
        const int top = static_cast<int>(rng.uniform_int(std::uint64_t{129}));
        const int left = static_cast<int>(rng.uniform_int(std::uint64_t{129}));
        const auto p0 = cut_patch(d0.pixels, top, left);
        const auto p1 = cut_patch(d1.pixels, top, left);
        FilterParams lo, hi;
        lo.delta_lab = rng.uniform(0.0, 30.0);
        hi.delta_lab = lo.delta_lab + rng.uniform(0.0, 30.0);
        if (admit(p0, {p1}, hi))
            CHECK(admit(p0, {p1}, lo));  // raising the floor never admits more
    }
}
