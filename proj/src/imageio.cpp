// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the chromaforge Project.

#include "chromaforge/imageio.hpp"

#include <cstdio>  // required by jpeglib.h
#include <csetjmp>
#include <cstring>
#include <memory>
#include <stdexcept>

#include <jpeglib.h>
#include <png.h>

namespace chromaforge {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f)
            std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::vector<unsigned char> interleave(const Image3u8& image) {
    const auto rows = image.rows();
    const auto cols = image.cols();
    std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * cols * 3);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            for (int k = 0; k < 3; ++k)
                buf[(static_cast<std::size_t>(r) * cols + c) * 3 + k] = image.plane[k](r, c);
    return buf;
}

Image3u8 deinterleave(const unsigned char* buf, Eigen::Index rows, Eigen::Index cols) {
    Image3u8 image(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            for (int k = 0; k < 3; ++k)
                image.plane[k](r, c) = buf[(static_cast<std::size_t>(r) * cols + c) * 3 + k];
    return image;
}

struct JpegErrorMgr {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* mgr = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    std::longjmp(mgr->jump, 1);
}

}  // namespace

void png_write(const std::filesystem::path& path, const Image3u8& image) {
    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp)
        throw std::runtime_error("png_write: cannot open " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info)
        throw std::runtime_error("png_write: init failed");
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("png_write: libpng error for " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.cols()),
                 static_cast<png_uint_32>(image.rows()), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    auto buf = interleave(image);
    std::vector<png_bytep> row_ptrs(static_cast<std::size_t>(image.rows()));
    for (Eigen::Index r = 0; r < image.rows(); ++r)
        row_ptrs[static_cast<std::size_t>(r)] = buf.data() + static_cast<std::size_t>(r) * image.cols() * 3;
    png_write_image(png, row_ptrs.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void png_write_gray(const std::filesystem::path& path, const Eigen::ArrayXXd& values) {
    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp)
        throw std::runtime_error("png_write_gray: cannot open " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info)
        throw std::runtime_error("png_write_gray: init failed");
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("png_write_gray: libpng error for " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, static_cast<png_uint_32>(values.cols()),
                 static_cast<png_uint_32>(values.rows()), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<unsigned char> buf(static_cast<std::size_t>(values.rows()) * values.cols());
    for (Eigen::Index r = 0; r < values.rows(); ++r)
        for (Eigen::Index c = 0; c < values.cols(); ++c)
            buf[static_cast<std::size_t>(r) * values.cols() + c] = quantize_u8(values(r, c) * 255.0);
    std::vector<png_bytep> row_ptrs(static_cast<std::size_t>(values.rows()));
    for (Eigen::Index r = 0; r < values.rows(); ++r)
        row_ptrs[static_cast<std::size_t>(r)] = buf.data() + static_cast<std::size_t>(r) * values.cols();
    png_write_image(png, row_ptrs.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image3u8 png_read(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp)
        throw std::runtime_error("png_read: cannot open " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info)
        throw std::runtime_error("png_read: init failed");
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("png_read: libpng error for " + path.string());
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
        png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    const Eigen::Index rows = png_get_image_height(png, info);
    const Eigen::Index cols = png_get_image_width(png, info);
    if (png_get_channels(png, info) != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("png_read: unexpected channel count in " + path.string());
    }

    std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * cols * 3);
    std::vector<png_bytep> row_ptrs(static_cast<std::size_t>(rows));
    for (Eigen::Index r = 0; r < rows; ++r)
        row_ptrs[static_cast<std::size_t>(r)] = buf.data() + static_cast<std::size_t>(r) * cols * 3;
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return deinterleave(buf.data(), rows, cols);
}

std::vector<unsigned char> jpeg_encode(const Image3u8& image, int quality) {
    if (quality < 1 || quality > 100)
        throw std::invalid_argument("jpeg_encode: quality out of [1,100]");

    jpeg_compress_struct cinfo;
    JpegErrorMgr err;
    cinfo.err = jpeg_std_error(&err.pub);
    err.pub.error_exit = jpeg_error_exit;

    unsigned char* out_buf = nullptr;
    unsigned long out_len = 0;
    if (setjmp(err.jump)) {
        jpeg_destroy_compress(&cinfo);
        if (out_buf)
            free(out_buf);
        throw std::runtime_error("jpeg_encode: encoder failure");
    }

    jpeg_create_compress(&cinfo);
    jpeg_mem_dest(&cinfo, &out_buf, &out_len);
    cinfo.image_width = static_cast<JDIMENSION>(image.cols());
    cinfo.image_height = static_cast<JDIMENSION>(image.rows());
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    for (int k = 0; k < 3; ++k) {
        cinfo.comp_info[k].h_samp_factor = 1;  // 4:4:4, keeps chroma edges intact
        cinfo.comp_info[k].v_samp_factor = 1;
    }
    jpeg_start_compress(&cinfo, TRUE);

    auto buf = interleave(image);
    const std::size_t stride = static_cast<std::size_t>(image.cols()) * 3;
    while (cinfo.next_scanline < cinfo.image_height) {
        JSAMPROW row = buf.data() + cinfo.next_scanline * stride;
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);

    std::vector<unsigned char> bytes(out_buf, out_buf + out_len);
    free(out_buf);
    return bytes;
}

Image3u8 jpeg_decode(const std::vector<unsigned char>& bytes) {
    jpeg_decompress_struct cinfo;
    JpegErrorMgr err;
    cinfo.err = jpeg_std_error(&err.pub);
    err.pub.error_exit = jpeg_error_exit;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw std::runtime_error("jpeg_decode: decoder failure");
    }

    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);

    const Eigen::Index rows = cinfo.output_height;
    const Eigen::Index cols = cinfo.output_width;
    std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * cols * 3);
    const std::size_t stride = static_cast<std::size_t>(cols) * 3;
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = buf.data() + cinfo.output_scanline * stride;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return deinterleave(buf.data(), rows, cols);
}

Image3u8 jpeg_roundtrip(const Image3u8& image, int quality) {
    return jpeg_decode(jpeg_encode(image, quality));
}

}  // namespace chromaforge
