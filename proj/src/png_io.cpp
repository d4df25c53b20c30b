// SPDX-License-Identifier: Apache-2.0
#include "tridf/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

namespace tridf {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void fail(const std::string& what, const std::string& path) {
    throw std::runtime_error(what + ": " + path);
}

void write_png(const std::string& path, const std::vector<png_byte>& bytes,
               std::size_t width, std::size_t height, int bit_depth,
               int color_type, std::size_t row_bytes) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) fail("cannot open PNG for writing", path);
    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        fail("libpng init failed", path);
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail("libpng write error", path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width),
                 static_cast<png_uint_32>(height), bit_depth, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (bit_depth == 16) png_set_swap(png);
    for (std::size_t y = 0; y < height; ++y)
        png_write_row(png, const_cast<png_bytep>(&bytes[y * row_bytes]));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void read_png(const std::string& path, std::vector<png_byte>& bytes,
              std::size_t& width, std::size_t& height, int expect_bit_depth,
              int expect_color_type, std::size_t channels) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) fail("cannot open PNG", path);
    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail("libpng init failed", path);
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail("corrupt PNG", path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    width = png_get_image_width(png, info);
    height = png_get_image_height(png, info);
    const int depth = png_get_bit_depth(png, info);
    int color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) {
        png_set_palette_to_rgb(png);
        color = PNG_COLOR_TYPE_RGB;
    }
    if (color == PNG_COLOR_TYPE_RGBA && expect_color_type == PNG_COLOR_TYPE_RGB) {
        png_set_strip_alpha(png);
        color = PNG_COLOR_TYPE_RGB;
    }
    if (depth != expect_bit_depth || color != expect_color_type) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail("unexpected PNG format", path);
    }
    if (depth == 16) png_set_swap(png);
    png_read_update_info(png, info);
    const std::size_t row_bytes = width * channels * (depth / 8);
    bytes.resize(height * row_bytes);
    for (std::size_t y = 0; y < height; ++y)
        png_read_row(png, &bytes[y * row_bytes], nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
}

}  // namespace

void write_png_rgb8(const std::string& path, const Image& img) {
    if (img.channels != 3)
        throw std::invalid_argument("write_png_rgb8: need 3 channels");
    std::vector<png_byte> bytes(img.height * img.width * 3);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        bytes[i] = static_cast<png_byte>(
            std::lround(255.0 * std::clamp(img.data[i], 0.0, 1.0)));
    write_png(path, bytes, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
              img.width * 3);
}

Image read_png_rgb8(const std::string& path) {
    std::vector<png_byte> bytes;
    std::size_t w = 0, h = 0;
    read_png(path, bytes, w, h, 8, PNG_COLOR_TYPE_RGB, 3);
    Image img(h, w, 3);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        img.data[i] = static_cast<double>(bytes[i]) / 255.0;
    return img;
}

void write_png_gray16(const std::string& path, const Image& img, double lo,
                      double hi) {
    if (img.channels != 1)
        throw std::invalid_argument("write_png_gray16: need 1 channel");
    const double range = (hi > lo) ? (hi - lo) : 1.0;
    std::vector<png_byte> bytes(img.height * img.width * 2);
    auto* px = reinterpret_cast<std::uint16_t*>(bytes.data());
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const double t = std::clamp((img.data[i] - lo) / range, 0.0, 1.0);
        px[i] = static_cast<std::uint16_t>(std::lround(65535.0 * t));
    }
    write_png(path, bytes, img.width, img.height, 16, PNG_COLOR_TYPE_GRAY,
              img.width * 2);
}

Image read_png_gray16(const std::string& path, double lo, double hi) {
    std::vector<png_byte> bytes;
    std::size_t w = 0, h = 0;
    read_png(path, bytes, w, h, 16, PNG_COLOR_TYPE_GRAY, 1);
    Image img(h, w, 1);
    const auto* px = reinterpret_cast<const std::uint16_t*>(bytes.data());
    for (std::size_t i = 0; i < img.data.size(); ++i)
        img.data[i] = lo + (hi - lo) * static_cast<double>(px[i]) / 65535.0;
    return img;
}

}  // namespace tridf
