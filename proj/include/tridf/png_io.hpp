// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "tridf/image.hpp"

namespace tridf {

// 8-bit RGB. Values are clamped to [0,1] and written as round(255*v).
void write_png_rgb8(const std::string& path, const Image& img);
Image read_png_rgb8(const std::string& path);  // decoded to [0,1] via v/255

// 16-bit grayscale, value = round(65535 * (v - lo) / (hi - lo)).
void write_png_gray16(const std::string& path, const Image& img, double lo,
                      double hi);
Image read_png_gray16(const std::string& path, double lo, double hi);

}  // namespace tridf
