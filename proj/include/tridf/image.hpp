// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace tridf {

// Row-major H x W x C image of doubles.
struct Image {
    std::size_t height = 0, width = 0, channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0)
        : height(h), width(w), channels(c), data(h * w * c, fill) {}

    double& at(std::size_t y, std::size_t x, std::size_t c) {
        return data[(y * width + x) * channels + c];
    }
    double at(std::size_t y, std::size_t x, std::size_t c) const {
        return data[(y * width + x) * channels + c];
    }

    // Bilinear sample at continuous pixel coordinates; texel (i, j) sits at
    // (i+0.5, j+0.5). Edge-clamped. Writes `channels` values into out.
    void sample_bilinear(double u, double v, double* out) const;
};

double luminance(double r, double g, double b);

// Quantize to the 8-bit grid: round(255*clamp(v,0,1))/255.
Image quantize8(const Image& img);

}  // namespace tridf
