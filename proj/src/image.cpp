// SPDX-License-Identifier: Apache-2.0
#include "tridf/image.hpp"

#include <algorithm>
#include <cmath>

namespace tridf {

void Image::sample_bilinear(double u, double v, double* out) const {
    const double fu = u - 0.5, fv = v - 0.5;
    const double cu = std::clamp(fu, 0.0, static_cast<double>(width - 1));
    const double cv = std::clamp(fv, 0.0, static_cast<double>(height - 1));
    std::size_t x0 = static_cast<std::size_t>(cu);
    std::size_t y0 = static_cast<std::size_t>(cv);
    if (x0 > width - 2 && width >= 2) x0 = width - 2;
    if (y0 > height - 2 && height >= 2) y0 = height - 2;
    const std::size_t x1 = std::min(x0 + 1, width - 1);
    const std::size_t y1 = std::min(y0 + 1, height - 1);
    const double ax = cu - static_cast<double>(x0);
    const double ay = cv - static_cast<double>(y0);
    for (std::size_t c = 0; c < channels; ++c) {
        const double v00 = at(y0, x0, c), v01 = at(y0, x1, c);
        const double v10 = at(y1, x0, c), v11 = at(y1, x1, c);
        out[c] = (1 - ay) * ((1 - ax) * v00 + ax * v01) +
                 ay * ((1 - ax) * v10 + ax * v11);
    }
}

double luminance(double r, double g, double b) {
    return 0.299 * r + 0.587 * g + 0.114 * b;
}

Image quantize8(const Image& img) {
    Image out = img;
    for (double& v : out.data)
        v = std::round(255.0 * std::clamp(v, 0.0, 1.0)) / 255.0;
    return out;
}

}  // namespace tridf
