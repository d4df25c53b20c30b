// SPDX-License-Identifier: Apache-2.0
#include "tridf/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "tridf/rng.hpp"

namespace tridf {

namespace {

constexpr std::size_t kRawDim = 16;

// Separable [1,4,6,4,1]/16 blur with clamped borders.
Image gauss_blur(const Image& img) {
    static const double k[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16,
                                1.0 / 16};
    const auto h = static_cast<long>(img.height);
    const auto w = static_cast<long>(img.width);
    Image tmp(img.height, img.width, img.channels);
    for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x)
            for (std::size_t c = 0; c < img.channels; ++c) {
                double acc = 0;
                for (long d = -2; d <= 2; ++d) {
                    const long xx = std::clamp(x + d, 0L, w - 1);
                    acc += k[d + 2] * img.at(static_cast<std::size_t>(y),
                                             static_cast<std::size_t>(xx), c);
                }
                tmp.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x),
                       c) = acc;
            }
    Image out(img.height, img.width, img.channels);
    for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x)
            for (std::size_t c = 0; c < img.channels; ++c) {
                double acc = 0;
                for (long d = -2; d <= 2; ++d) {
                    const long yy = std::clamp(y + d, 0L, h - 1);
                    acc += k[d + 2] * tmp.at(static_cast<std::size_t>(yy),
                                             static_cast<std::size_t>(x), c);
                }
                out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x),
                       c) = acc;
            }
    return out;
}

Image downsample2(const Image& img) {
    Image out(std::max<std::size_t>(1, img.height / 2),
              std::max<std::size_t>(1, img.width / 2), img.channels);
    for (std::size_t y = 0; y < out.height; ++y)
        for (std::size_t x = 0; x < out.width; ++x)
            for (std::size_t c = 0; c < img.channels; ++c)
                out.at(y, x, c) = img.at(2 * y, 2 * x, c);
    return out;
}

Image upsample_to(const Image& img, std::size_t h, std::size_t w) {
    Image out(h, w, img.channels);
    std::vector<double> px(img.channels);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const double u = (static_cast<double>(x) + 0.5) *
                             static_cast<double>(img.width) /
                             static_cast<double>(w);
            const double v = (static_cast<double>(y) + 0.5) *
                             static_cast<double>(img.height) /
                             static_cast<double>(h);
            img.sample_bilinear(u, v, px.data());
            for (std::size_t c = 0; c < img.channels; ++c) out.at(y, x, c) = px[c];
        }
    return out;
}

Image lum_of(const Image& img) {
    Image out(img.height, img.width, 1);
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x)
            out.at(y, x, 0) =
                luminance(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2));
    return out;
}

// |central difference| of a single-channel image along x or y.
Image grad_mag(const Image& lum, bool horizontal) {
    const auto h = static_cast<long>(lum.height);
    const auto w = static_cast<long>(lum.width);
    Image out(lum.height, lum.width, 1);
    for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x) {
            double a, b;
            if (horizontal) {
                a = lum.at(static_cast<std::size_t>(y),
                           static_cast<std::size_t>(std::min(x + 1, w - 1)), 0);
                b = lum.at(static_cast<std::size_t>(y),
                           static_cast<std::size_t>(std::max(x - 1, 0L)), 0);
            } else {
                a = lum.at(static_cast<std::size_t>(std::min(y + 1, h - 1)),
                           static_cast<std::size_t>(x), 0);
                b = lum.at(static_cast<std::size_t>(std::max(y - 1, 0L)),
                           static_cast<std::size_t>(x), 0);
            }
            out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), 0) =
                std::fabs(0.5 * (a - b));
        }
    return out;
}

// 64 x 16 expansion with orthonormal columns, fixed by the seed.
std::vector<double> expansion_matrix(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> m(kRefFeatureDim * kRawDim);
    for (double& v : m) v = rng.normal();
    // Gram-Schmidt on the 16 columns
    for (std::size_t c = 0; c < kRawDim; ++c) {
        for (std::size_t p = 0; p < c; ++p) {
            double dot = 0;
            for (std::size_t r = 0; r < kRefFeatureDim; ++r)
                dot += m[r * kRawDim + c] * m[r * kRawDim + p];
            for (std::size_t r = 0; r < kRefFeatureDim; ++r)
                m[r * kRawDim + c] -= dot * m[r * kRawDim + p];
        }
        double norm = 0;
        for (std::size_t r = 0; r < kRefFeatureDim; ++r)
            norm += m[r * kRawDim + c] * m[r * kRawDim + c];
        norm = std::sqrt(norm);
        for (std::size_t r = 0; r < kRefFeatureDim; ++r) m[r * kRawDim + c] /= norm;
    }
    return m;
}

}  // namespace

Image extract_reference_features(const Image& rgb, std::uint64_t seed) {
    if (rgb.channels != 3)
        throw std::invalid_argument("extract_reference_features: need RGB");
    const std::size_t h = rgb.height, w = rgb.width;

    const Image level1 = downsample2(gauss_blur(rgb));
    const Image level2 = downsample2(gauss_blur(level1));
    const Image up1 = upsample_to(level1, h, w);
    const Image up2 = upsample_to(level2, h, w);

    const Image lum0 = lum_of(rgb);
    const Image lum1 = lum_of(up1);
    const Image lum2 = lum_of(up2);

    const Image gx0 = grad_mag(lum0, true), gy0 = grad_mag(lum0, false);
    const Image gx1 = grad_mag(lum1, true), gy1 = grad_mag(lum1, false);
    const Image gx2 = grad_mag(lum2, true), gy2 = grad_mag(lum2, false);

    const auto m = expansion_matrix(seed);
    Image out(h, w, kRefFeatureDim);
    double f[kRawDim];
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            std::size_t i = 0;
            for (std::size_t c = 0; c < 3; ++c) f[i++] = rgb.at(y, x, c);
            for (std::size_t c = 0; c < 3; ++c) f[i++] = up1.at(y, x, c);
            for (std::size_t c = 0; c < 3; ++c) f[i++] = up2.at(y, x, c);
            f[i++] = gx0.at(y, x, 0);
            f[i++] = gy0.at(y, x, 0);
            f[i++] = gx1.at(y, x, 0);
            f[i++] = gy1.at(y, x, 0);
            f[i++] = gx2.at(y, x, 0);
            f[i++] = gy2.at(y, x, 0);
            f[i++] = lum0.at(y, x, 0);
            for (std::size_t r = 0; r < kRefFeatureDim; ++r) {
                double acc = 0;
                for (std::size_t c = 0; c < kRawDim; ++c)
                    acc += m[r * kRawDim + c] * f[c];
                out.at(y, x, r) = acc;
            }
        }
    }
    return out;
}

std::vector<Image> extract_reference_features(const std::vector<Image>& images,
                                              std::uint64_t seed) {
    std::vector<Image> maps;
    maps.reserve(images.size());
    for (const Image& img : images)
        maps.push_back(extract_reference_features(img, seed));
    return maps;
}

void aggregate_reference(const Vec3& x, const std::vector<Image>& maps,
                         const std::vector<Camera>& cameras, double* out) {
    for (std::size_t k = 0; k < maps.size(); ++k) {
        double* dst = out + k * kRefFeatureDim;
        const auto px = project_to_reference(cameras[k], x);
        if (!px) {
            std::memset(dst, 0, kRefFeatureDim * sizeof(double));
            continue;
        }
        maps[k].sample_bilinear(px->u, px->v, dst);
    }
}

}  // namespace tridf
