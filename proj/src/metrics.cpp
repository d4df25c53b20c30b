// SPDX-License-Identifier: Apache-2.0
#include "tridf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace tridf {

namespace {

void check_pair(const Image& a, const Image& b) {
    if (a.height != b.height || a.width != b.width || a.channels != b.channels)
        throw std::invalid_argument("metrics: image size mismatch");
    if (a.channels == 0 || a.height == 0 || a.width == 0)
        throw std::invalid_argument("metrics: empty image");
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

double psnr(const Image& reference, const Image& candidate) {
    check_pair(reference, candidate);
    double mse = 0;
    for (std::size_t i = 0; i < reference.data.size(); ++i) {
        const double d = clamp01(reference.data[i]) - clamp01(candidate.data[i]);
        mse += d * d;
    }
    mse /= static_cast<double>(reference.data.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Image& reference, const Image& candidate) {
    check_pair(reference, candidate);
    constexpr std::size_t kWin = 11;
    constexpr double kSigma = 1.5;
    constexpr double kC1 = 0.01 * 0.01, kC2 = 0.03 * 0.03;
    if (reference.height < kWin || reference.width < kWin)
        throw std::invalid_argument("ssim: image smaller than the 11x11 window");

    double w[kWin][kWin];
    double wsum = 0;
    for (std::size_t y = 0; y < kWin; ++y)
        for (std::size_t x = 0; x < kWin; ++x) {
            const double dy = static_cast<double>(y) - 5.0;
            const double dx = static_cast<double>(x) - 5.0;
            w[y][x] = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
            wsum += w[y][x];
        }
    for (auto& row : w)
        for (double& v : row) v /= wsum;

    const std::size_t h = reference.height, wd = reference.width;
    double total = 0;
    for (std::size_t c = 0; c < reference.channels; ++c) {
        double acc = 0;
        std::size_t count = 0;
        for (std::size_t y0 = 0; y0 + kWin <= h; ++y0)
            for (std::size_t x0 = 0; x0 + kWin <= wd; ++x0) {
                double mu_a = 0, mu_b = 0;
                for (std::size_t y = 0; y < kWin; ++y)
                    for (std::size_t x = 0; x < kWin; ++x) {
                        mu_a += w[y][x] * clamp01(reference.at(y0 + y, x0 + x, c));
                        mu_b += w[y][x] * clamp01(candidate.at(y0 + y, x0 + x, c));
                    }
                double va = 0, vb = 0, cov = 0;
                for (std::size_t y = 0; y < kWin; ++y)
                    for (std::size_t x = 0; x < kWin; ++x) {
                        const double da =
                            clamp01(reference.at(y0 + y, x0 + x, c)) - mu_a;
                        const double db =
                            clamp01(candidate.at(y0 + y, x0 + x, c)) - mu_b;
                        va += w[y][x] * da * da;
                        vb += w[y][x] * db * db;
                        cov += w[y][x] * da * db;
                    }
                acc += ((2 * mu_a * mu_b + kC1) * (2 * cov + kC2)) /
                       ((mu_a * mu_a + mu_b * mu_b + kC1) * (va + vb + kC2));
                ++count;
            }
        total += acc / static_cast<double>(count);
    }
    return total / static_cast<double>(reference.channels);
}

}  // namespace tridf
