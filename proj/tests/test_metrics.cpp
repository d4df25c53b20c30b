// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tridf/metrics.hpp"
#include "tridf/rng.hpp"

using namespace tridf;

namespace {

Image noise_image(std::size_t h, std::size_t w, std::uint64_t seed) {
    Image img(h, w, 3);
    Rng rng(seed);
    for (double& v : img.data) v = rng.uniform();
    return img;
}

// Direct single-window SSIM for two constant images: means are the constants,
// variances and covariance are zero, so only the luminance term survives.
double constant_ssim(double a, double b) {
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    const double lum = (2.0 * a * b + c1) / (a * a + b * b + c1);
    const double contrast = (0.0 + c2) / (0.0 + c2);
    return lum * contrast;
}

}  // namespace

TEST_CASE("psnr: identical, 0.1 offset, 0.5 offset, symmetry") {
    const Image a = noise_image(16, 16, 1);
    CHECK(std::isinf(psnr(a, a)));
    CHECK(psnr(a, a) > 0);

    // Uniform 0.1 offset on mid-gray: MSE = 0.01 -> exactly 20 dB.
    Image gray(16, 16, 3, 0.4);
    Image off(16, 16, 3, 0.5);
    CHECK(std::fabs(psnr(gray, off) - 20.0) <= 1e-9);
    CHECK(psnr(gray, off) == psnr(off, gray));

    Image half(16, 16, 3, 0.9);
    // MSE 0.25 -> 10 log10(4) = 6.0206 dB.
    CHECK(psnr(gray, half) ==
          doctest::Approx(10.0 * std::log10(4.0)).epsilon(1e-12));
}

TEST_CASE("psnr clamps out-of-range values before comparing") {
    Image gt(12, 12, 3, 1.0);
    Image over(12, 12, 3, 1.7);  // clamps to 1.0 -> identical
    CHECK(std::isinf(psnr(gt, over)));
}

TEST_CASE("psnr errors on shape mismatch") {
    CHECK_THROWS(psnr(Image(8, 8, 3, 0.0), Image(8, 9, 3, 0.0)));
    CHECK_THROWS(psnr(Image(8, 8, 3, 0.0), Image(8, 8, 1, 0.0)));
}

TEST_CASE("ssim: self-identity to 1e-12 and symmetry") {
    const Image a = noise_image(16, 20, 3);
    CHECK(std::fabs(ssim(a, a) - 1.0) <= 1e-12);
    const Image b = noise_image(16, 20, 4);
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
    CHECK(ssim(a, b) < 1.0);
}

TEST_CASE("ssim on constant pair matches the direct formula") {
    Image zeros(16, 16, 3, 0.0);
    Image ones(16, 16, 3, 1.0);
    CHECK(std::fabs(ssim(zeros, ones) - constant_ssim(0.0, 1.0)) <= 1e-9);

    Image a(16, 16, 3, 0.3);
    Image b(16, 16, 3, 0.7);
    CHECK(std::fabs(ssim(a, b) - constant_ssim(0.3, 0.7)) <= 1e-9);
}

TEST_CASE("ssim is invariant to translating both images together") {
    // Same spatial pattern shifted in both images: per-window statistics are
    // unchanged, so the valid-window mean stays identical.
    const std::size_t h = 20, w = 20;
    Image a1(h, w, 3, 0.0), b1(h, w, 3, 0.0), a2(h, w, 3, 0.0),
        b2(h, w, 3, 0.0);
    Rng rng(9);
    std::vector<double> pat(h * (w + 1) * 3);
    for (double& v : pat) v = rng.uniform();
    std::vector<double> pat2(h * (w + 1) * 3);
    for (double& v : pat2) v = rng.uniform();
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                a1.at(y, x, c) = pat[(y * (w + 1) + x) * 3 + c];
                a2.at(y, x, c) = pat[(y * (w + 1) + x + 1) * 3 + c];
                b1.at(y, x, c) = pat2[(y * (w + 1) + x) * 3 + c];
                b2.at(y, x, c) = pat2[(y * (w + 1) + x + 1) * 3 + c];
            }
    // Not exactly equal (different valid windows) but extremely close.
    CHECK(ssim(a1, b1) == doctest::Approx(ssim(a2, b2)).epsilon(0.05));
}

TEST_CASE("ssim errors on images smaller than the window") {
    CHECK_THROWS(ssim(Image(10, 16, 3, 0.0), Image(10, 16, 3, 0.0)));
    CHECK_THROWS(ssim(Image(16, 8, 3, 0.0), Image(16, 8, 3, 0.0)));
    CHECK_THROWS(ssim(Image(16, 16, 3, 0.0), Image(16, 15, 3, 0.0)));
}
