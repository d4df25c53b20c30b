// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tridf/image.hpp"

namespace tridf {

// 10 log10(1 / MSE) over all pixels and channels, values clamped to [0,1]
// first. Identical images return +infinity. Errors on size mismatch.
double psnr(const Image& reference, const Image& candidate);

// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
// dynamic range 1, per channel then averaged, mean over valid window
// positions. Errors when either side of the image is smaller than 11.
double ssim(const Image& reference, const Image& candidate);

}  // namespace tridf
