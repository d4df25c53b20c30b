// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "tridf/camera.hpp"

namespace tridf {

// [x, sin(2^0 pi x), cos(2^0 pi x), ..., sin(2^{L-1} pi x), cos(2^{L-1} pi x)]
// per coordinate; 3 + 6L entries. L = 0 returns x itself.
std::vector<double> positional_encode(const Vec3& x, std::size_t freqs = 6);

// Real spherical harmonics, degrees 0..3 (16 coefficients). Errors when the
// direction is not unit length (tol 1e-9).
std::array<double, 16> sh_encode(const Vec3& d);

}  // namespace tridf
