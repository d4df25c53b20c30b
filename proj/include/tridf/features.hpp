// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "tridf/camera.hpp"
#include "tridf/image.hpp"

namespace tridf {

inline constexpr std::size_t kRefFeatureDim = 64;

// Frozen pixel-aligned features: a handcrafted multi-scale pyramid (RGB at 3
// Gaussian levels, luminance gradient magnitudes at the 3 levels, luminance;
// 16 raw channels) expanded to 64 channels by a fixed seeded orthonormal
// linear map. Deterministic in (image, seed).
Image extract_reference_features(const Image& rgb, std::uint64_t seed);

std::vector<Image> extract_reference_features(const std::vector<Image>& images,
                                              std::uint64_t seed);

// Project x into every reference view, bilinearly sample its feature map and
// concatenate in view order. Views where x is out of frame contribute zeros.
// Writes maps.size() * kRefFeatureDim values into out.
void aggregate_reference(const Vec3& x, const std::vector<Image>& maps,
                         const std::vector<Camera>& cameras, double* out);

}  // namespace tridf
