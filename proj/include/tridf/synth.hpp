// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "tridf/scene.hpp"

namespace tridf {

// Axis-aligned textured box. Color is Lambertian and view-independent so the
// closed-form oracle is exact.
struct TexturedBox {
    Aabb box;
    std::array<double, 3> base_color;
};

struct SyntheticScene {
    std::vector<TexturedBox> boxes;
    Aabb ground;  // thin slab at the bottom of the bbox
    std::array<double, 3> ground_color;
    Aabb bbox;
    std::array<double, 3> background{0.7, 0.7, 0.7};
    double t_far = 0;  // depth value reported for rays that miss everything
    std::vector<Image> depth_maps;  // per view, 1 channel, camera-space Z

    // Surface albedo at a world point on primitive `prim` (-1 = ground).
    std::array<double, 3> albedo(int prim, const Vec3& p) const;

    // Nearest-hit query; returns false on miss. On hit reports ray t, the
    // primitive index and the hit point.
    bool trace(const Vec3& origin, const Vec3& dir, double& t_hit, int& prim,
               Vec3& p_hit) const;
};

struct SynthResult {
    SceneDataset dataset;
    PointCloud cloud;
    SyntheticScene scene;
};

// Deterministic desk-scale stand-in for a remote-sensing capture: cameras on
// an arc looking down at a textured ground plane with a handful of boxes.
SynthResult synth_scene(std::uint64_t seed, std::size_t n_views,
                        std::size_t resolution,
                        double noisy_color_fraction = 0.2,
                        std::size_t cloud_points = 1000);

// Closed-form ray tracing of the synthetic scene: image and camera-space
// depth map. Background pixels get the fixed background color and depth
// t_far.
void oracle_render(const SyntheticScene& scene, const Camera& cam, Image& rgb,
                   Image& depth);

}  // namespace tridf
