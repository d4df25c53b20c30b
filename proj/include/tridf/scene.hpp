// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "tridf/camera.hpp"
#include "tridf/image.hpp"

namespace tridf {

struct Aabb {
    Vec3 min, max;

    bool contains(const Vec3& p, double eps = 0.0) const {
        return p.x >= min.x - eps && p.x <= max.x + eps && p.y >= min.y - eps &&
               p.y <= max.y + eps && p.z >= min.z - eps && p.z <= max.z + eps;
    }
    Vec3 extent() const { return max - min; }
    double diagonal() const { return extent().norm(); }

    // Map world point to [-1,1]^3.
    Vec3 normalize(const Vec3& p) const {
        const Vec3 e = extent();
        return {2.0 * (p.x - min.x) / e.x - 1.0, 2.0 * (p.y - min.y) / e.y - 1.0,
                2.0 * (p.z - min.z) / e.z - 1.0};
    }

    // Slab intersection of a ray with this box; returns false on miss.
    bool intersect(const Vec3& origin, const Vec3& dir, double& t0,
                   double& t1) const;
};

struct SceneDataset {
    std::vector<Camera> cameras;
    std::vector<Image> images;  // RGB in [0,1]
    std::vector<std::size_t> train_ids, test_ids;
    Aabb bbox;
    std::array<double, 3> background{0.7, 0.7, 0.7};

    void validate() const;
    std::vector<Camera> train_cameras() const;
};

struct PointCloud {
    std::vector<Vec3> points;
    std::vector<std::array<double, 3>> colors;  // [0,1]
};

SceneDataset load_scene(const std::string& dir);
void save_scene(const std::string& dir, const SceneDataset& scene);

PointCloud load_point_cloud(const std::string& path);
void save_point_cloud(const std::string& path, const PointCloud& cloud);

}  // namespace tridf
