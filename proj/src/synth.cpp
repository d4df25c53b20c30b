// SPDX-License-Identifier: Apache-2.0
#include "tridf/synth.hpp"

#include <algorithm>
#include <cmath>

#include "tridf/rng.hpp"
#include "tridf/threading.hpp"

namespace tridf {

namespace {

constexpr double kFar = 20.0;
constexpr double kNear = 1e-3;

// Gentle low-frequency modulation so the color field is representable at
// desk-scale plane resolutions.
double texture_mod(const Vec3& p, double fx, double fy, double phase) {
    return 0.5 * (std::sin(fx * p.x + phase) + std::sin(fy * p.y + 1.7 * phase));
}

bool intersect_box(const Aabb& b, const Vec3& o, const Vec3& d, double& t_hit) {
    double t0, t1;
    if (!b.intersect(o, d, t0, t1)) return false;
    if (t1 < kNear) return false;
    t_hit = (t0 >= kNear) ? t0 : t1;
    return true;
}

Camera make_arc_camera(double azimuth, double radius, double height,
                       const Vec3& target, std::size_t resolution) {
    Camera cam;
    cam.K.width = cam.K.height = resolution;
    cam.K.fx = cam.K.fy = 1.15 * static_cast<double>(resolution);
    cam.K.cx = cam.K.cy = static_cast<double>(resolution) / 2.0;

    const Vec3 eye{radius * std::sin(azimuth), -radius * std::cos(azimuth),
                   height};
    const Vec3 fwd = (target - eye).normalized();
    Vec3 up_hint{0, 0, 1};
    if (std::fabs(fwd.dot(up_hint)) > 0.999) up_hint = {0, 1, 0};
    const Vec3 xc = fwd.cross(up_hint).normalized();
    const Vec3 yc = fwd.cross(xc);
    cam.E.R.m = {xc.x, xc.y, xc.z, yc.x, yc.y, yc.z, fwd.x, fwd.y, fwd.z};
    const Vec3 rt = cam.E.R * eye;
    cam.E.T = {-rt.x, -rt.y, -rt.z};
    cam.E.validate();
    return cam;
}

}  // namespace

std::array<double, 3> SyntheticScene::albedo(int prim, const Vec3& p) const {
    std::array<double, 3> c;
    if (prim < 0) {
        c = ground_color;
        const double m = texture_mod(p, 1.3, 1.9, 0.4);
        c[0] = std::clamp(c[0] + 0.10 * m, 0.05, 0.95);
        c[1] = std::clamp(c[1] + 0.08 * texture_mod(p, 2.1, 1.1, 2.3), 0.05, 0.95);
        c[2] = std::clamp(c[2] + 0.06 * m, 0.05, 0.95);
    } else {
        c = boxes[static_cast<std::size_t>(prim)].base_color;
        const double m =
            texture_mod(p, 1.7, 1.3, 0.9 * static_cast<double>(prim + 1));
        for (int ch = 0; ch < 3; ++ch)
            c[static_cast<std::size_t>(ch)] = std::clamp(
                c[static_cast<std::size_t>(ch)] + (0.10 - 0.02 * ch) * m, 0.05,
                0.95);
    }
    return c;
}

bool SyntheticScene::trace(const Vec3& origin, const Vec3& dir, double& t_hit,
                           int& prim, Vec3& p_hit) const {
    double best = kFar;
    int best_prim = -2;
    double t;
    if (intersect_box(ground, origin, dir, t) && t < best) {
        best = t;
        best_prim = -1;
    }
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        if (intersect_box(boxes[i].box, origin, dir, t) && t < best) {
            best = t;
            best_prim = static_cast<int>(i);
        }
    }
    if (best_prim == -2) return false;
    t_hit = best;
    prim = best_prim;
    p_hit = origin + dir * best;
    return true;
}

void oracle_render(const SyntheticScene& scene, const Camera& cam, Image& rgb,
                   Image& depth) {
    rgb = Image(cam.K.height, cam.K.width, 3);
    depth = Image(cam.K.height, cam.K.width, 1);
    parallel_for(cam.K.height, [&](std::size_t y) {
        for (std::size_t x = 0; x < cam.K.width; ++x) {
            const Ray ray = generate_ray(cam, x, y, kNear, scene.t_far);
            double t_hit;
            int prim;
            Vec3 p_hit;
            if (scene.trace(ray.origin, ray.direction, t_hit, prim, p_hit)) {
                const auto c = scene.albedo(prim, p_hit);
                for (int ch = 0; ch < 3; ++ch)
                    rgb.at(y, x, static_cast<std::size_t>(ch)) =
                        c[static_cast<std::size_t>(ch)];
                depth.at(y, x, 0) = world_to_camera(cam.E, p_hit).z;
            } else {
                for (int ch = 0; ch < 3; ++ch)
                    rgb.at(y, x, static_cast<std::size_t>(ch)) =
                        scene.background[static_cast<std::size_t>(ch)];
                depth.at(y, x, 0) = scene.t_far;
            }
        }
    });
}

SynthResult synth_scene(std::uint64_t seed, std::size_t n_views,
                        std::size_t resolution, double noisy_color_fraction,
                        std::size_t cloud_points) {
    if (n_views < 4)
        throw std::invalid_argument("synth_scene: need at least 4 views");
    if (resolution < 16 || resolution > 512)
        throw std::invalid_argument("synth_scene: resolution must be in [16,512]");

    Rng rng(seed);
    SynthResult out;
    SyntheticScene& scene = out.scene;
    scene.t_far = kFar;
    scene.bbox = {{-3.0, -3.0, -0.05}, {3.0, 3.0, 1.8}};
    scene.ground = {{-3.0, -3.0, -0.05}, {3.0, 3.0, 0.0}};
    scene.ground_color = {0.30 + 0.1 * rng.uniform(), 0.40 + 0.1 * rng.uniform(),
                          0.25 + 0.1 * rng.uniform()};

    const std::size_t n_boxes = 3 + rng.index(6);  // 3..8
    for (std::size_t i = 0; i < n_boxes; ++i) {
        TexturedBox b;
        const double sx = rng.uniform(0.35, 0.9);
        const double sy = rng.uniform(0.35, 0.9);
        const double h = rng.uniform(0.3, 1.2);
        const double px = rng.uniform(-1.6, 1.6 - sx);
        const double py = rng.uniform(-1.6, 1.6 - sy);
        b.box = {{px, py, 0.0}, {px + sx, py + sy, h}};
        b.base_color = {0.15 + 0.7 * rng.uniform(), 0.15 + 0.7 * rng.uniform(),
                        0.15 + 0.7 * rng.uniform()};
        scene.boxes.push_back(b);
    }

    SceneDataset& ds = out.dataset;
    ds.bbox = scene.bbox;
    ds.background = scene.background;
    const double arc = 70.0 * 3.14159265358979323846 / 180.0;
    for (std::size_t i = 0; i < n_views; ++i) {
        const double az =
            -arc / 2 + arc * static_cast<double>(i) /
                           static_cast<double>(n_views - 1);
        const Camera cam = make_arc_camera(az, 4.2, 4.0, {0, 0, 0.3}, resolution);
        Image rgb, dep;
        oracle_render(scene, cam, rgb, dep);
        ds.cameras.push_back(cam);
        ds.images.push_back(quantize8(rgb));
        scene.depth_maps.push_back(std::move(dep));
    }

    // 3 uniformly spaced training views, the rest held out.
    std::vector<std::size_t> train = {
        0, (n_views - 1) / 2, n_views - 1};
    std::sort(train.begin(), train.end());
    ds.train_ids = train;
    for (std::size_t i = 0; i < n_views; ++i)
        if (std::find(train.begin(), train.end(), i) == train.end())
            ds.test_ids.push_back(i);
    ds.validate();

    // Point cloud: unproject random training pixels through the oracle.
    PointCloud& cloud = out.cloud;
    Rng cloud_rng = rng.fork();
    std::size_t attempts = 0;
    while (cloud.points.size() < cloud_points && attempts < cloud_points * 100) {
        ++attempts;
        const std::size_t view = ds.train_ids[cloud.points.size() % 3];
        const Camera& cam = ds.cameras[view];
        const std::size_t px = cloud_rng.index(cam.K.width);
        const std::size_t py = cloud_rng.index(cam.K.height);
        const Ray ray = generate_ray(cam, px, py, kNear, kFar);
        double t_hit;
        int prim;
        Vec3 p_hit;
        if (!scene.trace(ray.origin, ray.direction, t_hit, prim, p_hit)) continue;
        std::array<double, 3> c = scene.albedo(prim, p_hit);
        if (cloud_rng.uniform() < noisy_color_fraction) {
            for (double& ch : c)
                ch = std::clamp(ch + cloud_rng.uniform(-0.05, 0.05), 0.0, 1.0);
        }
        cloud.points.push_back(p_hit);
        cloud.colors.push_back(c);
    }
    if (cloud.points.empty())
        throw std::runtime_error("synth_scene: no visible surface points");
    return out;
}

}  // namespace tridf
