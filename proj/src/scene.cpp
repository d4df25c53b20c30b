// SPDX-License-Identifier: Apache-2.0
#include "tridf/scene.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tridf/png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace tridf {

bool Aabb::intersect(const Vec3& origin, const Vec3& dir, double& t0,
                     double& t1) const {
    double lo = -1e300, hi = 1e300;
    for (int i = 0; i < 3; ++i) {
        const double o = origin[i], d = dir[i];
        const double mn = min[i], mx = max[i];
        if (std::fabs(d) < 1e-15) {
            if (o < mn || o > mx) return false;
            continue;
        }
        double ta = (mn - o) / d, tb = (mx - o) / d;
        if (ta > tb) std::swap(ta, tb);
        lo = std::max(lo, ta);
        hi = std::min(hi, tb);
    }
    if (lo > hi) return false;
    t0 = lo;
    t1 = hi;
    return true;
}

void SceneDataset::validate() const {
    if (cameras.size() != images.size())
        throw std::runtime_error("scene: camera/image count mismatch");
    for (std::size_t i = 0; i < cameras.size(); ++i) {
        cameras[i].K.validate();
        cameras[i].E.validate();
        if (images[i].width != cameras[i].K.width ||
            images[i].height != cameras[i].K.height)
            throw std::runtime_error("scene: image size mismatch vs camera " +
                                     std::to_string(i));
    }
    if (train_ids.size() < 2)
        throw std::runtime_error("scene: need at least 2 train views");
    std::set<std::size_t> train(train_ids.begin(), train_ids.end());
    for (std::size_t id : test_ids)
        if (train.count(id))
            throw std::runtime_error("scene: train/test overlap at view " +
                                     std::to_string(id));
    for (std::size_t id : train_ids)
        if (id >= cameras.size())
            throw std::runtime_error("scene: train id out of range");
    for (std::size_t id : test_ids)
        if (id >= cameras.size())
            throw std::runtime_error("scene: test id out of range");
    if (!(bbox.min.x < bbox.max.x && bbox.min.y < bbox.max.y &&
          bbox.min.z < bbox.max.z))
        throw std::runtime_error("scene: degenerate bbox");
}

std::vector<Camera> SceneDataset::train_cameras() const {
    std::vector<Camera> out;
    for (std::size_t id : train_ids) out.push_back(cameras[id]);
    return out;
}

namespace {

json camera_to_json(const Camera& cam, const std::string& image_rel) {
    json j;
    j["image"] = image_rel;
    j["width"] = cam.K.width;
    j["height"] = cam.K.height;
    j["fx"] = cam.K.fx;
    j["fy"] = cam.K.fy;
    j["cx"] = cam.K.cx;
    j["cy"] = cam.K.cy;
    std::vector<double> wc(12);
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) wc[r * 4 + c] = cam.E.R.m[r * 3 + c];
        wc[r * 4 + 3] = (r == 0 ? cam.E.T.x : (r == 1 ? cam.E.T.y : cam.E.T.z));
    }
    j["world_to_camera"] = wc;
    return j;
}

Camera camera_from_json(const json& j, std::string& image_rel) {
    Camera cam;
    image_rel = j.at("image").get<std::string>();
    cam.K.width = j.at("width").get<std::size_t>();
    cam.K.height = j.at("height").get<std::size_t>();
    cam.K.fx = j.at("fx").get<double>();
    cam.K.fy = j.at("fy").get<double>();
    cam.K.cx = j.at("cx").get<double>();
    cam.K.cy = j.at("cy").get<double>();
    const auto wc = j.at("world_to_camera").get<std::vector<double>>();
    if (wc.size() != 12)
        throw std::runtime_error("cameras.json: world_to_camera needs 12 floats");
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) cam.E.R.m[r * 3 + c] = wc[r * 4 + c];
        (r == 0 ? cam.E.T.x : (r == 1 ? cam.E.T.y : cam.E.T.z)) = wc[r * 4 + 3];
    }
    return cam;
}

json load_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("missing file: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("corrupt file " + path.string() + ": " +
                                 e.what());
    }
    return j;
}

}  // namespace

SceneDataset load_scene(const std::string& dir) {
    const fs::path root(dir);
    const json jc = load_json_file(root / "cameras.json");
    const json js = load_json_file(root / "split.json");

    SceneDataset scene;
    const json* cam_array = nullptr;
    bool have_bbox = false;
    if (jc.is_array()) {
        cam_array = &jc;
    } else {
        cam_array = &jc.at("cameras");
        if (jc.contains("bbox")) {
            const auto mn = jc["bbox"].at("min").get<std::vector<double>>();
            const auto mx = jc["bbox"].at("max").get<std::vector<double>>();
            if (mn.size() != 3 || mx.size() != 3)
                throw std::runtime_error("cameras.json: bbox needs 3-vectors");
            scene.bbox.min = {mn[0], mn[1], mn[2]};
            scene.bbox.max = {mx[0], mx[1], mx[2]};
            have_bbox = true;
        }
        if (jc.contains("background")) {
            const auto bgv = jc["background"].get<std::vector<double>>();
            if (bgv.size() != 3)
                throw std::runtime_error("cameras.json: background needs 3 values");
            scene.background = {bgv[0], bgv[1], bgv[2]};
        }
    }
    for (const json& j : *cam_array) {
        std::string rel;
        scene.cameras.push_back(camera_from_json(j, rel));
        scene.images.push_back(read_png_rgb8((root / rel).string()));
    }
    scene.train_ids = js.at("train").get<std::vector<std::size_t>>();
    scene.test_ids = js.at("test").get<std::vector<std::size_t>>();

    if (!have_bbox) {
        // fall back to the point cloud bounds padded by 10%
        const fs::path cloud_path = root / "point_cloud.csv";
        if (!fs::exists(cloud_path))
            throw std::runtime_error(
                "cameras.json has no bbox and there is no point_cloud.csv in " +
                dir);
        const PointCloud cloud = load_point_cloud(cloud_path.string());
        Vec3 mn = cloud.points[0], mx = cloud.points[0];
        for (const Vec3& p : cloud.points) {
            mn = {std::min(mn.x, p.x), std::min(mn.y, p.y), std::min(mn.z, p.z)};
            mx = {std::max(mx.x, p.x), std::max(mx.y, p.y), std::max(mx.z, p.z)};
        }
        const Vec3 pad = (mx - mn) * 0.05;
        scene.bbox.min = mn - pad;
        scene.bbox.max = mx + pad;
    }
    scene.validate();
    return scene;
}

void save_scene(const std::string& dir, const SceneDataset& scene) {
    const fs::path root(dir);
    fs::create_directories(root / "images");
    json jcams = json::array();
    for (std::size_t i = 0; i < scene.cameras.size(); ++i) {
        char rel[64];
        std::snprintf(rel, sizeof rel, "images/view_%03zu.png", i);
        write_png_rgb8((root / rel).string(), scene.images[i]);
        jcams.push_back(camera_to_json(scene.cameras[i], rel));
    }
    json jc;
    jc["cameras"] = std::move(jcams);
    jc["bbox"] = {{"min", {scene.bbox.min.x, scene.bbox.min.y, scene.bbox.min.z}},
                  {"max", {scene.bbox.max.x, scene.bbox.max.y, scene.bbox.max.z}}};
    jc["background"] = {scene.background[0], scene.background[1],
                        scene.background[2]};
    std::ofstream(root / "cameras.json") << jc.dump(2) << "\n";

    json js;
    js["train"] = scene.train_ids;
    js["test"] = scene.test_ids;
    std::ofstream(root / "split.json") << js.dump(2) << "\n";
}

PointCloud load_point_cloud(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("missing file: " + path);
    PointCloud cloud;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        double v[6];
        char comma;
        bool ok = true;
        for (int i = 0; i < 6 && ok; ++i) {
            if (!(ss >> v[i])) ok = false;
            if (i < 5 && ok && !(ss >> comma && comma == ',')) ok = false;
        }
        if (!ok)
            throw std::runtime_error(path + ": malformed line " +
                                     std::to_string(lineno));
        cloud.points.push_back({v[0], v[1], v[2]});
        cloud.colors.push_back({v[3] / 255.0, v[4] / 255.0, v[5] / 255.0});
    }
    if (cloud.points.empty())
        throw std::runtime_error(path + ": point cloud is empty");
    return cloud;
}

void save_point_cloud(const std::string& path, const PointCloud& cloud) {
    std::ofstream out(path);
    out.precision(17);
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        const Vec3& p = cloud.points[i];
        const auto& c = cloud.colors[i];
        out << p.x << "," << p.y << "," << p.z << "," << c[0] * 255.0 << ","
            << c[1] * 255.0 << "," << c[2] * 255.0 << "\n";
    }
}

}  // namespace tridf
