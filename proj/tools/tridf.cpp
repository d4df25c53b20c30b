// SPDX-License-Identifier: Apache-2.0
//
// tridf: synthesize fixtures, train, render and evaluate the hybrid
// radiance field. Exit codes: 0 success, 1 runtime failure, 2 usage error.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tridf/metrics.hpp"
#include "tridf/png_io.hpp"
#include "tridf/synth.hpp"
#include "tridf/threading.hpp"
#include "tridf/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tridf;

namespace {

// Usage/validation problems that should exit 2 instead of 1.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Camera pose_from_json(const json& j) {
    Camera cam;
    cam.K.width = j.at("width").get<std::size_t>();
    cam.K.height = j.at("height").get<std::size_t>();
    cam.K.fx = j.at("fx").get<double>();
    cam.K.fy = j.at("fy").get<double>();
    cam.K.cx = j.at("cx").get<double>();
    cam.K.cy = j.at("cy").get<double>();
    const auto wc = j.at("world_to_camera").get<std::vector<double>>();
    if (wc.size() != 12)
        throw std::runtime_error("pose: world_to_camera needs 12 floats");
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) cam.E.R.m[r * 3 + c] = wc[r * 4 + c];
        (r == 0 ? cam.E.T.x : (r == 1 ? cam.E.T.y : cam.E.T.z)) = wc[r * 4 + 3];
    }
    cam.K.validate();
    cam.E.validate();
    return cam;
}

std::string checkpoint_path(const std::string& model_arg) {
    if (fs::is_directory(model_arg)) return model_arg + "/checkpoint.bin";
    return model_arg;
}

void run_synth(const std::string& out, std::uint64_t seed, std::size_t views,
               std::size_t resolution) {
    if (views < 4 || resolution < 16 || resolution > 512)
        throw UsageError("synth: need --views >= 4 and --resolution in [16,512]");
    const SynthResult r = synth_scene(seed, views, resolution);
    fs::create_directories(out);
    save_scene(out, r.dataset);
    save_point_cloud(out + "/point_cloud.csv", r.cloud);

    json minmax = json::array();
    for (std::size_t i = 0; i < r.scene.depth_maps.size(); ++i) {
        const Image& d = r.scene.depth_maps[i];
        double lo = d.data[0], hi = d.data[0];
        for (double v : d.data) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi <= lo) hi = lo + 1.0;
        char rel[64];
        std::snprintf(rel, sizeof rel, "depth_%03zu.png", i);
        write_png_gray16(out + "/" + rel, d, lo, hi);
        minmax.push_back({{"file", rel}, {"min", lo}, {"max", hi}});
    }
    std::ofstream(out + "/depth_minmax.json") << minmax.dump(2) << "\n";
}

int run_train(const std::string& scene_dir, const std::string& config_path,
              const std::string& out) {
    TrainConfig cfg;
    try {
        cfg = TrainConfig::from_json(read_file(config_path));
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    const SceneDataset scene = load_scene(scene_dir);
    const PointCloud cloud = load_point_cloud(scene_dir + "/point_cloud.csv");
    fs::create_directories(out);
    std::ofstream(out + "/config.json") << cfg.to_json() << "\n";
    const TrainResult res = train(scene, cloud, cfg, out);
    std::cout << "final test PSNR " << res.final_psnr_test << " dB, SSIM "
              << res.final_ssim_test << "\n";
    return 0;
}

void run_render(const std::string& model_arg, const std::string& pose_path,
                const std::string& out, const std::string& depth_out,
                std::size_t samples, double t_near, double t_far) {
    const FieldModel model = FieldModel::load(checkpoint_path(model_arg));
    const Camera cam = pose_from_json(json::parse(read_file(pose_path)));
    const FrameRender fr =
        render_frame(model, cam, samples, t_near, t_far, nullptr);
    write_png_rgb8(out, fr.rgb);
    if (!depth_out.empty()) {
        double lo = fr.depth.data[0], hi = fr.depth.data[0];
        for (double v : fr.depth.data) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi <= lo) hi = lo + 1.0;
        write_png_gray16(depth_out, fr.depth, lo, hi);
        json mm = {{"min", lo}, {"max", hi}};
        std::ofstream(depth_out + ".minmax.json") << mm.dump(2) << "\n";
    }
}

void run_eval(const std::string& model_arg, const std::string& scene_dir,
              const std::string& report, std::size_t samples, double t_near,
              double t_far) {
    const FieldModel model = FieldModel::load(checkpoint_path(model_arg));
    const SceneDataset scene = load_scene(scene_dir);
    if (model.train_cameras.empty() ||
        model.train_cameras[0].K.width != scene.cameras[0].K.width ||
        model.train_cameras[0].K.height != scene.cameras[0].K.height)
        throw std::runtime_error("eval: model/scene resolution mismatch");

    std::ofstream out(report);
    if (!out) throw std::runtime_error("eval: cannot write " + report);
    out << "view,psnr,ssim\n";
    out.precision(17);
    double sum_p = 0, sum_s = 0;
    for (std::size_t id : scene.test_ids) {
        const FrameRender fr =
            render_frame(model, scene.cameras[id], samples, t_near, t_far);
        const double p = psnr(scene.images[id], fr.rgb);
        const double s = ssim(scene.images[id], fr.rgb);
        out << id << ',' << p << ',' << s << '\n';
        sum_p += p;
        sum_s += s;
    }
    const double n = static_cast<double>(scene.test_ids.size());
    out << "mean," << (n > 0 ? sum_p / n : 0.0) << ','
        << (n > 0 ? sum_s / n : 0.0) << '\n';
    std::cout << "mean PSNR " << (n > 0 ? sum_p / n : 0.0) << " dB\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"TriDF hybrid radiance field trainer/renderer"};
    app.require_subcommand(1);

    std::size_t threads = 1;
    if (const char* env = std::getenv("TRIDF_THREADS"))
        threads = static_cast<std::size_t>(std::strtoul(env, nullptr, 10));
    app.add_option("--threads", threads, "worker threads (default 1)");

    auto* synth = app.add_subcommand("synth", "generate a synthetic scene");
    std::string out_dir;
    std::uint64_t seed = 0;
    std::size_t views = 4, resolution = 64;
    synth->add_option("--out", out_dir)->required();
    synth->add_option("--seed", seed);
    synth->add_option("--views", views);
    synth->add_option("--resolution", resolution);

    auto* tr = app.add_subcommand("train", "optimize a model on a scene");
    std::string scene_dir, config_path, train_out;
    tr->add_option("--scene", scene_dir)->required();
    tr->add_option("--config", config_path)->required();
    tr->add_option("--out", train_out)->required();

    auto* rd = app.add_subcommand("render", "render a novel view");
    std::string model_arg, pose_path, render_out, depth_out;
    std::size_t samples = 64;
    double t_near = 0.05, t_far = 100.0;
    rd->add_option("--model", model_arg)->required();
    rd->add_option("--pose", pose_path)->required();
    rd->add_option("--out", render_out)->required();
    rd->add_option("--depth", depth_out);
    rd->add_option("--samples", samples);
    rd->add_option("--t-near", t_near);
    rd->add_option("--t-far", t_far);

    auto* ev = app.add_subcommand("eval", "PSNR/SSIM report on test views");
    std::string eval_model, eval_scene, report_path;
    std::size_t eval_samples = 64;
    double eval_near = 0.05, eval_far = 100.0;
    ev->add_option("--model", eval_model)->required();
    ev->add_option("--scene", eval_scene)->required();
    ev->add_option("--report", report_path)->required();
    ev->add_option("--samples", eval_samples);
    ev->add_option("--t-near", eval_near);
    ev->add_option("--t-far", eval_far);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    set_num_threads(std::max<std::size_t>(1, threads));

    try {
        if (synth->parsed()) {
            run_synth(out_dir, seed, views, resolution);
        } else if (tr->parsed()) {
            return run_train(scene_dir, config_path, train_out);
        } else if (rd->parsed()) {
            run_render(model_arg, pose_path, render_out, depth_out, samples,
                       t_near, t_far);
        } else if (ev->parsed()) {
            run_eval(eval_model, eval_scene, report_path, eval_samples,
                     eval_near, eval_far);
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
