// SPDX-License-Identifier: Apache-2.0
#include "tridf/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "tridf/metrics.hpp"

using nlohmann::json;

namespace tridf {

void TrainConfig::validate() const {
    if (depth_stage_iters > total_iters)
        throw std::invalid_argument(
            "TrainConfig: depth_stage_iters > total_iters");
    if (ray_batch == 0 || samples_per_ray < 2 || anchors_per_iter == 0 ||
        patch_size < 2 || patch_stride == 0)
        throw std::invalid_argument("TrainConfig: counts must be positive");
    if (!(learning_rate > 0) || !(plane_lr_scale > 0) || weight_decay < 0)
        throw std::invalid_argument("TrainConfig: bad optimizer settings");
    if (!(t_far > t_near) || t_near < 0)
        throw std::invalid_argument("TrainConfig: bad ray bounds");
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    const json j = json::parse(text);
    TrainConfig c;
    for (const auto& [key, val] : j.items()) {
        if (key == "total_iters") c.total_iters = val.get<std::size_t>();
        else if (key == "depth_stage_iters")
            c.depth_stage_iters = val.get<std::size_t>();
        else if (key == "ray_batch") c.ray_batch = val.get<std::size_t>();
        else if (key == "samples_per_ray")
            c.samples_per_ray = val.get<std::size_t>();
        else if (key == "anchors_per_iter")
            c.anchors_per_iter = val.get<std::size_t>();
        else if (key == "patch_size") c.patch_size = val.get<std::size_t>();
        else if (key == "patch_stride") c.patch_stride = val.get<std::size_t>();
        else if (key == "patch_samples")
            c.patch_samples = val.get<std::size_t>();
        else if (key == "learning_rate") c.learning_rate = val.get<double>();
        else if (key == "plane_lr_scale") c.plane_lr_scale = val.get<double>();
        else if (key == "weight_decay") c.weight_decay = val.get<double>();
        else if (key == "seed") c.seed = val.get<std::uint64_t>();
        else if (key == "eval_every") c.eval_every = val.get<std::size_t>();
        else if (key == "occupancy") c.occupancy = val.get<bool>();
        else if (key == "occupancy_res")
            c.occupancy_res = val.get<std::size_t>();
        else if (key == "occupancy_threshold")
            c.occupancy_threshold = val.get<double>();
        else if (key == "occupancy_update_every")
            c.occupancy_update_every = val.get<std::size_t>();
        else if (key == "t_near") c.t_near = val.get<double>();
        else if (key == "t_far") c.t_far = val.get<double>();
        else if (key == "model") {
            for (const auto& [mk, mv] : val.items()) {
                if (mk == "plane_res") c.model.plane_res = mv.get<std::size_t>();
                else if (mk == "plane_channels")
                    c.model.plane_channels = mv.get<std::size_t>();
                else if (mk == "density_depth")
                    c.model.density_depth = mv.get<std::size_t>();
                else if (mk == "density_width")
                    c.model.density_width = mv.get<std::size_t>();
                else if (mk == "base_depth")
                    c.model.base_depth = mv.get<std::size_t>();
                else if (mk == "base_width")
                    c.model.base_width = mv.get<std::size_t>();
                else if (mk == "color_depth")
                    c.model.color_depth = mv.get<std::size_t>();
                else if (mk == "color_width")
                    c.model.color_width = mv.get<std::size_t>();
                else if (mk == "pe_freqs") c.model.pe_freqs = mv.get<std::size_t>();
                else if (mk == "fm_dim") c.model.fm_dim = mv.get<std::size_t>();
                else if (mk == "sigma_bias_init")
                    c.model.sigma_bias_init = mv.get<double>();
                else if (mk == "feature_seed")
                    c.model.feature_seed = mv.get<std::uint64_t>();
                else if (mk == "init_seed")
                    c.model.init_seed = mv.get<std::uint64_t>();
                else
                    throw std::invalid_argument(
                        "TrainConfig: unknown model key '" + mk + "'");
            }
        } else {
            throw std::invalid_argument("TrainConfig: unknown key '" + key +
                                        "'");
        }
    }
    c.validate();
    return c;
}

std::string TrainConfig::to_json() const {
    json j;
    j["total_iters"] = total_iters;
    j["depth_stage_iters"] = depth_stage_iters;
    j["ray_batch"] = ray_batch;
    j["samples_per_ray"] = samples_per_ray;
    j["anchors_per_iter"] = anchors_per_iter;
    j["patch_size"] = patch_size;
    j["patch_stride"] = patch_stride;
    j["patch_samples"] = patch_samples;
    j["learning_rate"] = learning_rate;
    j["plane_lr_scale"] = plane_lr_scale;
    j["weight_decay"] = weight_decay;
    j["seed"] = seed;
    j["eval_every"] = eval_every;
    j["occupancy"] = occupancy;
    j["occupancy_res"] = occupancy_res;
    j["occupancy_threshold"] = occupancy_threshold;
    j["occupancy_update_every"] = occupancy_update_every;
    j["t_near"] = t_near;
    j["t_far"] = t_far;
    j["model"] = {{"plane_res", model.plane_res},
                  {"plane_channels", model.plane_channels},
                  {"density_depth", model.density_depth},
                  {"density_width", model.density_width},
                  {"base_depth", model.base_depth},
                  {"base_width", model.base_width},
                  {"color_depth", model.color_depth},
                  {"color_width", model.color_width},
                  {"pe_freqs", model.pe_freqs},
                  {"fm_dim", model.fm_dim},
                  {"sigma_bias_init", model.sigma_bias_init},
                  {"feature_seed", model.feature_seed},
                  {"init_seed", model.init_seed}};
    return j.dump(2);
}

std::vector<ParamRef> collect_params(FieldModel& model) {
    std::vector<ParamRef> p;
    p.push_back({&model.planes.xy, false, true, "planes.xy"});
    p.push_back({&model.planes.yz, false, true, "planes.yz"});
    p.push_back({&model.planes.zx, false, true, "planes.zx"});
    const auto add_mlp = [&p](MlpParams& mlp, const char* wn, const char* bn) {
        for (TensorF& w : mlp.weights) p.push_back({&w, true, false, wn});
        for (TensorF& b : mlp.biases) p.push_back({&b, false, false, bn});
    };
    add_mlp(model.density, "density.weight", "density.bias");
    add_mlp(model.base, "base.weight", "base.bias");
    add_mlp(model.color, "color.weight", "color.bias");
    return p;
}

std::vector<Value> collect_handles(const ModelHandles& handles) {
    std::vector<Value> v = {handles.planes.xy, handles.planes.yz,
                            handles.planes.zx};
    for (const MlpHandles* m : {&handles.density, &handles.base,
                                &handles.color}) {
        for (Value w : m->weights) v.push_back(w);
        for (Value b : m->biases) v.push_back(b);
    }
    return v;
}

void optimizer_step(std::span<const ParamRef> params,
                    std::span<const TensorF> grads, OptimizerState& state,
                    double lr, double plane_lr_scale, double wd) {
    constexpr double kB1 = 0.9, kB2 = 0.999, kEps = 1e-8;
    if (params.size() != grads.size())
        throw std::invalid_argument("optimizer_step: param/grad count mismatch");
    if (state.m.empty()) {
        for (const ParamRef& p : params) {
            state.m.emplace_back(p.tensor->shape, 0.0);
            state.v.emplace_back(p.tensor->shape, 0.0);
        }
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(kB1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(kB2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const ParamRef& p = params[i];
        if (!grads[i].all_finite())
            throw std::runtime_error(std::string("optimizer_step: non-finite "
                                                 "gradient in ") +
                                     p.name);
        if (grads[i].numel() != p.tensor->numel())
            throw std::invalid_argument(
                std::string("optimizer_step: grad shape mismatch in ") +
                p.name);
        const double step_lr = p.plane ? lr * plane_lr_scale : lr;
        std::vector<double>& m = state.m[i].data;
        std::vector<double>& v = state.v[i].data;
        std::vector<double>& w = p.tensor->data;
        const std::vector<double>& g = grads[i].data;
        for (std::size_t k = 0; k < w.size(); ++k) {
            m[k] = kB1 * m[k] + (1.0 - kB1) * g[k];
            v[k] = kB2 * v[k] + (1.0 - kB2) * g[k] * g[k];
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            w[k] -= step_lr * mhat / (std::sqrt(vhat) + kEps);
            if (p.decay) w[k] -= step_lr * wd * w[k];
        }
    }
}

namespace {

struct Quat {
    double w = 1, x = 0, y = 0, z = 0;
};

Quat quat_from_mat(const Mat3& r) {
    const auto& m = r.m;
    Quat q;
    const double tr = m[0] + m[4] + m[8];
    if (tr > 0) {
        const double s = std::sqrt(tr + 1.0) * 2.0;
        q.w = 0.25 * s;
        q.x = (m[7] - m[5]) / s;
        q.y = (m[2] - m[6]) / s;
        q.z = (m[3] - m[1]) / s;
    } else if (m[0] > m[4] && m[0] > m[8]) {
        const double s = std::sqrt(1.0 + m[0] - m[4] - m[8]) * 2.0;
        q.w = (m[7] - m[5]) / s;
        q.x = 0.25 * s;
        q.y = (m[1] + m[3]) / s;
        q.z = (m[2] + m[6]) / s;
    } else if (m[4] > m[8]) {
        const double s = std::sqrt(1.0 + m[4] - m[0] - m[8]) * 2.0;
        q.w = (m[2] - m[6]) / s;
        q.x = (m[1] + m[3]) / s;
        q.y = 0.25 * s;
        q.z = (m[5] + m[7]) / s;
    } else {
        const double s = std::sqrt(1.0 + m[8] - m[0] - m[4]) * 2.0;
        q.w = (m[3] - m[1]) / s;
        q.x = (m[2] + m[6]) / s;
        q.y = (m[5] + m[7]) / s;
        q.z = 0.25 * s;
    }
    return q;
}

Mat3 quat_to_mat(const Quat& q) {
    Mat3 r;
    const double n =
        std::sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z);
    const double w = q.w / n, x = q.x / n, y = q.y / n, z = q.z / n;
    r.m = {1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
           2 * (x * y + w * z),     1 - 2 * (x * x + z * z),
           2 * (y * z - w * x),     2 * (x * z - w * y), 2 * (y * z + w * x),
           1 - 2 * (x * x + y * y)};
    return r;
}

Quat quat_slerp(Quat a, const Quat& b0, double t) {
    Quat b = b0;
    double dot = a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
    if (dot < 0) {
        b = {-b.w, -b.x, -b.y, -b.z};
        dot = -dot;
    }
    double wa, wb;
    if (dot > 0.9995) {  // nearly parallel: lerp
        wa = 1.0 - t;
        wb = t;
    } else {
        const double theta = std::acos(std::clamp(dot, -1.0, 1.0));
        wa = std::sin((1.0 - t) * theta) / std::sin(theta);
        wb = std::sin(t * theta) / std::sin(theta);
    }
    return {wa * a.w + wb * b.w, wa * a.x + wb * b.x, wa * a.y + wb * b.y,
            wa * a.z + wb * b.z};
}

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
}

}  // namespace

Camera interpolate_cameras(const Camera& a, const Camera& b, double t) {
    Camera out = a;
    const Mat3 r =
        quat_to_mat(quat_slerp(quat_from_mat(a.E.R), quat_from_mat(b.E.R), t));
    const Vec3 ca = a.center(), cb = b.center();
    const Vec3 c = ca * (1.0 - t) + cb * t;
    out.E.R = r;
    const Vec3 rc = r * c;
    out.E.T = {-rc.x, -rc.y, -rc.z};
    return out;
}

LossReport train_step(TrainContext& ctx, std::size_t iter,
                      const TrainConfig& cfg) {
    FieldModel& model = *ctx.model;
    const SceneDataset& scene = *ctx.scene;
    const Stage stage =
        iter < cfg.depth_stage_iters ? Stage::depth_guided : Stage::smooth;

    if (cfg.occupancy && iter % cfg.occupancy_update_every == 0)
        ctx.grid = occupancy_grid_update(model, cfg.occupancy_res,
                                         cfg.occupancy_threshold);
    const OccupancyGrid* grid =
        cfg.occupancy && ctx.grid.initialized() ? &ctx.grid : nullptr;

    Tape tape;
    const ModelHandles h = register_model(tape, model);

    // Photometric batch: uniform pixels over all training views.
    std::vector<Ray> rays(cfg.ray_batch);
    TensorF gt({cfg.ray_batch, 3});
    for (std::size_t b = 0; b < cfg.ray_batch; ++b) {
        const std::size_t view =
            scene.train_ids[ctx.rng.index(scene.train_ids.size())];
        const Camera& cam = scene.cameras[view];
        const std::size_t u = ctx.rng.index(cam.K.width);
        const std::size_t v = ctx.rng.index(cam.K.height);
        Ray r = generate_ray(cam, u, v, cfg.t_near, cfg.t_far);
        if (!clip_ray_to_bbox(model.bbox, r)) r.t_far = r.t_near;
        rays[b] = r;
        for (std::size_t c = 0; c < 3; ++c)
            gt.data[b * 3 + c] = scene.images[view].at(v, u, c);
    }
    const RenderBatch rb = render_rays(tape, model, h, rays,
                                       cfg.samples_per_ray, true, &ctx.rng,
                                       grid);
    const Value l_color =
        color_loss(tape, tape.slice_cols(rb.out, 0, 3), gt);

    Value l_depth, l_smooth;
    if (stage == Stage::depth_guided) {
        // Uniform sample without replacement from the anchor set.
        const std::size_t n_avail = ctx.anchors.size();
        const std::size_t ns = std::min(cfg.anchors_per_iter, n_avail);
        std::vector<std::size_t> idx(n_avail);
        for (std::size_t i = 0; i < n_avail; ++i) idx[i] = i;
        for (std::size_t i = 0; i < ns; ++i)
            std::swap(idx[i], idx[i + ctx.rng.index(n_avail - i)]);
        std::vector<KeypointAnchor> picked;
        std::vector<Ray> arays;
        TensorF zfac({ns, 1});
        const std::vector<Camera> tcams = scene.train_cameras();
        for (std::size_t i = 0; i < ns; ++i) {
            const KeypointAnchor& a = ctx.anchors[idx[i]];
            const Camera& cam = tcams[a.view_id];
            Ray r = ray_through(cam, a.u, a.v, cfg.t_near, cfg.t_far);
            // Rendered depth is the ray parameter; the anchor target is the
            // camera-space Z, so scale by the direction's camera-Z component.
            zfac.data[i] = (cam.E.R * r.direction).z;
            if (!clip_ray_to_bbox(model.bbox, r)) r.t_far = r.t_near;
            arays.push_back(r);
            picked.push_back(a);
        }
        const RenderBatch db = render_rays(tape, model, h, arays,
                                           cfg.samples_per_ray, true,
                                           &ctx.rng, grid);
        const Value pred_z = tape.mul(tape.slice_cols(db.out, 3, 4),
                                      tape.constant(std::move(zfac)));
        l_depth = depth_loss(tape, pred_z, picked);
    } else {
        const std::vector<Camera> tcams = scene.train_cameras();
        Camera pcam = tcams[ctx.rng.index(tcams.size())];
        if (tcams.size() >= 2 && ctx.rng.uniform() < 0.5) {
            std::size_t ia = ctx.rng.index(tcams.size());
            std::size_t ib = ctx.rng.index(tcams.size() - 1);
            if (ib >= ia) ++ib;
            pcam = interpolate_cameras(tcams[ia], tcams[ib],
                                       ctx.rng.uniform());
        }
        const std::size_t span = (cfg.patch_size - 1) * cfg.patch_stride;
        if (pcam.K.width <= span || pcam.K.height <= span)
            throw std::invalid_argument(
                "train_step: patch footprint larger than the image");
        const std::size_t half = span / 2;
        const std::size_t cu = half + ctx.rng.index(pcam.K.width - span);
        const std::size_t cv = half + ctx.rng.index(pcam.K.height - span);
        const std::size_t psamples =
            cfg.patch_samples > 0 ? cfg.patch_samples : cfg.samples_per_ray;
        const PatchRender pr =
            render_patch(tape, model, h, pcam, cu, cv, cfg.t_near, cfg.t_far,
                         psamples, cfg.patch_size, cfg.patch_stride, grid);
        l_smooth = smoothness_loss(tape, pr.disparity, tape.value(pr.rgb),
                                   cfg.patch_size, pr.valid);
    }

    const TotalLoss tl = total_loss(tape, l_color, l_depth, l_smooth, stage);
    tape.backward(tl.value);

    const std::vector<ParamRef> params = collect_params(model);
    const std::vector<Value> handles = collect_handles(h);
    std::vector<TensorF> grads;
    grads.reserve(handles.size());
    for (Value v : handles) grads.push_back(tape.grad(v));
    optimizer_step(params, grads, ctx.opt, cfg.learning_rate,
                   cfg.plane_lr_scale, cfg.weight_decay);
    return tl.report;
}

void eval_views(const FieldModel& model, const SceneDataset& scene,
                std::span<const std::size_t> view_ids, std::size_t n_samples,
                double t_near, double t_far, const OccupancyGrid* grid,
                double& mean_psnr, double& mean_ssim) {
    if (view_ids.empty()) {
        mean_psnr = std::numeric_limits<double>::quiet_NaN();
        mean_ssim = std::numeric_limits<double>::quiet_NaN();
        return;
    }
    double p = 0, s = 0;
    for (std::size_t id : view_ids) {
        const FrameRender fr = render_frame(model, scene.cameras[id],
                                            n_samples, t_near, t_far, grid);
        p += psnr(scene.images[id], fr.rgb);
        s += ssim(scene.images[id], fr.rgb);
    }
    mean_psnr = p / static_cast<double>(view_ids.size());
    mean_ssim = s / static_cast<double>(view_ids.size());
}

TrainResult train(const SceneDataset& scene, const PointCloud& cloud,
                  const TrainConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    scene.validate();
    TrainResult result;
    result.model.init(cfg.model, scene);

    TrainContext ctx;
    ctx.model = &result.model;
    ctx.scene = &scene;
    ctx.rng = Rng(cfg.seed);
    std::vector<Image> train_images;
    for (std::size_t id : scene.train_ids)
        train_images.push_back(scene.images[id]);
    ctx.anchors = build_anchors(cloud, scene.train_cameras(), train_images);

    std::ofstream csv;
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        save_anchors_csv(out_dir + "/anchors.csv", ctx.anchors);
        csv.open(out_dir + "/metrics.csv");
        if (!csv)
            throw std::runtime_error("train: cannot write metrics.csv in " +
                                     out_dir);
        csv << "iter,L_color,L_depth,L_smooth,L_total,psnr_test,ssim_test,"
               "elapsed_s\n";
    }

    const auto t0 = std::chrono::steady_clock::now();
    const OccupancyGrid* grid =
        cfg.occupancy && ctx.grid.initialized() ? &ctx.grid : nullptr;
    for (std::size_t iter = 0; iter < cfg.total_iters; ++iter) {
        const LossReport rep = train_step(ctx, iter, cfg);
        result.reports.push_back(rep);

        const bool last = iter + 1 == cfg.total_iters;
        const bool do_eval =
            last || (cfg.eval_every > 0 && (iter + 1) % cfg.eval_every == 0);
        std::string psnr_s, ssim_s;
        if (do_eval) {
            grid = cfg.occupancy && ctx.grid.initialized() ? &ctx.grid
                                                           : nullptr;
            double mp = 0, ms = 0;
            eval_views(result.model, scene, scene.test_ids,
                       cfg.samples_per_ray, cfg.t_near, cfg.t_far, grid, mp,
                       ms);
            result.final_psnr_test = mp;
            result.final_ssim_test = ms;
            psnr_s = fmt(mp);
            ssim_s = fmt(ms);
            if (!out_dir.empty())
                result.model.save(out_dir + "/checkpoint.bin");
        }
        if (csv.is_open()) {
            const double elapsed =
                std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              t0)
                    .count();
            csv << iter << ',' << fmt(rep.l_color) << ',' << fmt(rep.l_depth)
                << ',' << fmt(rep.l_smooth) << ',' << fmt(rep.l_total) << ','
                << psnr_s << ',' << ssim_s << ',' << fmt(elapsed) << '\n';
        }
    }
    if (!out_dir.empty()) result.model.save(out_dir + "/checkpoint.bin");
    return result;
}

}  // namespace tridf
