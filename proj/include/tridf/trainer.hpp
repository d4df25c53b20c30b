// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "tridf/renderer.hpp"
#include "tridf/supervision.hpp"

namespace tridf {

struct TrainConfig {
    std::size_t total_iters = 2000;
    std::size_t depth_stage_iters = 666;  // one third of the desk default
    std::size_t ray_batch = 1024;
    std::size_t samples_per_ray = 64;
    std::size_t anchors_per_iter = 64;
    std::size_t patch_size = 16;
    std::size_t patch_stride = 4;
    std::size_t patch_samples = 0;  // samples per patch ray; 0 = samples_per_ray
    double learning_rate = 1e-4;
    double plane_lr_scale = 1.0;  // extra learning-rate factor for the planes
    double weight_decay = 0.0;
    std::uint64_t seed = 0;
    std::size_t eval_every = 500;  // PSNR/SSIM on test views; 0 = final only
    bool occupancy = false;
    std::size_t occupancy_res = 32;
    double occupancy_threshold = 0.01;
    std::size_t occupancy_update_every = 250;
    double t_near = 0.05;
    double t_far = 100.0;
    ModelConfig model;

    void validate() const;
    // Strict JSON: any unknown key is an error.
    static TrainConfig from_json(const std::string& text);
    std::string to_json() const;
};

// One tensor of the model with its optimizer metadata. Collection order
// matches register_model so tape gradients line up index-for-index.
struct ParamRef {
    TensorF* tensor;
    bool decay;  // decoupled weight decay (MLP weight matrices only)
    bool plane;  // triplane feature plane (gets plane_lr_scale)
    const char* name;
};

std::vector<ParamRef> collect_params(FieldModel& model);
std::vector<Value> collect_handles(const ModelHandles& handles);

// AdamW with bias correction; beta1=0.9, beta2=0.999, eps=1e-8.
struct OptimizerState {
    std::vector<TensorF> m, v;
    std::size_t step = 0;
};

void optimizer_step(std::span<const ParamRef> params,
                    std::span<const TensorF> grads, OptimizerState& state,
                    double lr, double plane_lr_scale, double wd);

struct TrainContext {
    FieldModel* model = nullptr;
    const SceneDataset* scene = nullptr;
    std::vector<KeypointAnchor> anchors;
    OptimizerState opt;
    OccupancyGrid grid;  // valid only when cfg.occupancy
    Rng rng{0};
};

// One optimization step of the two-stage schedule: a photometric ray batch
// always; anchors + L_depth while iter < depth_stage_iters, afterwards one
// smoothness patch from a training or interpolated pose.
LossReport train_step(TrainContext& ctx, std::size_t iter,
                      const TrainConfig& cfg);

struct TrainResult {
    FieldModel model;
    std::vector<LossReport> reports;
    double final_psnr_test = 0, final_ssim_test = 0;
};

// Full run. When out_dir is non-empty, writes checkpoint.bin, metrics.csv
// (iter,L_color,L_depth,L_smooth,L_total,psnr_test,ssim_test,elapsed_s) and
// anchors.csv there.
TrainResult train(const SceneDataset& scene, const PointCloud& cloud,
                  const TrainConfig& cfg, const std::string& out_dir = "");

// Pose between two training cameras: lerped center, slerped orientation.
// Used for smoothness patches rendered away from the training viewpoints.
Camera interpolate_cameras(const Camera& a, const Camera& b, double t);

// Mean PSNR/SSIM of the model against the given views (eval-mode renders).
void eval_views(const FieldModel& model, const SceneDataset& scene,
                std::span<const std::size_t> view_ids, std::size_t n_samples,
                double t_near, double t_far, const OccupancyGrid* grid,
                double& mean_psnr, double& mean_ssim);

}  // namespace tridf
