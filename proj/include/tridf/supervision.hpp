// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "tridf/scene.hpp"
#include "tridf/tape.hpp"

namespace tridf {

// A cloud point projected into one training view: the projective depth acts
// as a supervision target, weighted by cross-view color consistency.
struct KeypointAnchor {
    std::size_t view_id = 0;  // index into the training-view list
    double u = 0, v = 0;      // continuous pixel coordinates
    double target_depth = 0;  // camera-space Z, world units
    double weight = 0;        // in [0, 1]
    std::size_t point_index = 0;
};

enum class Stage { depth_guided, smooth };

inline constexpr double kLambdaDepth = 0.001;
inline constexpr double kLambdaSmooth = 1.0;

struct LossReport {
    double l_color = 0, l_depth = 0, l_smooth = 0, l_total = 0;
    double lambda1 = 0, lambda2 = 0;
};

// Mean squared error over rays and channels.
Value color_loss(Tape& tape, Value pred, const TensorF& gt);

// Mean absolute channel difference between two colors; in [0, 1].
double color_error(const std::array<double, 3>& a,
                   const std::array<double, 3>& b);

// Adaptive anchor weight from the cross-view color deviation e1 and the
// point-vs-image error e2: w = clamp((1 - e1 - e2)^2, 0, 1).
double anchor_weight(double e1, double e2);

// Project every cloud point into all training views (no occlusion test),
// bilinearly sample the images, and derive per-(point, view) weights from the
// cross-view color standard deviation e1 and the point-vs-image error e2:
// w = clamp((1 - e1 - e2)^2, 0, 1). Points visible in fewer than two views
// are dropped. Errors on an empty cloud or fewer than two views.
std::vector<KeypointAnchor> build_anchors(const PointCloud& cloud,
                                          const std::vector<Camera>& cameras,
                                          const std::vector<Image>& images);

// (1/N) sum_i w_i (d_hat_i - d_i)^2 over the sampled anchors. pred_depths is
// [N,1] on the tape; errors when no anchors are given.
Value depth_loss(Tape& tape, Value pred_depths,
                 std::span<const KeypointAnchor> anchors);

// Edge-aware smoothness over a size x size patch stored row-major:
// mean |dx d*| e^{-|dx I|} + mean |dy d*| e^{-|dy I|}, forward differences.
// The image gating is treated as a constant (no gradient into the colors).
// `valid` (empty = all valid) flags rays with a defined disparity; pairs
// touching an invalid ray are dropped from the means. Errors when size < 2
// or the patch shapes do not match.
Value smoothness_loss(Tape& tape, Value disparity, const TensorF& rgb_patch,
                      std::size_t size,
                      std::span<const std::uint8_t> valid = {});

// L_total = L_color + lambda1 L_depth + lambda2 L_smooth with the stage's
// weights; the zero-weighted term must simply not be passed (invalid Value).
struct TotalLoss {
    Value value;
    LossReport report;
};

TotalLoss total_loss(Tape& tape, Value l_color, Value l_depth, Value l_smooth,
                     Stage stage);

// CSV export: view_id,u,v,depth,weight,point_index
void save_anchors_csv(const std::string& path,
                      std::span<const KeypointAnchor> anchors);

}  // namespace tridf
