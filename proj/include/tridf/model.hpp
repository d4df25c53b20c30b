// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>

#include "tridf/features.hpp"
#include "tridf/mlp.hpp"
#include "tridf/scene.hpp"
#include "tridf/triplane.hpp"

namespace tridf {

struct ModelConfig {
    std::size_t plane_res = 64;
    std::size_t plane_channels = 8;
    std::size_t density_depth = 4, density_width = 128;
    std::size_t base_depth = 2, base_width = 128;
    std::size_t color_depth = 4, color_width = 128;
    std::size_t pe_freqs = 6;
    std::size_t fm_dim = 15;
    double sigma_bias_init = -1.0;
    std::uint64_t feature_seed = 1234;
    std::uint64_t init_seed = 42;

    std::size_t pe_dim() const { return 3 + 6 * pe_freqs; }
};

// The hybrid representation: explicit triplane color features plus an
// implicit density network conditioned on frozen reference-view features.
struct FieldModel {
    ModelConfig cfg;
    Aabb bbox;
    std::array<double, 3> background{0.7, 0.7, 0.7};
    Triplane planes;
    MlpParams density, base, color;
    std::vector<Camera> train_cameras;
    std::vector<Image> ref_features;  // frozen, one per train view

    void init(const ModelConfig& config, const SceneDataset& scene);

    std::size_t ref_dim() const {
        return train_cameras.size() * kRefFeatureDim;
    }

    void save(const std::string& path) const;
    static FieldModel load(const std::string& path);

    // Non-differentiable density query (used by the occupancy grid).
    std::vector<double> eval_sigma(std::span<const Vec3> points) const;
};

struct ModelHandles {
    TriplaneHandles planes;
    MlpHandles density, base, color;
};

ModelHandles register_model(Tape& tape, const FieldModel& model);

// Constant density-network input for a batch of world points:
// concat(positional_encode(x_norm), f_ref) per row.
TensorF assemble_density_input(const FieldModel& model,
                               std::span<const Vec3> points);

struct DensityOut {
    Value sigma;  // [K,1], softplus-activated
    Value fm;     // [K,fm_dim]
};

DensityOut density_field(Tape& tape, const FieldModel& model,
                         const ModelHandles& h, Value density_input);

// c = sigmoid(color_mlp(concat(base_mlp(concat(f_tri, f_m)), SH(d))))
Value color_head(Tape& tape, const ModelHandles& h, Value f_tri, Value f_m,
                 Value sh);

}  // namespace tridf
