// SPDX-License-Identifier: Apache-2.0
#include "tridf/mlp.hpp"

#include <cmath>

namespace tridf {

void MlpParams::init(std::size_t in_dim, std::size_t width, std::size_t out_dim,
                     std::size_t depth, Rng& rng) {
    weights.clear();
    biases.clear();
    std::size_t in = in_dim;
    for (std::size_t l = 0; l < depth; ++l) {
        const std::size_t out = (l + 1 == depth) ? out_dim : width;
        TensorF w({in, out});
        const double bound = std::sqrt(1.0 / static_cast<double>(in));
        for (double& v : w.data) v = rng.uniform(-bound, bound);
        weights.push_back(std::move(w));
        biases.emplace_back(std::vector<std::size_t>{out}, 0.0);
        in = out;
    }
}

MlpHandles register_mlp(Tape& tape, const MlpParams& mlp) {
    MlpHandles h;
    for (const TensorF& w : mlp.weights) h.weights.push_back(tape.param(w));
    for (const TensorF& b : mlp.biases) h.biases.push_back(tape.param(b));
    return h;
}

Value mlp_forward(Tape& tape, const MlpHandles& h, Value x) {
    for (std::size_t l = 0; l < h.weights.size(); ++l) {
        x = tape.add(tape.matmul(x, h.weights[l]), h.biases[l]);
        if (l + 1 < h.weights.size()) x = tape.relu(x);
    }
    return x;
}

}  // namespace tridf
