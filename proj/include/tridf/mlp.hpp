// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "tridf/rng.hpp"
#include "tridf/tape.hpp"

namespace tridf {

// Plain fully connected network: relu hidden layers, linear output.
struct MlpParams {
    std::vector<TensorF> weights;  // [in, out] each
    std::vector<TensorF> biases;   // [out] each

    // depth = number of linear layers.
    void init(std::size_t in_dim, std::size_t width, std::size_t out_dim,
              std::size_t depth, Rng& rng);
    std::size_t out_dim() const { return biases.back().numel(); }
};

struct MlpHandles {
    std::vector<Value> weights, biases;
};

MlpHandles register_mlp(Tape& tape, const MlpParams& mlp);

// x: [K, in] on the tape.
Value mlp_forward(Tape& tape, const MlpHandles& h, Value x);

}  // namespace tridf
