// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tridf/rng.hpp"
#include "tridf/tape.hpp"

namespace tridf {

// Three orthogonal learnable feature planes. Each plane is stored as a
// [R*R, C] matrix; row index = second_coord_cell * R + first_coord_cell.
struct Triplane {
    std::size_t resolution = 0, channels = 0;
    TensorF xy, yz, zx;

    void init(std::size_t res, std::size_t ch, Rng& rng, double scale = 0.1);
};

struct TriplaneHandles {
    Value xy, yz, zx;
};

TriplaneHandles register_triplane(Tape& tape, const Triplane& planes);

// Bilinear sample of all three planes at normalized coordinates
// (align-corners; [-1,1] spans texel centers 0..R-1), concatenated in order
// (XY, YZ, ZX). coords is [K,3] on the tape; the result is differentiable
// w.r.t. both the plane values and the coordinates. Coordinates outside
// [-1,1] raise an error.
Value triplane_sample(Tape& tape, const TriplaneHandles& planes, Value coords,
                      std::size_t resolution, std::size_t channels);

}  // namespace tridf
