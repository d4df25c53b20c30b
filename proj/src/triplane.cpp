// SPDX-License-Identifier: Apache-2.0
#include "tridf/triplane.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tridf {

void Triplane::init(std::size_t res, std::size_t ch, Rng& rng, double scale) {
    resolution = res;
    channels = ch;
    for (TensorF* p : {&xy, &yz, &zx}) {
        *p = TensorF({res * res, ch});
        for (double& v : p->data) v = scale * rng.normal();
    }
}

TriplaneHandles register_triplane(Tape& tape, const Triplane& planes) {
    return {tape.param(planes.xy), tape.param(planes.yz), tape.param(planes.zx)};
}

namespace {

// One plane: bilinear lerp of the 4 nearest texels, built from tape
// primitives so gradients reach both the plane and the coordinates.
Value sample_plane(Tape& tape, Value plane, Value coords, std::size_t res,
                   std::size_t col_a, std::size_t col_b) {
    const TensorF& c = tape.value(coords);
    const std::size_t k = c.rows();
    const double half = static_cast<double>(res - 1) / 2.0;

    std::vector<std::size_t> idx00(k), idx01(k), idx10(k), idx11(k);
    std::vector<double> floor_a(k), floor_b(k);
    for (std::size_t i = 0; i < k; ++i) {
        const double a = c.at(i, col_a), b = c.at(i, col_b);
        if (a < -1.0 - 1e-12 || a > 1.0 + 1e-12 || b < -1.0 - 1e-12 ||
            b > 1.0 + 1e-12)
            throw std::invalid_argument(
                "triplane_sample: coordinate outside [-1,1]");
        const double fa = std::clamp((a + 1.0) * half, 0.0,
                                     static_cast<double>(res - 1));
        const double fb = std::clamp((b + 1.0) * half, 0.0,
                                     static_cast<double>(res - 1));
        std::size_t ia = std::min(static_cast<std::size_t>(fa), res - 2);
        std::size_t ib = std::min(static_cast<std::size_t>(fb), res - 2);
        floor_a[i] = static_cast<double>(ia);
        floor_b[i] = static_cast<double>(ib);
        idx00[i] = ib * res + ia;
        idx01[i] = ib * res + ia + 1;
        idx10[i] = (ib + 1) * res + ia;
        idx11[i] = (ib + 1) * res + ia + 1;
    }

    const Value ca = tape.slice_cols(coords, col_a, col_a + 1);
    const Value cb = tape.slice_cols(coords, col_b, col_b + 1);
    // fractional offsets inside the cell, as tape values of the coords
    const Value fa = tape.sub(tape.affine(ca, half, half),
                              tape.constant(TensorF({k, 1}, floor_a)));
    const Value fb = tape.sub(tape.affine(cb, half, half),
                              tape.constant(TensorF({k, 1}, floor_b)));
    const Value ga = tape.affine(fa, -1.0, 1.0);
    const Value gb = tape.affine(fb, -1.0, 1.0);

    const Value c00 = tape.gather_rows(plane, std::move(idx00));
    const Value c01 = tape.gather_rows(plane, std::move(idx01));
    const Value c10 = tape.gather_rows(plane, std::move(idx10));
    const Value c11 = tape.gather_rows(plane, std::move(idx11));

    const Value row0 =
        tape.add(tape.mul(ga, c00), tape.mul(fa, c01));
    const Value row1 =
        tape.add(tape.mul(ga, c10), tape.mul(fa, c11));
    return tape.add(tape.mul(gb, row0), tape.mul(fb, row1));
}

}  // namespace

Value triplane_sample(Tape& tape, const TriplaneHandles& planes, Value coords,
                      std::size_t resolution, std::size_t channels) {
    const TensorF& c = tape.value(coords);
    if (c.shape.size() != 2 || c.shape[1] != 3)
        throw std::invalid_argument("triplane_sample: coords must be [K,3]");
    (void)channels;
    const Value fxy = sample_plane(tape, planes.xy, coords, resolution, 0, 1);
    const Value fyz = sample_plane(tape, planes.yz, coords, resolution, 1, 2);
    const Value fzx = sample_plane(tape, planes.zx, coords, resolution, 2, 0);
    return tape.concat_cols(tape.concat_cols(fxy, fyz), fzx);
}

}  // namespace tridf
