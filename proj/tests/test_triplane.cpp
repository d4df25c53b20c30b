// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tridf/triplane.hpp"

using namespace tridf;

namespace {

Triplane make_planes(std::size_t res, std::size_t ch, std::uint64_t seed) {
    Triplane p;
    Rng rng(seed);
    p.init(res, ch, rng);
    return p;
}

// Normalized coordinate of texel index i on an R-res plane (align-corners).
double texel_coord(std::size_t i, std::size_t res) {
    return -1.0 + 2.0 * static_cast<double>(i) /
                      static_cast<double>(res - 1);
}

}  // namespace

TEST_CASE("sample at texel centers returns stored features of all planes") {
    const std::size_t res = 5, ch = 3;
    const Triplane p = make_planes(res, ch, 1);
    Tape tape;
    const TriplaneHandles h = register_triplane(tape, p);

    // Texel (ix=2, iy=3) on XY; matching texels on YZ and ZX follow from the
    // same (x, y, z) choice.
    const std::size_t ix = 2, iy = 3, iz = 1;
    TensorF coords({1, 3},
                   std::vector<double>{texel_coord(ix, res),
                                       texel_coord(iy, res),
                                       texel_coord(iz, res)});
    const Value f =
        triplane_sample(tape, h, tape.constant(coords), res, ch);
    const TensorF& out = tape.value(f);
    REQUIRE(out.cols() == 3 * ch);
    for (std::size_t c = 0; c < ch; ++c) {
        CHECK(out.data[c] ==
              doctest::Approx(p.xy.at(iy * res + ix, c)).epsilon(1e-12));
        CHECK(out.data[ch + c] ==
              doctest::Approx(p.yz.at(iz * res + iy, c)).epsilon(1e-12));
        CHECK(out.data[2 * ch + c] ==
              doctest::Approx(p.zx.at(ix * res + iz, c)).epsilon(1e-12));
    }
}

TEST_CASE("cell-center sample equals the mean of the 4 corner features") {
    const std::size_t res = 4, ch = 2;
    const Triplane p = make_planes(res, ch, 2);
    Tape tape;
    const TriplaneHandles h = register_triplane(tape, p);
    const double x = 0.5 * (texel_coord(1, res) + texel_coord(2, res));
    const double y = 0.5 * (texel_coord(0, res) + texel_coord(1, res));
    TensorF coords({1, 3}, std::vector<double>{x, y, texel_coord(0, res)});
    const Value f = triplane_sample(tape, h, tape.constant(coords), res, ch);
    for (std::size_t c = 0; c < ch; ++c) {
        const double mean = 0.25 * (p.xy.at(0 * res + 1, c) +
                                    p.xy.at(0 * res + 2, c) +
                                    p.xy.at(1 * res + 1, c) +
                                    p.xy.at(1 * res + 2, c));
        CHECK(tape.value(f).data[c] == doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("out-of-domain coordinates error") {
    const Triplane p = make_planes(4, 2, 3);
    Tape tape;
    const TriplaneHandles h = register_triplane(tape, p);
    TensorF coords({1, 3}, std::vector<double>{1.5, 0.0, 0.0});
    CHECK_THROWS(triplane_sample(tape, h, tape.constant(coords), 4, 2));
}

TEST_CASE("sampling is exactly linear in plane values") {
    const std::size_t res = 6, ch = 4;
    const Triplane p = make_planes(res, ch, 4);
    Triplane scaled = p;
    const double alpha = 2.75;
    for (TensorF* t : {&scaled.xy, &scaled.yz, &scaled.zx})
        for (double& v : t->data) v *= alpha;

    TensorF coords({2, 3}, std::vector<double>{0.13, -0.52, 0.77,  //
                                               -0.98, 0.01, 0.33});
    auto sample = [&](const Triplane& planes) {
        Tape tape;
        const TriplaneHandles h = register_triplane(tape, planes);
        return tape
            .value(triplane_sample(tape, h, tape.constant(coords), res, ch))
            .data;
    };
    const auto base = sample(p);
    const auto big = sample(scaled);
    for (std::size_t i = 0; i < base.size(); ++i)
        CHECK(big[i] == doctest::Approx(alpha * base[i]).epsilon(1e-12));
}

TEST_CASE("partition of unity: constant planes sample to the constant") {
    const std::size_t res = 7, ch = 2;
    Triplane p;
    p.resolution = res;
    p.channels = ch;
    p.xy = TensorF({res * res, ch}, 3.25);
    p.yz = TensorF({res * res, ch}, -1.5);
    p.zx = TensorF({res * res, ch}, 0.125);
    Tape tape;
    const TriplaneHandles h = register_triplane(tape, p);
    TensorF coords({1, 3}, std::vector<double>{0.4321, -0.789, 0.05});
    const TensorF& out =
        tape.value(triplane_sample(tape, h, tape.constant(coords), res, ch));
    CHECK(out.data[0] == doctest::Approx(3.25).epsilon(1e-12));
    CHECK(out.data[ch] == doctest::Approx(-1.5).epsilon(1e-12));
    CHECK(out.data[2 * ch] == doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("plane gradients equal bilinear weights (finite differences)") {
    const std::size_t res = 4, ch = 2;
    const Triplane p = make_planes(res, ch, 9);
    TensorF coords({3, 3}, std::vector<double>{0.21, -0.43, 0.67,  //
                                               -0.11, 0.88, -0.29,  //
                                               0.5, 0.5, 0.5});
    const double err = grad_check(
        [&](Tape& t, const std::vector<Value>& params) {
            TriplaneHandles h{params[0], params[1], params[2]};
            const Value f =
                triplane_sample(t, h, t.constant(coords), res, ch);
            return t.sum(t.square(f));
        },
        {p.xy, p.yz, p.zx}, 1e-6);
    CHECK(err <= 1e-6);
}
