// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tridf/supervision.hpp"

using namespace tridf;

namespace {

// Two cameras looking down +z from z = -5, the second offset in x, with a
// shared 64x64 intrinsic block. Both see the origin near the image center.
std::vector<Camera> two_cameras() {
    Camera a;
    a.K = {80, 80, 32, 32, 64, 64};
    a.E.T = {0, 0, 5};  // world origin -> camera z = +5
    Camera b = a;
    b.E.T = {0.5, 0, 5};
    return {a, b};
}

Image constant_image(double r, double g, double bl) {
    Image img(64, 64, 3, 0.0);
    for (std::size_t i = 0; i < img.data.size(); i += 3) {
        img.data[i] = r;
        img.data[i + 1] = g;
        img.data[i + 2] = bl;
    }
    return img;
}

PointCloud one_point(const std::array<double, 3>& color) {
    PointCloud c;
    c.points = {{0, 0, 0}};
    c.colors = {color};
    return c;
}

double scalar(Tape& tape, Value v) { return tape.value(v).data[0]; }

}  // namespace

TEST_CASE("color_loss: zero at match, quadratic in the offset") {
    Tape tape;
    TensorF gt({4, 3}, 0.5);
    CHECK(scalar(tape, color_loss(tape, tape.constant(gt), gt)) == 0.0);

    TensorF off({4, 3}, 0.6);
    CHECK(scalar(tape, color_loss(tape, tape.constant(off), gt)) ==
          doctest::Approx(0.01).epsilon(1e-12));

    TensorF far({4, 3}, 1.5);
    CHECK(scalar(tape, color_loss(tape, tape.constant(far), gt)) ==
          doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("color_error basics") {
    CHECK(color_error({0.2, 0.4, 0.6}, {0.2, 0.4, 0.6}) == 0.0);
    CHECK(color_error({1, 1, 1}, {0, 0, 0}) == doctest::Approx(1.0));
    CHECK(color_error({1, 0, 0}, {0, 0, 0}) == doctest::Approx(1.0 / 3.0));
    CHECK(color_error({0, 1, 0}, {1, 0, 0}) == color_error({1, 0, 0}, {0, 1, 0}));
}

TEST_CASE("build_anchors: canonical weights 1, 0.25 and 0") {
    const auto cams = two_cameras();

    // Perfect agreement everywhere: e1 = e2 = 0, weight 1.
    {
        const std::vector<Image> imgs = {constant_image(0.3, 0.6, 0.9),
                                         constant_image(0.3, 0.6, 0.9)};
        const auto anchors =
            build_anchors(one_point({0.3, 0.6, 0.9}), cams, imgs);
        REQUIRE(anchors.size() == 2);
        for (const auto& a : anchors) {
            CHECK(a.weight == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(a.target_depth == doctest::Approx(5.0).epsilon(1e-12));
        }
        CHECK(anchors[0].view_id == 0);
        CHECK(anchors[1].view_id == 1);
    }

    // Views agree with each other but the point color is 0.5 off: e2 = 0.5,
    // weight (1 - 0.5)^2 = 0.25.
    {
        const std::vector<Image> imgs = {constant_image(0.5, 0.5, 0.5),
                                         constant_image(0.5, 0.5, 0.5)};
        const auto anchors = build_anchors(one_point({0, 0, 0}), cams, imgs);
        REQUIRE(anchors.size() == 2);
        for (const auto& a : anchors)
            CHECK(a.weight == doctest::Approx(0.25).epsilon(1e-12));
    }

    // Point color fully inconsistent: e2 = 1, weight 0.
    {
        const std::vector<Image> imgs = {constant_image(0, 0, 0),
                                         constant_image(0, 0, 0)};
        const auto anchors = build_anchors(one_point({1, 1, 1}), cams, imgs);
        REQUIRE(anchors.size() == 2);
        for (const auto& a : anchors) CHECK(a.weight == 0.0);
    }
}

TEST_CASE("build_anchors weight matches the closed form on a grid") {
    const auto cams = two_cameras();
    // Sweep e2 via the point gray level with agreeing views (e1 = 0) and
    // sweep e1 via disagreeing constant view colors; check
    // w = clamp((1 - e1 - e2)^2, 0, 1) to 1e-12 and monotone decrease.
    double prev = 2.0;
    for (int gi = 0; gi <= 15; ++gi) {
        const double g = 0.5 + 0.1 * static_cast<double>(gi);  // e2 = g - 0.5
        const std::vector<Image> imgs = {constant_image(0.5, 0.5, 0.5),
                                         constant_image(0.5, 0.5, 0.5)};
        const auto anchors = build_anchors(
            one_point({std::min(g, 1.5), std::min(g, 1.5), std::min(g, 1.5)}),
            cams, imgs);
        REQUIRE(anchors.size() == 2);
        const double e2 = std::min(g, 1.5) - 0.5;
        const double expect =
            std::clamp((1.0 - e2) * (1.0 - e2), 0.0, 1.0);
        CHECK(std::fabs(anchors[0].weight - expect) <= 1e-12);
        CHECK(anchors[0].weight <= prev + 1e-12);
        prev = anchors[0].weight;
    }

    for (int di = 0; di <= 15; ++di) {
        const double d = 0.1 * static_cast<double>(di);  // view color gap
        const double c1 = 0.5 - 0.5 * std::min(d, 1.0);
        const double c2 = 0.5 + 0.5 * std::min(d, 1.0);
        const std::vector<Image> imgs = {constant_image(c1, c1, c1),
                                         constant_image(c2, c2, c2)};
        const auto anchors =
            build_anchors(one_point({0.5, 0.5, 0.5}), cams, imgs);
        REQUIRE(anchors.size() == 2);
        // Two views at gap D: each is D/2 from the mean, so
        // e1 = sqrt(2 (D/2) / 1) = sqrt(D); e2 = D/2 for either view.
        const double gap = c2 - c1;
        const double e1 = std::sqrt(gap);
        const double e2 = 0.5 * gap;
        const double expect =
            std::clamp((1.0 - e1 - e2) * (1.0 - e1 - e2), 0.0, 1.0);
        CHECK(std::fabs(anchors[0].weight - expect) <= 1e-12);
        CHECK(std::fabs(anchors[1].weight - expect) <= 1e-12);
    }
}

TEST_CASE("build_anchors drops points seen by fewer than two views") {
    auto cams = two_cameras();
    const std::vector<Image> imgs = {constant_image(0.5, 0.5, 0.5),
                                     constant_image(0.5, 0.5, 0.5)};
    // A point behind both cameras produces no anchors at all.
    PointCloud behind;
    behind.points = {{0, 0, -10}};
    behind.colors = {{0.5, 0.5, 0.5}};
    CHECK(build_anchors(behind, cams, imgs).empty());

    PointCloud empty;
    CHECK_THROWS(build_anchors(empty, cams, imgs));
    CHECK_THROWS(build_anchors(one_point({0, 0, 0}), {cams[0]},
                               {constant_image(0, 0, 0)}));
}

TEST_CASE("depth_loss: weighted mean square, zero weights, empty error") {
    Tape tape;
    std::vector<KeypointAnchor> anchors(3);
    anchors[0] = {0, 1, 1, 2.0, 1.0, 0};
    anchors[1] = {0, 2, 2, 3.0, 0.5, 1};
    anchors[2] = {1, 3, 3, 4.0, 0.0, 2};
    TensorF pred({3, 1}, std::vector<double>{2.5, 2.0, 9.0});
    const double expect =
        (1.0 * 0.25 + 0.5 * 1.0 + 0.0 * 25.0) / 3.0;
    CHECK(scalar(tape, depth_loss(tape, tape.constant(pred), anchors)) ==
          doctest::Approx(expect).epsilon(1e-12));

    for (auto& a : anchors) a.weight = 0.0;
    CHECK(scalar(tape, depth_loss(tape, tape.constant(pred), anchors)) == 0.0);

    CHECK_THROWS(depth_loss(tape, tape.constant(pred), {}));
}

TEST_CASE("smoothness_loss: constant, ramp, gating, offset invariance") {
    const std::size_t size = 4, p = size * size;
    const TensorF flat_rgb({p, 3}, 0.5);

    Tape tape;
    CHECK(scalar(tape, smoothness_loss(
                           tape, tape.constant(TensorF({p, 1}, 0.7)),
                           flat_rgb, size)) == 0.0);

    // Disparity ramp in x on a flat image: |dx| = 1 everywhere, no y term.
    TensorF ramp({p, 1}, 0.0);
    for (std::size_t j = 0; j < size; ++j)
        for (std::size_t i = 0; i < size; ++i)
            ramp.data[j * size + i] = static_cast<double>(i);
    CHECK(scalar(tape, smoothness_loss(tape, tape.constant(ramp), flat_rgb,
                                       size)) ==
          doctest::Approx(1.0).epsilon(1e-12));

    // Adding a constant to the disparity changes nothing.
    TensorF shifted = ramp;
    for (double& v : shifted.data) v += 17.5;
    CHECK(scalar(tape, smoothness_loss(tape, tape.constant(shifted), flat_rgb,
                                       size)) ==
          doctest::Approx(1.0).epsilon(1e-12));

    // A strong image edge in every x pair gates the x term by e^{-10}.
    TensorF edgy({p, 3}, 0.0);
    for (std::size_t j = 0; j < size; ++j)
        for (std::size_t i = 0; i < size; ++i)
            for (int c = 0; c < 3; ++c)
                edgy.data[(j * size + i) * 3 + c] =
                    10.0 * static_cast<double>(i);
    CHECK(scalar(tape, smoothness_loss(tape, tape.constant(ramp), edgy,
                                       size)) ==
          doctest::Approx(std::exp(-10.0)).epsilon(1e-9));

    CHECK_THROWS(smoothness_loss(tape, tape.constant(TensorF({1, 1}, 0.0)),
                                 TensorF({1, 3}, 0.0), 1));
    CHECK_THROWS(smoothness_loss(tape, tape.constant(TensorF({p, 1}, 0.0)),
                                 TensorF({4, 3}, 0.0), size));
}

TEST_CASE("total_loss: stage arithmetic and lambda schedule") {
    Tape tape;
    const Value lc = tape.constant_scalar(1.0);
    const Value ld = tape.constant_scalar(2.0);
    const Value ls = tape.constant_scalar(0.5);

    const TotalLoss depth = total_loss(tape, lc, ld, {}, Stage::depth_guided);
    CHECK(depth.report.lambda1 == 0.001);
    CHECK(depth.report.lambda2 == 0.0);
    CHECK(depth.report.l_total == doctest::Approx(1.002).epsilon(1e-12));
    CHECK(scalar(tape, depth.value) ==
          doctest::Approx(1.002).epsilon(1e-12));

    const TotalLoss smooth = total_loss(tape, lc, {}, ls, Stage::smooth);
    CHECK(smooth.report.lambda1 == 0.0);
    CHECK(smooth.report.lambda2 == 1.0);
    CHECK(smooth.report.l_total == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(smooth.report.l_smooth == 0.5);

    // The skipped term is not merely down-weighted; it must be absent.
    CHECK_THROWS(total_loss(tape, lc, {}, ls, Stage::depth_guided));
    CHECK_THROWS(total_loss(tape, lc, ld, {}, Stage::smooth));
}

TEST_CASE("save_anchors_csv writes the documented header") {
    std::vector<KeypointAnchor> anchors(1);
    anchors[0] = {2, 4.5, 6.5, 1.25, 0.75, 9};
    const std::string path = "/tmp/tridf_anchors_test.csv";
    save_anchors_csv(path, anchors);
    std::ifstream in(path);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == "view_id,u,v,depth,weight,point_index");
    CHECK(row == "2,4.5,6.5,1.25,0.75,9");
    std::remove(path.c_str());
}
