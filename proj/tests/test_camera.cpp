// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tridf/camera.hpp"
#include "tridf/rng.hpp"

using namespace tridf;

namespace {

Mat3 rot_z(double deg) {
    const double r = deg * M_PI / 180.0;
    Mat3 m;
    m.m = {std::cos(r), -std::sin(r), 0, std::sin(r), std::cos(r), 0, 0, 0, 1};
    return m;
}

// Random rotation from a random unit quaternion.
Mat3 random_rotation(Rng& rng) {
    double q[4];
    double n = 0;
    for (double& v : q) {
        v = rng.normal();
        n += v * v;
    }
    n = std::sqrt(n);
    for (double& v : q) v /= n;
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 m;
    m.m = {1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
           2 * (x * y + w * z),     1 - 2 * (x * x + z * z),
           2 * (y * z - w * x),     2 * (x * z - w * y), 2 * (y * z + w * x),
           1 - 2 * (x * x + y * y)};
    return m;
}

Camera make_camera(Rng& rng) {
    Camera cam;
    cam.K = {120.0 + rng.uniform(0, 40), 120.0 + rng.uniform(0, 40),
             31.0 + rng.uniform(0, 2), 31.0 + rng.uniform(0, 2), 64, 64};
    cam.E.R = random_rotation(rng);
    cam.E.T = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    return cam;
}

}  // namespace

TEST_CASE("world_to_camera basics") {
    Extrinsics e;
    CHECK(world_to_camera(e, {1, 2, 3}).x == 1);
    CHECK(world_to_camera(e, {1, 2, 3}).y == 2);
    CHECK(world_to_camera(e, {1, 2, 3}).z == 3);

    e.T = {0, 0, -5};
    const Vec3 p = world_to_camera(e, {0, 0, 5});
    CHECK(p.norm() == doctest::Approx(0.0).epsilon(1e-15));

    Extrinsics rz;
    rz.R = rot_z(90.0);
    const Vec3 q = world_to_camera(rz, {1, 0, 0});
    CHECK(q.x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(q.y == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(q.z == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("extrinsics validation rejects non-rotations") {
    Extrinsics e;
    e.R.m[0] = 2.0;  // not orthonormal
    CHECK_THROWS(e.validate());
    Extrinsics refl;
    refl.R.m = {1, 0, 0, 0, 1, 0, 0, 0, -1};  // det -1
    CHECK_THROWS(refl.validate());
}

TEST_CASE("project arithmetic and Behind") {
    Intrinsics k1{1, 1, 0, 0, 10, 10};
    const auto a = project(k1, {0, 0, 1});
    REQUIRE(a.has_value());
    CHECK(a->u == doctest::Approx(0.0));
    CHECK(a->v == doctest::Approx(0.0));
    CHECK(a->depth == doctest::Approx(1.0));

    Intrinsics k2{100, 100, 256, 256, 512, 512};
    const auto b = project(k2, {1, 1, 2});
    REQUIRE(b.has_value());
    CHECK(b->u == doctest::Approx(306.0).epsilon(1e-12));
    CHECK(b->v == doctest::Approx(306.0).epsilon(1e-12));
    CHECK(b->depth == doctest::Approx(2.0));

    CHECK_FALSE(project(k2, {0, 0, -1}).has_value());
}

TEST_CASE("generate_ray: principal axis, range check, adjacent pixels") {
    Camera cam;
    cam.K = {100, 100, 31.5, 31.5, 64, 64};
    const Ray r = generate_ray(cam, 31, 31, 0.1, 10.0);  // center 31.5 = cx
    CHECK(std::fabs(r.direction.x) < 1e-12);
    CHECK(std::fabs(r.direction.y) < 1e-12);
    CHECK(r.direction.z == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.direction.norm() == doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS(generate_ray(cam, 64, 0, 0.1, 10.0));

    const Ray r2 = generate_ray(cam, 32, 31, 0.1, 10.0);
    CHECK(r.direction.dot(r2.direction) < 1.0);  // strictly distinct
}

TEST_CASE("ray/project round-trip error <= 1e-9 px over 1000 random cases") {
    Rng rng(99);
    for (int i = 0; i < 1000; ++i) {
        const Camera cam = make_camera(rng);
        const std::size_t u = rng.index(cam.K.width);
        const std::size_t v = rng.index(cam.K.height);
        const Ray ray = generate_ray(cam, u, v, 0.1, 50.0);
        const double t = rng.uniform(0.2, 40.0);
        const Vec3 p = ray.origin + ray.direction * t;
        const auto px = project(cam.K, world_to_camera(cam.E, p));
        REQUIRE(px.has_value());
        CHECK(std::fabs(px->u - (static_cast<double>(u) + 0.5)) <= 1e-9);
        CHECK(std::fabs(px->v - (static_cast<double>(v) + 0.5)) <= 1e-9);
    }
}

TEST_CASE("world_to_camera inverse round-trip within 1e-12") {
    Rng rng(123);
    for (int i = 0; i < 100; ++i) {
        Extrinsics e;
        e.R = random_rotation(rng);
        e.T = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        const Vec3 p{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
        const Vec3 q = world_to_camera(e, p);
        const Vec3 back = e.R.transposed() * (q - e.T);
        CHECK((back - p).norm() <= 1e-12);
    }
}

TEST_CASE("project_to_reference: round-trip, Behind, off-image") {
    Rng rng(7);
    const Camera cam = make_camera(rng);
    const Ray ray = generate_ray(cam, 10, 20, 0.1, 50.0);
    const Vec3 p = ray.origin + ray.direction * 3.0;
    const auto px = project_to_reference(cam, p);
    REQUIRE(px.has_value());
    CHECK(std::fabs(px->u - 10.5) <= 1e-9);
    CHECK(std::fabs(px->v - 20.5) <= 1e-9);

    const Vec3 behind = ray.origin - ray.direction * 3.0;
    CHECK_FALSE(project_to_reference(cam, behind).has_value());

    // A point projecting far off the image rectangle.
    Camera axis;
    axis.K = {100, 100, 32, 32, 64, 64};
    CHECK_FALSE(project_to_reference(axis, {100.0, 0.0, 1.0}).has_value());
}
