// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>

namespace tridf {

struct Vec3 {
    double x = 0, y = 0, z = 0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const {
        const double n = norm();
        return {x / n, y / n, z / n};
    }
    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

struct Mat3 {
    // row-major
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    Vec3 operator*(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }
    Mat3 transposed() const {
        Mat3 t;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) t.m[c * 3 + r] = m[r * 3 + c];
        return t;
    }
    double det() const {
        return m[0] * (m[4] * m[8] - m[5] * m[7]) -
               m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
    }
};

struct Intrinsics {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    std::size_t width = 0, height = 0;

    void validate() const {
        if (!(fx > 0 && fy > 0))
            throw std::invalid_argument("Intrinsics: focal lengths must be > 0");
        if (!(cx >= 0 && cx < static_cast<double>(width) && cy >= 0 &&
              cy < static_cast<double>(height)))
            throw std::invalid_argument(
                "Intrinsics: principal point outside image");
    }
};

struct Extrinsics {
    Mat3 R;   // world -> camera
    Vec3 T;

    void validate(double tol = 1e-9) const;
};

struct Camera {
    Intrinsics K;
    Extrinsics E;

    Vec3 center() const {  // camera origin in world space
        const Vec3 t = E.R.transposed() * E.T;
        return {-t.x, -t.y, -t.z};
    }
};

struct Ray {
    Vec3 origin;
    Vec3 direction;  // unit length
    double t_near = 0, t_far = 0;
};

struct Pixel {
    double u = 0, v = 0, depth = 0;
};

// R*p + T
Vec3 world_to_camera(const Extrinsics& E, const Vec3& p);

// Perspective projection; nullopt when the point is behind the camera
// (Z <= 1e-9).
std::optional<Pixel> project(const Intrinsics& K, const Vec3& p_cam);

// Ray through the continuous pixel coordinate (u, v); integer pixel (i, j)
// maps to (i+0.5, j+0.5).
Ray ray_through(const Camera& cam, double u, double v, double t_near,
                double t_far);

// Ray through the center of integer pixel (u, v); errors if out of range.
Ray generate_ray(const Camera& cam, std::size_t u, std::size_t v,
                 double t_near, double t_far);

// world_to_camera then project; nullopt if behind the camera or outside the
// image rectangle.
std::optional<Pixel> project_to_reference(const Camera& cam, const Vec3& x);

}  // namespace tridf
