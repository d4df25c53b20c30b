// SPDX-License-Identifier: Apache-2.0
#include "tridf/camera.hpp"

namespace tridf {

void Extrinsics::validate(double tol) const {
    const Mat3 rt = R.transposed();
    // R^T R == I
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            double v = 0;
            for (int k = 0; k < 3; ++k) v += rt.m[r * 3 + k] * R.m[k * 3 + c];
            const double expect = (r == c) ? 1.0 : 0.0;
            if (std::fabs(v - expect) > tol)
                throw std::invalid_argument("Extrinsics: R is not orthonormal");
        }
    }
    if (std::fabs(R.det() - 1.0) > tol)
        throw std::invalid_argument("Extrinsics: det(R) != 1");
}

Vec3 world_to_camera(const Extrinsics& E, const Vec3& p) {
    return E.R * p + E.T;
}

std::optional<Pixel> project(const Intrinsics& K, const Vec3& p_cam) {
    if (p_cam.z <= 1e-9) return std::nullopt;
    return Pixel{K.fx * p_cam.x / p_cam.z + K.cx,
                 K.fy * p_cam.y / p_cam.z + K.cy, p_cam.z};
}

Ray ray_through(const Camera& cam, double u, double v, double t_near,
                double t_far) {
    if (!(t_near > 0 && t_near < t_far))
        throw std::invalid_argument("ray_through: invalid t bounds");
    const Vec3 dir_cam{(u - cam.K.cx) / cam.K.fx, (v - cam.K.cy) / cam.K.fy,
                       1.0};
    const Vec3 dir_world = (cam.E.R.transposed() * dir_cam).normalized();
    return Ray{cam.center(), dir_world, t_near, t_far};
}

Ray generate_ray(const Camera& cam, std::size_t u, std::size_t v,
                 double t_near, double t_far) {
    if (u >= cam.K.width || v >= cam.K.height)
        throw std::invalid_argument("generate_ray: pixel out of range");
    return ray_through(cam, static_cast<double>(u) + 0.5,
                       static_cast<double>(v) + 0.5, t_near, t_far);
}

std::optional<Pixel> project_to_reference(const Camera& cam, const Vec3& x) {
    const auto px = project(cam.K, world_to_camera(cam.E, x));
    if (!px) return std::nullopt;
    if (px->u < 0 || px->u >= static_cast<double>(cam.K.width) || px->v < 0 ||
        px->v >= static_cast<double>(cam.K.height))
        return std::nullopt;
    return px;
}

}  // namespace tridf
