// SPDX-License-Identifier: Apache-2.0
#include "tridf/encoding.hpp"

#include <cmath>
#include <stdexcept>

namespace tridf {

std::vector<double> positional_encode(const Vec3& x, std::size_t freqs) {
    std::vector<double> out;
    out.reserve(3 + 6 * freqs);
    out.push_back(x.x);
    out.push_back(x.y);
    out.push_back(x.z);
    constexpr double pi = 3.14159265358979323846;
    double f = pi;
    for (std::size_t l = 0; l < freqs; ++l, f *= 2.0) {
        for (int i = 0; i < 3; ++i) {
            out.push_back(std::sin(f * x[i]));
            out.push_back(std::cos(f * x[i]));
        }
    }
    return out;
}

std::array<double, 16> sh_encode(const Vec3& d) {
    if (std::fabs(d.norm() - 1.0) > 1e-9)
        throw std::invalid_argument("sh_encode: direction must be unit length");
    const double x = d.x, y = d.y, z = d.z;
    const double xx = x * x, yy = y * y, zz = z * z;
    return {
        0.28209479177387814,
        0.4886025119029199 * y,
        0.4886025119029199 * z,
        0.4886025119029199 * x,
        1.0925484305920792 * x * y,
        1.0925484305920792 * y * z,
        0.31539156525252005 * (3.0 * zz - 1.0),
        1.0925484305920792 * x * z,
        0.5462742152960396 * (xx - yy),
        0.5900435899266435 * y * (3.0 * xx - yy),
        2.890611442640554 * x * y * z,
        0.4570457994644658 * y * (5.0 * zz - 1.0),
        0.3731763325901154 * z * (5.0 * zz - 3.0),
        0.4570457994644658 * x * (5.0 * zz - 1.0),
        1.445305721320277 * z * (xx - yy),
        0.5900435899266435 * x * (xx - 3.0 * yy),
    };
}

}  // namespace tridf
