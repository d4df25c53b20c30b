// SPDX-License-Identifier: Apache-2.0
#include "tridf/supervision.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace tridf {

Value color_loss(Tape& tape, Value pred, const TensorF& gt) {
    return tape.mean(tape.square(tape.sub(pred, tape.constant(gt))));
}

double color_error(const std::array<double, 3>& a,
                   const std::array<double, 3>& b) {
    return (std::fabs(a[0] - b[0]) + std::fabs(a[1] - b[1]) +
            std::fabs(a[2] - b[2])) /
           3.0;
}

double anchor_weight(double e1, double e2) {
    const double a = (1.0 - e1 - e2) * (1.0 - e1 - e2);
    return std::clamp(a, 0.0, 1.0);
}

std::vector<KeypointAnchor> build_anchors(const PointCloud& cloud,
                                          const std::vector<Camera>& cameras,
                                          const std::vector<Image>& images) {
    if (cloud.points.empty())
        throw std::invalid_argument("build_anchors: empty point cloud");
    if (cameras.size() < 2 || cameras.size() != images.size())
        throw std::invalid_argument("build_anchors: need >= 2 views");

    std::vector<KeypointAnchor> anchors;
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        struct Hit {
            std::size_t view;
            Pixel px;
            std::array<double, 3> color;
        };
        std::vector<Hit> hits;
        for (std::size_t k = 0; k < cameras.size(); ++k) {
            const auto px = project_to_reference(cameras[k], cloud.points[i]);
            if (!px) continue;
            std::array<double, 3> c{};
            images[k].sample_bilinear(px->u, px->v, c.data());
            hits.push_back({k, *px, c});
        }
        if (hits.size() < 2) continue;

        std::array<double, 3> mean{};
        for (const Hit& h : hits)
            for (int c = 0; c < 3; ++c) mean[c] += h.color[c];
        for (int c = 0; c < 3; ++c)
            mean[c] /= static_cast<double>(hits.size());

        double var = 0;
        for (const Hit& h : hits) var += color_error(h.color, mean);
        const double e1 =
            std::sqrt(var / static_cast<double>(hits.size() - 1));

        for (const Hit& h : hits) {
            const double e2 = color_error(h.color, cloud.colors[i]);
            anchors.push_back({h.view, h.px.u, h.px.v, h.px.depth,
                               anchor_weight(e1, e2), i});
        }
    }
    return anchors;
}

Value depth_loss(Tape& tape, Value pred_depths,
                 std::span<const KeypointAnchor> anchors) {
    if (anchors.empty())
        throw std::invalid_argument("depth_loss: no anchors");
    const std::size_t n = anchors.size();
    TensorF target({n, 1}), weight({n, 1});
    for (std::size_t i = 0; i < n; ++i) {
        target.data[i] = anchors[i].target_depth;
        weight.data[i] = anchors[i].weight;
    }
    const Value err =
        tape.square(tape.sub(pred_depths, tape.constant(std::move(target))));
    return tape.mean(tape.mul(tape.constant(std::move(weight)), err));
}

Value smoothness_loss(Tape& tape, Value disparity, const TensorF& rgb_patch,
                      std::size_t size, std::span<const std::uint8_t> valid) {
    if (size < 2)
        throw std::invalid_argument("smoothness_loss: patch smaller than 2x2");
    const std::size_t p = size * size;
    if (tape.value(disparity).rows() != p || rgb_patch.rows() != p ||
        rgb_patch.cols() != 3)
        throw std::invalid_argument("smoothness_loss: patch shape mismatch");
    if (!valid.empty() && valid.size() != p)
        throw std::invalid_argument("smoothness_loss: mask size mismatch");

    // Forward differences over the row-major size x size grid. The image
    // gate e^{-|dI|} uses the mean absolute channel gradient as a constant.
    const auto axis_term = [&](bool horizontal) -> Value {
        std::vector<std::size_t> lo, hi;
        for (std::size_t j = 0; j < size; ++j)
            for (std::size_t i = 0; i < size; ++i) {
                if (horizontal ? i + 1 >= size : j + 1 >= size) continue;
                const std::size_t a = j * size + i;
                const std::size_t b = horizontal ? a + 1 : a + size;
                if (!valid.empty() && (!valid[a] || !valid[b])) continue;
                lo.push_back(a);
                hi.push_back(b);
            }
        if (lo.empty()) return tape.constant_scalar(0.0);
        TensorF gate({lo.size(), 1});
        for (std::size_t k = 0; k < lo.size(); ++k) {
            double g = 0;
            for (std::size_t c = 0; c < 3; ++c)
                g += std::fabs(rgb_patch.data[hi[k] * 3 + c] -
                               rgb_patch.data[lo[k] * 3 + c]);
            gate.data[k] = std::exp(-g / 3.0);
        }
        const Value dd = tape.abs_(tape.sub(tape.gather_rows(disparity, hi),
                                            tape.gather_rows(disparity, lo)));
        return tape.mean(tape.mul(dd, tape.constant(std::move(gate))));
    };
    return tape.add(axis_term(true), axis_term(false));
}

TotalLoss total_loss(Tape& tape, Value l_color, Value l_depth, Value l_smooth,
                     Stage stage) {
    TotalLoss out;
    out.report.lambda1 = stage == Stage::depth_guided ? kLambdaDepth : 0.0;
    out.report.lambda2 = stage == Stage::smooth ? kLambdaSmooth : 0.0;
    out.report.l_color = tape.value(l_color).data[0];
    out.value = l_color;
    if (stage == Stage::depth_guided) {
        if (!l_depth.valid())
            throw std::invalid_argument("total_loss: depth stage needs L_depth");
        out.report.l_depth = tape.value(l_depth).data[0];
        out.value = tape.add(out.value,
                             tape.affine(l_depth, out.report.lambda1, 0.0));
    } else {
        if (!l_smooth.valid())
            throw std::invalid_argument(
                "total_loss: smooth stage needs L_smooth");
        out.report.l_smooth = tape.value(l_smooth).data[0];
        out.value = tape.add(out.value,
                             tape.affine(l_smooth, out.report.lambda2, 0.0));
    }
    out.report.l_total = tape.value(out.value).data[0];
    return out;
}

void save_anchors_csv(const std::string& path,
                      std::span<const KeypointAnchor> anchors) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_anchors_csv: cannot write " + path);
    out << "view_id,u,v,depth,weight,point_index\n";
    out.precision(17);
    for (const KeypointAnchor& a : anchors)
        out << a.view_id << ',' << a.u << ',' << a.v << ',' << a.target_depth
            << ',' << a.weight << ',' << a.point_index << '\n';
}

}  // namespace tridf
