// SPDX-License-Identifier: Apache-2.0
#include "tridf/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tridf/encoding.hpp"
#include "tridf/threading.hpp"

namespace tridf {

RaySamples stratified_sample(const Ray& ray, std::size_t n, bool jitter,
                             Rng& rng) {
    if (n < 2) throw std::invalid_argument("stratified_sample: need N >= 2");
    const double span = ray.t_far - ray.t_near;
    if (span < 1e-9)
        throw std::invalid_argument("stratified_sample: degenerate ray bounds");
    const double w = span / static_cast<double>(n);
    RaySamples s;
    s.t.resize(n);
    s.x.resize(n);
    s.deltas.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double lo = ray.t_near + static_cast<double>(i) * w;
        s.t[i] = jitter ? lo + rng.uniform() * w : lo + 0.5 * w;
        s.x[i] = ray.origin + ray.direction * s.t[i];
    }
    for (std::size_t i = 0; i + 1 < n; ++i) s.deltas[i] = s.t[i + 1] - s.t[i];
    s.deltas[n - 1] = ray.t_far - s.t[n - 1];
    return s;
}

bool clip_ray_to_bbox(const Aabb& bbox, Ray& ray) {
    double t0 = 0, t1 = 0;
    if (!bbox.intersect(ray.origin, ray.direction, t0, t1)) return false;
    ray.t_near = std::max(ray.t_near, t0);
    ray.t_far = std::min(ray.t_far, t1);
    return ray.t_far - ray.t_near >= 1e-9;
}

bool OccupancyGrid::empty_at(const Vec3& p) const {
    if (res == 0) return false;
    const Vec3 e = bbox.extent();
    const auto cell = [&](double v, double lo, double ext) {
        const double f = (v - lo) / ext * static_cast<double>(res);
        const long c = static_cast<long>(std::floor(f));
        return static_cast<std::size_t>(
            std::clamp<long>(c, 0, static_cast<long>(res) - 1));
    };
    const std::size_t ix = cell(p.x, bbox.min.x, e.x);
    const std::size_t iy = cell(p.y, bbox.min.y, e.y);
    const std::size_t iz = cell(p.z, bbox.min.z, e.z);
    return occupied[(iz * res + iy) * res + ix] == 0;
}

OccupancyGrid occupancy_grid_update(const FieldModel& model,
                                    std::size_t grid_res, double threshold) {
    OccupancyGrid grid;
    grid.res = grid_res;
    grid.bbox = model.bbox;
    grid.threshold = threshold;

    const Vec3 e = model.bbox.extent();
    std::vector<Vec3> centers;
    centers.reserve(grid_res * grid_res * grid_res);
    for (std::size_t iz = 0; iz < grid_res; ++iz)
        for (std::size_t iy = 0; iy < grid_res; ++iy)
            for (std::size_t ix = 0; ix < grid_res; ++ix)
                centers.push_back(
                    {model.bbox.min.x + (static_cast<double>(ix) + 0.5) * e.x /
                                            static_cast<double>(grid_res),
                     model.bbox.min.y + (static_cast<double>(iy) + 0.5) * e.y /
                                            static_cast<double>(grid_res),
                     model.bbox.min.z + (static_cast<double>(iz) + 0.5) * e.z /
                                            static_cast<double>(grid_res)});
    const std::vector<double> sigma = model.eval_sigma(centers);

    // A cell is kept only when the whole 3x3x3 neighbourhood is below the
    // threshold; the dilation protects samples near occupancy boundaries.
    std::vector<std::uint8_t> raw(centers.size());
    for (std::size_t i = 0; i < centers.size(); ++i)
        raw[i] = sigma[i] >= threshold ? 1 : 0;
    grid.occupied.assign(centers.size(), 0);
    const long r = static_cast<long>(grid_res);
    for (long iz = 0; iz < r; ++iz)
        for (long iy = 0; iy < r; ++iy)
            for (long ix = 0; ix < r; ++ix) {
                std::uint8_t occ = 0;
                for (long dz = -1; dz <= 1 && !occ; ++dz)
                    for (long dy = -1; dy <= 1 && !occ; ++dy)
                        for (long dx = -1; dx <= 1 && !occ; ++dx) {
                            const long x = std::clamp(ix + dx, 0L, r - 1);
                            const long y = std::clamp(iy + dy, 0L, r - 1);
                            const long z = std::clamp(iz + dz, 0L, r - 1);
                            occ = raw[static_cast<std::size_t>(
                                (z * r + y) * r + x)];
                        }
                grid.occupied[static_cast<std::size_t>((iz * r + iy) * r +
                                                       ix)] = occ;
            }
    return grid;
}

RenderBatch render_rays(Tape& tape, const FieldModel& model,
                        const ModelHandles& handles, std::span<const Ray> rays,
                        std::size_t n_samples, bool jitter, Rng* rng,
                        const OccupancyGrid* grid) {
    if (jitter && rng == nullptr)
        throw std::invalid_argument("render_rays: jitter requires an rng");
    const std::size_t n_rays = rays.size();
    const std::size_t total = n_rays * n_samples;

    TensorF deltas({total}, 0.0), ts({total}, 0.0);
    std::vector<Vec3> active_points;
    std::vector<std::size_t> active_idx;
    std::vector<std::array<double, 16>> active_sh;

    Rng dummy(0);
    for (std::size_t r = 0; r < n_rays; ++r) {
        const Ray& ray = rays[r];
        if (ray.t_far - ray.t_near < 1e-9) {
            // Ray misses the volume entirely: background only.
            for (std::size_t i = 0; i < n_samples; ++i)
                ts.data[r * n_samples + i] = ray.t_near;
            continue;
        }
        const RaySamples s =
            stratified_sample(ray, n_samples, jitter, jitter ? *rng : dummy);
        const std::array<double, 16> sh = sh_encode(ray.direction);
        for (std::size_t i = 0; i < n_samples; ++i) {
            const std::size_t g = r * n_samples + i;
            ts.data[g] = s.t[i];
            deltas.data[g] = s.deltas[i];
            if (!model.bbox.contains(s.x[i])) continue;
            if (grid != nullptr && grid->empty_at(s.x[i])) continue;
            active_points.push_back(s.x[i]);
            active_idx.push_back(g);
            active_sh.push_back(sh);
        }
    }

    const std::size_t a = active_points.size();
    Value sigma_full, rgb_full;
    if (a == 0) {
        sigma_full = tape.constant(TensorF({total, 1}, 0.0));
        rgb_full = tape.constant(TensorF({total, 3}, 0.0));
    } else {
        const Value din =
            tape.constant(assemble_density_input(model, active_points));
        const DensityOut d = density_field(tape, model, handles, din);

        TensorF coords({a, 3}, 0.0);
        TensorF sh_in({a, 16}, 0.0);
        for (std::size_t i = 0; i < a; ++i) {
            const Vec3 xn = model.bbox.normalize(active_points[i]);
            coords.data[i * 3 + 0] = std::clamp(xn.x, -1.0, 1.0);
            coords.data[i * 3 + 1] = std::clamp(xn.y, -1.0, 1.0);
            coords.data[i * 3 + 2] = std::clamp(xn.z, -1.0, 1.0);
            std::copy(active_sh[i].begin(), active_sh[i].end(),
                      &sh_in.data[i * 16]);
        }
        const Value f_tri =
            triplane_sample(tape, handles.planes, tape.constant(coords),
                            model.planes.resolution, model.planes.channels);
        const Value rgb = color_head(tape, handles, f_tri, d.fm,
                                     tape.constant(std::move(sh_in)));
        sigma_full = tape.scatter_rows(d.sigma, active_idx, total);
        rgb_full = tape.scatter_rows(rgb, active_idx, total);
    }
    const Value out = tape.composite(sigma_full, rgb_full, deltas, ts,
                                     model.background, n_rays, n_samples);
    return {out, a};
}

FrameRender render_frame(const FieldModel& model, const Camera& camera,
                         std::size_t n_samples, double t_near, double t_far,
                         const OccupancyGrid* grid) {
    const std::size_t h = camera.K.height, w = camera.K.width;
    FrameRender fr;
    fr.rgb = Image(h, w, 3);
    fr.depth = Image(h, w, 1);
    std::vector<std::size_t> row_evals(h, 0);

    parallel_for(h, [&](std::size_t v) {
        std::vector<Ray> rays(w);
        for (std::size_t u = 0; u < w; ++u) {
            rays[u] = generate_ray(camera, u, v, t_near, t_far);
            if (!clip_ray_to_bbox(model.bbox, rays[u]))
                rays[u].t_far = rays[u].t_near;  // background sentinel
        }
        Tape tape;
        const ModelHandles handles = register_model(tape, model);
        const RenderBatch batch = render_rays(tape, model, handles, rays,
                                              n_samples, false, nullptr, grid);
        const TensorF& out = tape.value(batch.out);
        for (std::size_t u = 0; u < w; ++u) {
            for (std::size_t c = 0; c < 3; ++c)
                fr.rgb.at(v, u, c) = out.data[u * 5 + c];
            fr.depth.at(v, u, 0) = out.data[u * 5 + 3];
        }
        row_evals[v] = batch.field_evals;
    });
    for (std::size_t v = 0; v < h; ++v) fr.field_evals += row_evals[v];
    return fr;
}

PatchRender render_patch(Tape& tape, const FieldModel& model,
                         const ModelHandles& handles, const Camera& camera,
                         std::size_t center_u, std::size_t center_v,
                         double t_near, double t_far, std::size_t n_samples,
                         std::size_t size, std::size_t stride,
                         const OccupancyGrid* grid) {
    const long half = static_cast<long>((size - 1) * stride) / 2;
    const long u0 = static_cast<long>(center_u) - half;
    const long v0 = static_cast<long>(center_v) - half;
    const long span = static_cast<long>((size - 1) * stride);
    if (u0 < 0 || v0 < 0 ||
        u0 + span >= static_cast<long>(camera.K.width) ||
        v0 + span >= static_cast<long>(camera.K.height))
        throw std::invalid_argument("render_patch: footprint out of bounds");

    std::vector<Ray> rays;
    rays.reserve(size * size);
    PatchRender pr;
    pr.valid.reserve(size * size);
    std::vector<std::size_t> valid_idx;
    for (std::size_t j = 0; j < size; ++j)
        for (std::size_t i = 0; i < size; ++i) {
            Ray ray = generate_ray(
                camera, static_cast<std::size_t>(u0) + i * stride,
                static_cast<std::size_t>(v0) + j * stride, t_near, t_far);
            const bool hit = clip_ray_to_bbox(model.bbox, ray);
            if (!hit) ray.t_far = ray.t_near;
            pr.valid.push_back(hit ? 1 : 0);
            if (hit) valid_idx.push_back(rays.size());
            rays.push_back(ray);
        }
    if (valid_idx.empty())
        throw std::invalid_argument("render_patch: no ray meets the volume");
    const RenderBatch batch =
        render_rays(tape, model, handles, rays, n_samples, false, nullptr, grid);

    pr.rgb = tape.slice_cols(batch.out, 0, 3);
    const Value depth = tape.slice_cols(batch.out, 3, 4);
    const Value disp = tape.div(tape.constant_scalar(1.0),
                                tape.affine(depth, 1.0, 1e-6));
    // Disparity is undefined where the ray never enters the volume; those
    // rows are flagged invalid and excluded from the normalising mean.
    pr.disparity = tape.div(disp, tape.mean(tape.gather_rows(disp, valid_idx)));
    return pr;
}

}  // namespace tridf
