// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tridf/model.hpp"
#include "tridf/rng.hpp"

namespace tridf {

// Sample positions along one ray. deltas[i] = t[i+1] - t[i] for i < N-1 and
// deltas[N-1] = t_far - t[N-1], so opacity telescopes exactly.
struct RaySamples {
    std::vector<double> t;       // strictly increasing
    std::vector<Vec3> x;         // world points
    std::vector<double> deltas;  // same length as t
};

// N uniform bins over [t_near, t_far]; jitter=true draws one uniform sample
// per bin, jitter=false takes the bin midpoints.
RaySamples stratified_sample(const Ray& ray, std::size_t n, bool jitter,
                             Rng& rng);

// Binary empty-space grid over the model bbox. A cell is empty only when the
// density at its center and at the centers of all 26 neighbours falls below
// the threshold; the one-cell dilation keeps the skipping error within the
// documented opacity bound at occupancy boundaries.
struct OccupancyGrid {
    std::size_t res = 0;
    Aabb bbox;
    double threshold = 0.0;
    std::vector<std::uint8_t> occupied;  // res^3, x-fastest

    bool initialized() const { return res > 0; }
    // True when the point lies in an empty cell (always false before init).
    bool empty_at(const Vec3& p) const;
};

OccupancyGrid occupancy_grid_update(const FieldModel& model,
                                    std::size_t grid_res, double threshold);

// One batch of rays rendered on a tape (differentiable w.r.t. the model
// parameters registered in `handles`).
struct RenderBatch {
    Value out;                // [n_rays, 5]: r, g, b, depth, opacity
    std::size_t field_evals;  // density-network evaluations performed
};

// Per ray: stratified samples, out-of-bbox and occupancy-empty samples
// contribute sigma = 0 (and are never evaluated); the rest run through the
// density field, triplane and color head, then emission-absorption
// compositing with the model background. rng may be null when jitter=false.
RenderBatch render_rays(Tape& tape, const FieldModel& model,
                        const ModelHandles& handles, std::span<const Ray> rays,
                        std::size_t n_samples, bool jitter, Rng* rng,
                        const OccupancyGrid* grid = nullptr);

// Deterministic full-frame render (bin-midpoint sampling, fresh tapes per
// chunk). Returns an RGB image plus a single-channel depth map and the total
// field evaluations across all rays.
struct FrameRender {
    Image rgb;    // [H,W,3]
    Image depth;  // [H,W,1]
    std::size_t field_evals = 0;
};

FrameRender render_frame(const FieldModel& model, const Camera& camera,
                         std::size_t n_samples, double t_near, double t_far,
                         const OccupancyGrid* grid = nullptr);

// size x size rays at `stride`-pixel spacing centred on center_px, rendered
// on the tape. Disparity is 1/(depth + 1e-6) normalised by the patch mean
// over valid rays; rays that never enter the volume have no meaningful
// disparity and are flagged invalid. Errors when the strided footprint
// leaves the image or no ray meets the volume.
struct PatchRender {
    Value rgb;        // [size*size, 3]
    Value disparity;  // [size*size, 1]
    std::vector<std::uint8_t> valid;  // per ray, 1 = intersects the bbox
};

PatchRender render_patch(Tape& tape, const FieldModel& model,
                         const ModelHandles& handles, const Camera& camera,
                         std::size_t center_u, std::size_t center_v,
                         double t_near, double t_far, std::size_t n_samples,
                         std::size_t size = 16, std::size_t stride = 4,
                         const OccupancyGrid* grid = nullptr);

// Clip [t_near, t_far] of a pinhole ray against the box; false on miss.
bool clip_ray_to_bbox(const Aabb& bbox, Ray& ray);

}  // namespace tridf
