#pragma once

#include <span>
#include <vector>

#include "sracp/grid.hpp"

namespace sracp {

/// Rasterizes a point sweep into a 2.5D occupancy field. Points are given in
/// the world frame and projected into the frame of `ego_pose`; points outside
/// the grid extent or the [z_min, z_max] band are dropped. Per-cell counts are
/// aggregated through an unnormalized box kernel of `kernel_radius` cells and
/// squashed with sigma(a) = 1 - exp(-a).
///
/// Throws std::invalid_argument on non-finite coordinates.
OccupancyField build_occupancy(std::span<const Point3> points, const Pose2D& ego_pose,
                               const GridSpec& grid, int kernel_radius = 0);

/// Line-of-sight transmittance from the grid origin (the carrying agent) to
/// the center of `target_cell`:
///
///   T = exp(-lambda * step * sum_k o(r(k * step)))   with k = 0..floor(r/step)
///
/// Samples use nearest-cell lookup; samples outside the grid contribute zero
/// and samples landing in the target cell itself are excluded, so an occupied
/// object does not occlude itself. Result lies in (0, 1].
double transmittance(const OccupancyField& field, CellIndex target_cell,
                     const RaycastParams& params);

/// Per-cell occlusion probability 1 - chi_fov(u) * T(u), thresholded at
/// tau_occ. Cells outside the field of view get occ_prob = 1 exactly.
BlindZoneMask occlusion_map(const OccupancyField& field, const FovSpec& fov,
                            const RaycastParams& params, double tau_occ);

/// One frame of blind-zone history together with the ego pose it was
/// observed from.
struct MaskFrame {
    BlindZoneMask mask;
    Pose2D pose;
};

/// Temporal stabilization: each history mask is warped into the current frame
/// (nearest-cell resampling; cells falling outside a past grid count as
/// occluded) and the per-cell mean vote is thresholded at tau_t. The returned
/// occ_prob plane holds the vote fraction.
///
/// Throws std::invalid_argument on empty history or mismatched grids.
BlindZoneMask stabilize_blind_zone(std::span<const MaskFrame> history,
                                   const Pose2D& current_pose, double tau_t);

}  // namespace sracp
