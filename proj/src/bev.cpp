#include "sracp/bev.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sracp {

OccupancyField build_occupancy(std::span<const Point3> points, const Pose2D& ego_pose,
                               const GridSpec& grid, int kernel_radius) {
    grid.validate();
    if (kernel_radius < 0) throw std::invalid_argument("build_occupancy: kernel_radius < 0");

    const int rows = grid.rows();
    const int cols = grid.cols();
    std::vector<double> counts(grid.cell_count(), 0.0);

    for (const Point3& p : points) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
            throw std::invalid_argument("build_occupancy: non-finite point coordinate");
        }
        if (p.z < grid.z_min || p.z > grid.z_max) continue;
        const Vec2 local = world_to_ego({p.x, p.y}, ego_pose);
        const CellIndex idx = grid.cell_at(local);
        if (idx < 0) continue;
        counts[static_cast<std::size_t>(idx)] += 1.0;
    }

    OccupancyField out(grid);
    if (kernel_radius == 0) {
        for (std::size_t i = 0; i < counts.size(); ++i) {
            out.values[i] = 1.0 - std::exp(-counts[i]);
        }
        return out;
    }

    // Box-kernel aggregation via a row-wise then column-wise running sum.
    std::vector<double> tmp(counts.size(), 0.0);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            double a = 0.0;
            const int c0 = std::max(0, c - kernel_radius);
            const int c1 = std::min(cols - 1, c + kernel_radius);
            for (int cc = c0; cc <= c1; ++cc) a += counts[static_cast<std::size_t>(r * cols + cc)];
            tmp[static_cast<std::size_t>(r * cols + c)] = a;
        }
    }
    for (int c = 0; c < cols; ++c) {
        for (int r = 0; r < rows; ++r) {
            double a = 0.0;
            const int r0 = std::max(0, r - kernel_radius);
            const int r1 = std::min(rows - 1, r + kernel_radius);
            for (int rr = r0; rr <= r1; ++rr) a += tmp[static_cast<std::size_t>(rr * cols + c)];
            out.values[static_cast<std::size_t>(r * cols + c)] = 1.0 - std::exp(-a);
        }
    }
    return out;
}

double transmittance(const OccupancyField& field, CellIndex target_cell,
                     const RaycastParams& params) {
    const GridSpec& grid = field.grid;
    params.validate(grid.cell_size);
    if (!grid.contains_index(target_cell)) {
        throw std::invalid_argument("transmittance: target cell outside grid");
    }

    const Vec2 target = grid.cell_center(target_cell);
    const double range = target.norm();
    double sum = 0.0;
    if (range > 0.0) {
        const Vec2 dir{target.x / range, target.y / range};
        const int steps = static_cast<int>(std::floor(range / params.step));
        for (int k = 0; k <= steps; ++k) {
            const double s = k * params.step;
            const CellIndex idx = grid.cell_at({s * dir.x, s * dir.y});
            if (idx < 0 || idx == target_cell) continue;
            sum += field.at(idx);
        }
    }
    return std::exp(-params.lambda * params.step * sum);
}

BlindZoneMask occlusion_map(const OccupancyField& field, const FovSpec& fov,
                            const RaycastParams& params, double tau_occ) {
    fov.validate();
    params.validate(field.grid.cell_size);
    if (!(tau_occ > 0.0 && tau_occ < 1.0)) {
        throw std::invalid_argument("occlusion_map: tau_occ must lie in (0, 1)");
    }

    BlindZoneMask mask(field.grid);
    const std::size_t n = field.grid.cell_count();
    for (std::size_t i = 0; i < n; ++i) {
        const CellIndex idx = static_cast<CellIndex>(i);
        const Vec2 center = field.grid.cell_center(idx);
        double prob = 1.0;
        if (fov.contains(center)) {
            prob = 1.0 - transmittance(field, idx, params);
        }
        mask.occ_prob[i] = prob;
        mask.occluded[i] = prob > tau_occ ? 1 : 0;
    }
    return mask;
}

BlindZoneMask stabilize_blind_zone(std::span<const MaskFrame> history,
                                   const Pose2D& current_pose, double tau_t) {
    if (history.empty()) {
        throw std::invalid_argument("stabilize_blind_zone: empty history");
    }
    const GridSpec& grid = history.front().mask.grid;
    for (const MaskFrame& f : history) {
        if (!(f.mask.grid == grid)) {
            throw std::invalid_argument("stabilize_blind_zone: masks use different grids");
        }
    }
    if (!(tau_t > 0.0 && tau_t < 1.0)) {
        throw std::invalid_argument("stabilize_blind_zone: tau_t must lie in (0, 1)");
    }

    BlindZoneMask out(grid);
    const std::size_t n = grid.cell_count();
    const double inv_k = 1.0 / static_cast<double>(history.size());
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 world = ego_to_world(grid.cell_center(static_cast<CellIndex>(i)), current_pose);
        double votes = 0.0;
        for (const MaskFrame& f : history) {
            const CellIndex past = grid.cell_at(world_to_ego(world, f.pose));
            // Unknown history counts as occluded.
            votes += (past < 0) ? 1.0 : static_cast<double>(f.mask.occluded[static_cast<std::size_t>(past)]);
        }
        const double frac = votes * inv_k;
        out.occ_prob[i] = frac;
        out.occluded[i] = frac > tau_t ? 1 : 0;
    }
    return out;
}

}  // namespace sracp
