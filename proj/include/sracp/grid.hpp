#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sracp/geometry.hpp"

namespace sracp {

using CellIndex = std::int32_t;

/// Bird's-eye-view raster geometry. Coordinates are in the frame of the agent
/// that carries the grid; cells are indexed row-major with row 0 at y_min and
/// column 0 at x_min.
struct GridSpec {
    double x_min = -25.6;
    double x_max = 25.6;
    double y_min = -25.6;
    double y_max = 25.6;
    double cell_size = 0.4;
    double z_min = -0.5;
    double z_max = 3.0;

    int rows() const {
        return static_cast<int>(std::ceil((y_max - y_min) / cell_size));
    }
    int cols() const {
        return static_cast<int>(std::ceil((x_max - x_min) / cell_size));
    }
    std::size_t cell_count() const {
        return static_cast<std::size_t>(rows()) * static_cast<std::size_t>(cols());
    }

    void validate() const {
        if (!(cell_size > 0.0)) throw std::invalid_argument("grid: cell_size must be > 0");
        if (!(x_max > x_min)) throw std::invalid_argument("grid: x_max must be > x_min");
        if (!(y_max > y_min)) throw std::invalid_argument("grid: y_max must be > y_min");
        if (!(z_max > z_min)) throw std::invalid_argument("grid: z_max must be > z_min");
        if (!std::isfinite(x_min) || !std::isfinite(x_max) || !std::isfinite(y_min) ||
            !std::isfinite(y_max) || !std::isfinite(cell_size)) {
            throw std::invalid_argument("grid: extents must be finite");
        }
    }

    bool operator==(const GridSpec&) const = default;

    CellIndex index_of(int row, int col) const {
        return static_cast<CellIndex>(row * cols() + col);
    }
    int row_of(CellIndex idx) const { return static_cast<int>(idx) / cols(); }
    int col_of(CellIndex idx) const { return static_cast<int>(idx) % cols(); }

    bool contains_cell(int row, int col) const {
        return row >= 0 && row < rows() && col >= 0 && col < cols();
    }
    bool contains_index(CellIndex idx) const {
        return idx >= 0 && static_cast<std::size_t>(idx) < cell_count();
    }

    Vec2 cell_center(CellIndex idx) const {
        const int r = row_of(idx);
        const int c = col_of(idx);
        return {x_min + (c + 0.5) * cell_size, y_min + (r + 0.5) * cell_size};
    }

    /// Cell containing a point, or -1 when the point lies outside the grid.
    CellIndex cell_at(const Vec2& p) const {
        const int c = static_cast<int>(std::floor((p.x - x_min) / cell_size));
        const int r = static_cast<int>(std::floor((p.y - y_min) / cell_size));
        if (!contains_cell(r, c)) return -1;
        return index_of(r, c);
    }

    /// FNV-1a over the packed little-endian grid parameters. Used by the wire
    /// formats to reject mismatched rasters.
    std::uint64_t hash() const;
};

/// Dense per-cell scalar plane in [0, 1].
struct ScalarField {
    GridSpec grid{};
    std::vector<double> values;

    ScalarField() = default;
    explicit ScalarField(const GridSpec& g, double fill = 0.0)
        : grid(g), values(g.cell_count(), fill) {}

    double at(CellIndex idx) const { return values[static_cast<std::size_t>(idx)]; }
    double& at(CellIndex idx) { return values[static_cast<std::size_t>(idx)]; }
};

// Occupancy o(u) and per-cell risk share the same raster representation.
using OccupancyField = ScalarField;
using RiskMap = ScalarField;

/// Occlusion probability plane plus its thresholded boolean mask.
struct BlindZoneMask {
    GridSpec grid{};
    std::vector<std::uint8_t> occluded;
    std::vector<double> occ_prob;

    BlindZoneMask() = default;
    explicit BlindZoneMask(const GridSpec& g)
        : grid(g), occluded(g.cell_count(), 0), occ_prob(g.cell_count(), 0.0) {}

    std::size_t occluded_count() const {
        std::size_t n = 0;
        for (auto b : occluded) n += b != 0;
        return n;
    }
};

/// Sensor field of view: maximum range plus an azimuth span. `full_circle`
/// ignores the span limits.
struct FovSpec {
    double max_range = 60.0;
    bool full_circle = true;
    double azimuth_start = 0.0;  // radians
    double azimuth_end = 0.0;    // span = end - start, in [0, 2pi]

    void validate() const {
        if (!(max_range > 0.0)) throw std::invalid_argument("fov: max_range must be > 0");
        if (!full_circle) {
            const double span = azimuth_end - azimuth_start;
            if (span < 0.0 || span > 2.0 * std::numbers::pi + 1e-12) {
                throw std::invalid_argument("fov: azimuth span must lie in [0, 2pi]");
            }
        }
    }

    bool contains(const Vec2& p) const {
        if (p.norm() > max_range) return false;
        if (full_circle) return true;
        const double theta = std::atan2(p.y, p.x);
        const double two_pi = 2.0 * std::numbers::pi;
        double rel = std::fmod(theta - azimuth_start, two_pi);
        if (rel < 0.0) rel += two_pi;
        return rel <= azimuth_end - azimuth_start;
    }
};

/// Beer-Lambert ray-marching parameters.
struct RaycastParams {
    double lambda = 2.0;  // attenuation, 1/m
    double step = 0.2;    // sample spacing, m

    void validate(double cell_size) const {
        if (!(lambda > 0.0)) throw std::invalid_argument("raycast: lambda must be > 0");
        if (!(step > 0.0)) throw std::invalid_argument("raycast: step must be > 0");
        if (step > cell_size) {
            throw std::invalid_argument("raycast: step must not exceed cell_size");
        }
    }
};

}  // namespace sracp
