#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sracp/grid.hpp"

namespace sracp {

using AgentId = std::uint32_t;

/// Oriented footprint box in world coordinates.
struct Obb {
    Vec2 center{};
    double length = 4.5;  // extent along the yaw axis, m
    double width = 2.0;   // extent across the yaw axis, m
    double yaw = 0.0;     // radians

    bool contains(const Vec2& p) const;
};

struct ObjectState {
    AgentId id = 0;
    Vec2 position{};
    Vec2 velocity{};
    Obb box{};
    bool is_connected = false;
};

/// Weights and decay rates for the three risk components.
struct RiskWeights {
    double alpha_d = 0.5;
    double alpha_s = 0.3;
    double alpha_n = 0.2;
    double lambda_d = 0.05;  // 1/m
    double lambda_n = 0.02;  // 1/m
    double epsilon = 0.01;

    void validate() const;
};

/// Per-neighbor pairwise risk, ordered by neighbor id.
struct RiskMatrix {
    AgentId ego = 0;
    std::vector<std::pair<AgentId, double>> entries;
};

/// exp(-lambda_d * ||p_obj - p_ego||), in (0, 1].
double distance_risk(const Vec2& p_obj, const Vec2& p_ego, double lambda_d);

/// Relative speed of `obj` w.r.t. `ego`, normalized by the scene maximum:
/// ||v_obj - v_ego|| / (max_j ||v_j - v_ego|| + epsilon). Result in [0, 1).
double speed_risk(const ObjectState& obj, const ObjectState& ego,
                  std::span<const ObjectState> scene_objects, double epsilon);

/// exp(-lambda_n * min_q ||p_obj - q||) over intersection centers; 0 when the
/// intersection set is empty.
double intersection_risk(const Vec2& p_obj, std::span<const Vec2> intersections,
                         double lambda_n);

/// Weighted combination clipped to [0, 1].
double total_risk(double r_distance, double r_speed, double r_intersection,
                  const RiskWeights& weights);

/// Convenience: all three components for one object w.r.t. an ego.
double object_risk(const ObjectState& obj, const ObjectState& ego,
                   std::span<const ObjectState> scene_objects,
                   std::span<const Vec2> intersections, const RiskWeights& weights);

/// Paints each object's clipped risk over the cells its footprint covers;
/// a cell is covered when its center lies inside the box dilated by half a
/// cell on each side, and overlaps keep the maximum. The grid is interpreted
/// relative to the ego position, axis-aligned.
RiskMap rasterize_risk_map(std::span<const ObjectState> objects, const ObjectState& ego,
                           std::span<const Vec2> intersections, const RiskWeights& weights,
                           const GridSpec& grid);

/// Pairwise risk of every neighbor w.r.t. the ego, ordered by neighbor id.
/// The speed normalization runs over the neighbor set itself.
RiskMatrix pairwise_risk_matrix(const ObjectState& ego,
                                std::span<const ObjectState> neighbors,
                                std::span<const Vec2> intersections,
                                const RiskWeights& weights);

/// Neighbors with risk strictly above tau_r.
std::vector<AgentId> dangerous_set(const RiskMatrix& matrix, double tau_r);

}  // namespace sracp
