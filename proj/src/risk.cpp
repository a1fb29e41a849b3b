#include "sracp/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sracp {

bool Obb::contains(const Vec2& p) const {
    const double c = std::cos(-yaw);
    const double s = std::sin(-yaw);
    const Vec2 d = p - center;
    const double lx = c * d.x - s * d.y;
    const double ly = s * d.x + c * d.y;
    return std::abs(lx) <= 0.5 * length && std::abs(ly) <= 0.5 * width;
}

void RiskWeights::validate() const {
    if (alpha_d < 0.0 || alpha_s < 0.0 || alpha_n < 0.0 || lambda_d < 0.0 || lambda_n < 0.0) {
        throw std::invalid_argument("risk weights must be non-negative");
    }
    if (!(epsilon > 0.0)) throw std::invalid_argument("risk epsilon must be > 0");
}

double distance_risk(const Vec2& p_obj, const Vec2& p_ego, double lambda_d) {
    return std::exp(-lambda_d * (p_obj - p_ego).norm());
}

double speed_risk(const ObjectState& obj, const ObjectState& ego,
                  std::span<const ObjectState> scene_objects, double epsilon) {
    if (scene_objects.empty()) {
        throw std::invalid_argument("speed_risk: scene_objects must be non-empty");
    }
    double max_rel = 0.0;
    for (const ObjectState& o : scene_objects) {
        max_rel = std::max(max_rel, (o.velocity - ego.velocity).norm());
    }
    return (obj.velocity - ego.velocity).norm() / (max_rel + epsilon);
}

double intersection_risk(const Vec2& p_obj, std::span<const Vec2> intersections,
                         double lambda_n) {
    if (intersections.empty()) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (const Vec2& q : intersections) {
        best = std::min(best, (p_obj - q).norm());
    }
    return std::exp(-lambda_n * best);
}

double total_risk(double r_distance, double r_speed, double r_intersection,
                  const RiskWeights& weights) {
    const double raw = weights.alpha_d * r_distance + weights.alpha_s * r_speed +
                       weights.alpha_n * r_intersection;
    return std::min(1.0, std::max(0.0, raw));
}

double object_risk(const ObjectState& obj, const ObjectState& ego,
                   std::span<const ObjectState> scene_objects,
                   std::span<const Vec2> intersections, const RiskWeights& weights) {
    const double rd = distance_risk(obj.position, ego.position, weights.lambda_d);
    const double rs = speed_risk(obj, ego, scene_objects, weights.epsilon);
    const double rn = intersection_risk(obj.position, intersections, weights.lambda_n);
    return total_risk(rd, rs, rn, weights);
}

RiskMap rasterize_risk_map(std::span<const ObjectState> objects, const ObjectState& ego,
                           std::span<const Vec2> intersections, const RiskWeights& weights,
                           const GridSpec& grid) {
    grid.validate();
    RiskMap map(grid);
    const int cols = grid.cols();
    const int rows = grid.rows();

    for (const ObjectState& obj : objects) {
        if (!(obj.box.length > 0.0) || !(obj.box.width > 0.0)) {
            throw std::invalid_argument("rasterize_risk_map: degenerate footprint");
        }
        const double risk = object_risk(obj, ego, objects, intersections, weights);
        if (risk <= 0.0) continue;

        // A cell counts as covered when its center falls inside the box
        // dilated by half a cell, so boundary cells are painted too.
        Obb box = obj.box;
        box.length += grid.cell_size;
        box.width += grid.cell_size;

        // Scan only the cells under the footprint's axis-aligned bound.
        const double radius = 0.5 * std::hypot(box.length, box.width);
        const Vec2 rel = box.center - ego.position;
        const int c0 = std::max(0, static_cast<int>(std::floor((rel.x - radius - grid.x_min) / grid.cell_size)));
        const int c1 = std::min(cols - 1, static_cast<int>(std::floor((rel.x + radius - grid.x_min) / grid.cell_size)));
        const int r0 = std::max(0, static_cast<int>(std::floor((rel.y - radius - grid.y_min) / grid.cell_size)));
        const int r1 = std::min(rows - 1, static_cast<int>(std::floor((rel.y + radius - grid.y_min) / grid.cell_size)));
        for (int r = r0; r <= r1; ++r) {
            for (int c = c0; c <= c1; ++c) {
                const CellIndex idx = grid.index_of(r, c);
                const Vec2 world = grid.cell_center(idx) + ego.position;
                if (!box.contains(world)) continue;
                double& cell = map.at(idx);
                cell = std::max(cell, risk);
            }
        }
    }
    return map;
}

RiskMatrix pairwise_risk_matrix(const ObjectState& ego,
                                std::span<const ObjectState> neighbors,
                                std::span<const Vec2> intersections,
                                const RiskWeights& weights) {
    RiskMatrix matrix;
    matrix.ego = ego.id;
    matrix.entries.reserve(neighbors.size());
    for (const ObjectState& n : neighbors) {
        matrix.entries.emplace_back(n.id, object_risk(n, ego, neighbors, intersections, weights));
    }
    std::sort(matrix.entries.begin(), matrix.entries.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return matrix;
}

std::vector<AgentId> dangerous_set(const RiskMatrix& matrix, double tau_r) {
    std::vector<AgentId> out;
    for (const auto& [id, rho] : matrix.entries) {
        if (rho > tau_r) out.push_back(id);
    }
    return out;
}

}  // namespace sracp
