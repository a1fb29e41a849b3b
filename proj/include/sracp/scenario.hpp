#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sracp/grid.hpp"
#include "sracp/risk.hpp"

namespace sracp {

enum class ScenarioKind {
    UnprotectedLeftTurn,
    Intersection,
    Merge,
    HeadOn,
    Overtake,
    StraightBaseline,
    MultiAgent,
};

std::string to_string(ScenarioKind kind);
std::optional<ScenarioKind> scenario_kind_from_string(const std::string& name);
std::vector<ScenarioKind> all_scenario_kinds();

/// Per-frame pose sample. Static objects carry a single waypoint.
struct Waypoint {
    double x = 0.0;
    double y = 0.0;
    double yaw = 0.0;
};

struct SceneObject {
    AgentId id = 0;
    double length = 4.5;
    double width = 2.0;
    double z0 = 0.0;   // footprint base height, m
    double z1 = 1.6;   // footprint top height, m
    bool connected = false;
    std::vector<Waypoint> script;
};

struct Scene {
    std::string name;
    double dt = 0.1;   // seconds per frame
    int frames = 16;
    AgentId ego_id = 1;
    std::vector<AgentId> connected_ids;
    std::vector<Vec2> intersections;
    std::vector<Vec2> ego_path;  // planned route metadata
    std::vector<SceneObject> objects;

    const SceneObject* find(AgentId id) const;
    void validate() const;
};

/// Kinematic state of an object at a frame (position/yaw from the script,
/// velocity by finite differences).
ObjectState object_state_at(const Scene& scene, const SceneObject& object, int frame);
ObjectState object_state_at(const Scene& scene, AgentId id, int frame);

struct ScenarioParams {
    int frames = 16;
    double dt = 0.1;
};

/// Deterministic synthetic scene for the given kind and seed. Every kind
/// guarantees its signature structure (e.g. the unprotected-left-turn scene
/// keeps an oncoming vehicle inside the ego's blind zone for several frames
/// while a partner agent observes it).
Scene generate_scene(ScenarioKind kind, std::uint64_t seed, const ScenarioParams& params = {});

/// One simulated range return.
struct RayHit {
    Point3 point{};
    AgentId object = 0;
    double range = 0.0;
};

/// Casts `rays` equiangular 2D rays from the agent and returns first-hit
/// boundary points (seeded range jitter, z sampled inside the struck
/// object's height band). Rays that hit nothing return no point.
std::vector<RayHit> raycast_hits(const Scene& scene, AgentId agent_id, int frame,
                                 const FovSpec& fov, int rays, std::uint64_t seed,
                                 double jitter = 0.05);

std::vector<Point3> raycast_points(const Scene& scene, AgentId agent_id, int frame,
                                   const FovSpec& fov, int rays, std::uint64_t seed,
                                   double jitter = 0.05);

/// Scene JSON round-trip. The loader validates all scene invariants and
/// throws ConfigError with a description on violation.
std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& text);
void save_scene(const Scene& scene, const std::string& path);
Scene load_scene(const std::string& path);

}  // namespace sracp
