#include "sracp/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sracp/errors.hpp"

namespace sracp {

using ordered_json = nlohmann::ordered_json;

std::string to_string(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::UnprotectedLeftTurn: return "unprotected_left_turn";
        case ScenarioKind::Intersection: return "intersection";
        case ScenarioKind::Merge: return "merge";
        case ScenarioKind::HeadOn: return "head_on";
        case ScenarioKind::Overtake: return "overtake";
        case ScenarioKind::StraightBaseline: return "straight_baseline";
        case ScenarioKind::MultiAgent: return "multi_agent";
    }
    return "?";
}

std::optional<ScenarioKind> scenario_kind_from_string(const std::string& name) {
    for (ScenarioKind kind : all_scenario_kinds()) {
        if (to_string(kind) == name) return kind;
    }
    return std::nullopt;
}

std::vector<ScenarioKind> all_scenario_kinds() {
    return {ScenarioKind::UnprotectedLeftTurn, ScenarioKind::Intersection,
            ScenarioKind::Merge,               ScenarioKind::HeadOn,
            ScenarioKind::Overtake,            ScenarioKind::StraightBaseline,
            ScenarioKind::MultiAgent};
}

const SceneObject* Scene::find(AgentId id) const {
    for (const SceneObject& o : objects) {
        if (o.id == id) return &o;
    }
    return nullptr;
}

void Scene::validate() const {
    if (frames < 1) throw ConfigError("scene: frames must be >= 1");
    if (!(dt > 0.0)) throw ConfigError("scene: dt must be > 0");
    if (objects.empty()) throw ConfigError("scene: no objects");

    std::set<AgentId> ids;
    for (const SceneObject& o : objects) {
        if (!ids.insert(o.id).second) throw ConfigError("scene: duplicate object id");
        if (!(o.length > 0.0) || !(o.width > 0.0)) {
            throw ConfigError("scene: object footprint must have positive extent");
        }
        if (!(o.z1 > o.z0)) throw ConfigError("scene: object height band must be non-empty");
        if (o.script.empty()) throw ConfigError("scene: object script must be non-empty");
        for (const Waypoint& w : o.script) {
            if (!std::isfinite(w.x) || !std::isfinite(w.y) || !std::isfinite(w.yaw)) {
                throw ConfigError("scene: non-finite waypoint");
            }
        }
    }
    if (connected_ids.empty()) throw ConfigError("scene: needs at least one connected agent");
    for (AgentId id : connected_ids) {
        const SceneObject* obj = find(id);
        if (!obj) throw ConfigError("scene: connected id has no object");
        if (!obj->connected) throw ConfigError("scene: connected id not flagged on object");
    }
    if (std::find(connected_ids.begin(), connected_ids.end(), ego_id) == connected_ids.end()) {
        throw ConfigError("scene: ego must be a connected agent");
    }
}

ObjectState object_state_at(const Scene& scene, const SceneObject& object, int frame) {
    const int last = static_cast<int>(object.script.size()) - 1;
    const int f = std::clamp(frame, 0, last);
    const Waypoint& w = object.script[static_cast<std::size_t>(f)];

    ObjectState state;
    state.id = object.id;
    state.position = {w.x, w.y};
    state.is_connected = object.connected;
    state.box = Obb{{w.x, w.y}, object.length, object.width, w.yaw};

    if (last >= 1) {
        const int a = std::min(f, last - 1);
        const Waypoint& w0 = object.script[static_cast<std::size_t>(a)];
        const Waypoint& w1 = object.script[static_cast<std::size_t>(a + 1)];
        state.velocity = {(w1.x - w0.x) / scene.dt, (w1.y - w0.y) / scene.dt};
    }
    return state;
}

ObjectState object_state_at(const Scene& scene, AgentId id, int frame) {
    const SceneObject* obj = scene.find(id);
    if (!obj) throw std::invalid_argument("object_state_at: unknown object id");
    return object_state_at(scene, *obj, frame);
}

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
}

struct SceneBuilder {
    Scene scene;
    std::mt19937_64 rng;

    SceneBuilder(ScenarioKind kind, std::uint64_t seed, const ScenarioParams& params)
        : rng(mix_seed(seed, static_cast<std::uint64_t>(kind) + 1)) {
        scene.name = to_string(kind) + "_s" + std::to_string(seed);
        scene.frames = params.frames;
        scene.dt = params.dt;
    }

    double jitter(double amplitude) {
        return std::uniform_real_distribution<double>(-amplitude, amplitude)(rng);
    }

    /// Constant-velocity script over the scene duration.
    std::vector<Waypoint> moving(Vec2 start, double yaw, double speed) {
        std::vector<Waypoint> script;
        script.reserve(static_cast<std::size_t>(scene.frames));
        const Vec2 step{speed * std::cos(yaw) * scene.dt, speed * std::sin(yaw) * scene.dt};
        Vec2 p = start;
        for (int f = 0; f < scene.frames; ++f) {
            script.push_back({p.x, p.y, yaw});
            p = p + step;
        }
        return script;
    }

    void add_vehicle(AgentId id, std::vector<Waypoint> script, double length, double width,
                     double height, bool connected) {
        SceneObject obj;
        obj.id = id;
        obj.length = length;
        obj.width = width;
        obj.z0 = 0.0;
        obj.z1 = height;
        obj.connected = connected;
        obj.script = std::move(script);
        scene.objects.push_back(std::move(obj));
        if (connected) scene.connected_ids.push_back(id);
    }

    void add_car(AgentId id, Vec2 pos, double yaw, double speed, bool connected = false) {
        add_vehicle(id, speed != 0.0 ? moving(pos, yaw, speed)
                                     : std::vector<Waypoint>{{pos.x, pos.y, yaw}},
                    4.5, 2.0, 1.6, connected);
    }

    void add_truck(AgentId id, Vec2 pos, double yaw, double speed, bool connected = false) {
        add_vehicle(id, speed != 0.0 ? moving(pos, yaw, speed)
                                     : std::vector<Waypoint>{{pos.x, pos.y, yaw}},
                    6.8, 2.6, 2.6, connected);
    }

    void add_wall(AgentId id, Vec2 pos, double yaw, double length) {
        add_vehicle(id, {{pos.x, pos.y, yaw}}, length, 0.8, 3.0, false);
    }
};

constexpr double kPi = std::numbers::pi;

Scene build_unprotected_left_turn(SceneBuilder& b) {
    // Ego waits at a crossroad to turn left; an opposing truck occupies the
    // intersection and hides the oncoming through car. A partner approaching
    // on the side road keeps a clear corner view of it the whole time. A
    // stopped car queued behind the truck sits deep in the same shadow with
    // sub-threshold risk.
    const double ex = -8.0 + b.jitter(0.5);
    const double oncoming_x = 15.0 + b.jitter(0.8);
    const double oncoming_speed = 6.0 + b.jitter(0.5);

    b.scene.intersections.push_back({0.0, 0.0});
    b.scene.ego_path = {{ex, -1.75}, {-1.0, -1.0}, {1.5, 4.0}, {1.5, 14.0}};

    b.add_car(1, {ex, -1.75}, 0.0, 0.6, true);                         // creeping ego
    b.add_truck(10, {4.5 + b.jitter(0.3), 0.0}, kPi, 0.0);             // opposing left-turner
    b.add_car(20, {oncoming_x, 3.8}, kPi, oncoming_speed);             // hidden oncoming car
    b.add_car(30, {11.5 + b.jitter(0.4), 0.0}, kPi, 0.0);              // queued behind the truck
    b.add_car(2, {1.75, 10.0 + b.jitter(0.5)}, -kPi / 2, 3.0, true);   // partner southbound
    return b.scene;
}

Scene build_intersection(SceneBuilder& b) {
    // Unprotected crossroads: parked trucks on the south-west corner hide
    // eastbound cross traffic from the northbound ego; a partner coming
    // south past the intersection has a clear diagonal view.
    const double cross_speed = 8.0 + b.jitter(0.8);

    b.scene.intersections.push_back({0.0, 0.0});
    b.scene.ego_path = {{1.75, -14.0}, {1.75, 14.0}};

    b.add_car(1, {1.75, -14.0 + b.jitter(0.5)}, kPi / 2, 4.0, true);       // ego northbound
    b.add_truck(10, {-7.0, -7.6 + b.jitter(0.3)}, kPi / 2, 0.0);           // corner blocks
    b.add_truck(11, {-7.0, -14.0 + b.jitter(0.3)}, kPi / 2, 0.0);
    b.add_car(20, {-17.0 + b.jitter(0.8), -1.75}, 0.0, cross_speed);       // hidden crossing car
    b.add_car(2, {-1.75, 11.0 + b.jitter(0.5)}, -kPi / 2, 4.0, true);      // partner southbound
    b.add_car(30, {9.0, 5.0}, 0.0, 0.0);                                   // parked
    return b.scene;
}

Scene build_merge(SceneBuilder& b) {
    // Ego on an angled on-ramp; a sound wall hides the mainline traffic it
    // must merge with. A connected oncoming car across the road sees the
    // mainline gap diagonally.
    const double main_speed = 9.0 + b.jitter(0.8);
    const double ramp_yaw = kPi / 5.0;

    b.scene.intersections.push_back({4.0, -1.75});  // merge gore point
    b.scene.ego_path = {{-6.0, -10.0}, {4.0, -1.75}, {16.0, -1.75}};

    b.add_car(1, {-6.0 + b.jitter(0.5), -10.0}, ramp_yaw, 6.0, true);      // ego on ramp
    b.add_wall(40, {-9.0, -5.6}, 0.0, 7.0);
    b.add_wall(41, {-16.5, -5.6}, 0.0, 7.0);
    b.add_car(20, {-20.0 + b.jitter(0.8), -1.75}, 0.0, main_speed);        // hidden mainline car
    b.add_car(2, {8.0 + b.jitter(0.5), 1.75}, kPi, 6.0, true);             // partner oncoming
    return b.scene;
}

Scene build_head_on(SceneBuilder& b) {
    // Close-range opposing traffic: an oncoming car overtaking a truck sits
    // enveloped in the truck's shadow, half in the ego's lane. A connected
    // car ahead of the ego has just passed the pair and still sees it.
    const double overtaker_speed = 6.0 + b.jitter(0.3);

    b.scene.ego_path = {{-14.0, -1.3}, {16.0, -1.3}};

    b.add_car(1, {-14.0 + b.jitter(0.5), -1.3}, 0.0, 6.5, true);           // ego eastbound
    b.add_truck(10, {11.0 + b.jitter(0.5), 1.3}, kPi, 6.0);                // oncoming truck
    b.add_car(20, {17.6 + b.jitter(0.5), 2.1}, kPi, overtaker_speed);      // hidden overtaker
    b.add_car(2, {18.0 + b.jitter(0.5), -1.5}, 0.0, 6.0, true);            // partner ahead
    b.add_car(30, {-4.0, 4.6}, 0.0, 0.0);                                  // parked roadside
    return b.scene;
}

Scene build_overtake(SceneBuilder& b) {
    // Ego closes on a slow truck and prepares to pass; oncoming traffic is
    // hidden behind the truck. A connected car parked on the shoulder sees
    // the oncoming lane diagonally.
    const double ego_speed = 7.5 + b.jitter(0.4);

    b.scene.ego_path = {{-16.0, -1.3}, {-4.0, 1.3}, {10.0, -1.3}};

    b.add_car(1, {-16.0 + b.jitter(0.5), -1.3}, 0.0, ego_speed, true);     // ego closing in
    b.add_truck(10, {-8.5 + b.jitter(0.4), -1.3}, 0.0, 4.5);               // slow truck ahead
    b.add_car(20, {13.0 + b.jitter(0.8), 2.3}, kPi, 3.0);                  // hidden oncoming car
    b.add_car(2, {1.5 + b.jitter(0.5), -4.6}, 0.0, 0.0, true);             // partner on shoulder
    return b.scene;
}

Scene build_straight_baseline(SceneBuilder& b) {
    // Low-risk calibration scene: free-flowing platoon at a common speed, no
    // intersections, nothing occluded that matters.
    const double speed = 6.0 + b.jitter(0.5);

    b.scene.ego_path = {{-12.0, -1.75}, {14.0, -1.75}};

    b.add_car(1, {-12.0 + b.jitter(0.5), -1.75}, 0.0, speed, true);
    b.add_car(2, {8.0 + b.jitter(0.5), 1.75}, 0.0, speed, true);
    b.add_car(20, {-2.0 + b.jitter(0.5), -1.75}, 0.0, speed);
    b.add_car(21, {-2.0 + b.jitter(0.5), 5.25}, 0.0, speed);
    return b.scene;
}

Scene build_multi_agent(SceneBuilder& b) {
    // Three connected vehicles negotiate a crossroads with parked trucks on
    // two corners; a crossing car is hidden from the ego but visible to two
    // partners.
    const double cross_speed = 6.5 + b.jitter(0.5);

    b.scene.intersections.push_back({0.0, 0.0});
    b.scene.ego_path = {{12.0, 1.75}, {-14.0, 1.75}};

    b.add_car(1, {12.0 + b.jitter(0.5), 1.75}, kPi, 5.0, true);            // ego westbound
    b.add_car(2, {-1.75, 12.0 + b.jitter(0.5)}, -kPi / 2, 5.0, true);      // agent southbound
    b.add_car(3, {-14.0 + b.jitter(0.5), -1.75}, 0.0, 5.5, true);          // agent eastbound
    b.add_truck(10, {7.5, -4.5 + b.jitter(0.3)}, 0.0, 0.0);                // SE corner block
    b.add_truck(11, {-7.5, 5.0 + b.jitter(0.3)}, 0.0, 0.0);                // NW corner block
    b.add_car(20, {1.75, -11.0 + b.jitter(0.8)}, kPi / 2, cross_speed);    // hidden crossing car
    return b.scene;
}

}  // namespace

Scene generate_scene(ScenarioKind kind, std::uint64_t seed, const ScenarioParams& params) {
    if (params.frames < 1) throw std::invalid_argument("generate_scene: frames must be >= 1");
    if (!(params.dt > 0.0)) throw std::invalid_argument("generate_scene: dt must be > 0");

    SceneBuilder b(kind, seed, params);
    Scene scene;
    switch (kind) {
        case ScenarioKind::UnprotectedLeftTurn: scene = build_unprotected_left_turn(b); break;
        case ScenarioKind::Intersection: scene = build_intersection(b); break;
        case ScenarioKind::Merge: scene = build_merge(b); break;
        case ScenarioKind::HeadOn: scene = build_head_on(b); break;
        case ScenarioKind::Overtake: scene = build_overtake(b); break;
        case ScenarioKind::StraightBaseline: scene = build_straight_baseline(b); break;
        case ScenarioKind::MultiAgent: scene = build_multi_agent(b); break;
    }
    scene.validate();
    return scene;
}

namespace {

/// Slab intersection of a ray with an oriented box; returns the entry
/// distance when the ray starts outside the box and pierces it.
std::optional<double> ray_obb_entry(const Vec2& origin, const Vec2& dir, const Obb& box) {
    const Pose2D frame{box.center, box.yaw};
    const Vec2 o = world_to_ego(origin, frame);
    const double c = std::cos(-box.yaw);
    const double s = std::sin(-box.yaw);
    const Vec2 d{c * dir.x - s * dir.y, s * dir.x + c * dir.y};

    const double hx = 0.5 * box.length;
    const double hy = 0.5 * box.width;
    double t_near = -std::numeric_limits<double>::infinity();
    double t_far = std::numeric_limits<double>::infinity();

    const double os[2] = {o.x, o.y};
    const double ds[2] = {d.x, d.y};
    const double hs[2] = {hx, hy};
    for (int axis = 0; axis < 2; ++axis) {
        if (std::abs(ds[axis]) < 1e-12) {
            if (std::abs(os[axis]) > hs[axis]) return std::nullopt;
            continue;
        }
        double t1 = (-hs[axis] - os[axis]) / ds[axis];
        double t2 = (hs[axis] - os[axis]) / ds[axis];
        if (t1 > t2) std::swap(t1, t2);
        t_near = std::max(t_near, t1);
        t_far = std::min(t_far, t2);
    }
    if (t_near > t_far || t_far < 0.0) return std::nullopt;
    if (t_near <= 1e-9) return std::nullopt;  // origin inside or touching
    return t_near;
}

}  // namespace

std::vector<RayHit> raycast_hits(const Scene& scene, AgentId agent_id, int frame,
                                 const FovSpec& fov, int rays, std::uint64_t seed,
                                 double jitter) {
    fov.validate();
    if (rays < 1) throw std::invalid_argument("raycast: rays must be >= 1");
    const SceneObject* agent = scene.find(agent_id);
    if (!agent || !agent->connected) {
        throw std::invalid_argument("raycast: agent must be a connected object");
    }

    const ObjectState self = object_state_at(scene, *agent, frame);
    std::vector<std::pair<ObjectState, const SceneObject*>> others;
    for (const SceneObject& obj : scene.objects) {
        if (obj.id == agent_id) continue;
        others.emplace_back(object_state_at(scene, obj, frame), &obj);
    }

    std::mt19937_64 rng(mix_seed(seed, mix_seed(agent_id, static_cast<std::uint64_t>(frame))));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const double span = fov.full_circle ? 2.0 * kPi : fov.azimuth_end - fov.azimuth_start;
    const double start = fov.full_circle ? 0.0 : fov.azimuth_start;

    std::vector<RayHit> hits;
    hits.reserve(static_cast<std::size_t>(rays));
    for (int i = 0; i < rays; ++i) {
        const double theta = start + (i + 0.5) * span / rays;
        const Vec2 dir{std::cos(theta), std::sin(theta)};

        double best_t = std::numeric_limits<double>::infinity();
        const SceneObject* best_obj = nullptr;
        double best_z0 = 0.0, best_z1 = 0.0;
        for (const auto& [state, obj] : others) {
            const auto t = ray_obb_entry(self.position, dir, state.box);
            if (t && *t <= fov.max_range && *t < best_t) {
                best_t = *t;
                best_obj = obj;
                best_z0 = obj->z0;
                best_z1 = obj->z1;
            }
        }
        if (!best_obj) continue;

        const double t = std::max(0.05, best_t + jitter * (2.0 * unit(rng) - 1.0));
        const double z = best_z0 + unit(rng) * (best_z1 - best_z0);
        hits.push_back({{self.position.x + t * dir.x, self.position.y + t * dir.y, z},
                        best_obj->id,
                        t});
    }
    return hits;
}

std::vector<Point3> raycast_points(const Scene& scene, AgentId agent_id, int frame,
                                   const FovSpec& fov, int rays, std::uint64_t seed,
                                   double jitter) {
    std::vector<Point3> points;
    for (const RayHit& hit : raycast_hits(scene, agent_id, frame, fov, rays, seed, jitter)) {
        points.push_back(hit.point);
    }
    return points;
}

std::string scene_to_json(const Scene& scene) {
    ordered_json j;
    j["name"] = scene.name;
    j["dt"] = scene.dt;
    j["frames"] = scene.frames;
    j["ego_id"] = scene.ego_id;
    j["connected_ids"] = scene.connected_ids;
    j["intersections"] = ordered_json::array();
    for (const Vec2& q : scene.intersections) j["intersections"].push_back({q.x, q.y});
    j["ego_path"] = ordered_json::array();
    for (const Vec2& p : scene.ego_path) j["ego_path"].push_back({p.x, p.y});
    j["objects"] = ordered_json::array();
    for (const SceneObject& o : scene.objects) {
        ordered_json jo;
        jo["id"] = o.id;
        jo["length"] = o.length;
        jo["width"] = o.width;
        jo["z0"] = o.z0;
        jo["z1"] = o.z1;
        jo["connected"] = o.connected;
        jo["script"] = ordered_json::array();
        for (const Waypoint& w : o.script) jo["script"].push_back({w.x, w.y, w.yaw});
        j["objects"].push_back(std::move(jo));
    }
    return j.dump(2) + "\n";
}

Scene scene_from_json(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("scene: invalid JSON: ") + e.what());
    }
    try {
        Scene scene;
        scene.name = j.at("name").get<std::string>();
        scene.dt = j.at("dt").get<double>();
        scene.frames = j.at("frames").get<int>();
        scene.ego_id = j.at("ego_id").get<AgentId>();
        scene.connected_ids = j.at("connected_ids").get<std::vector<AgentId>>();
        for (const auto& q : j.at("intersections")) {
            scene.intersections.push_back({q.at(0).get<double>(), q.at(1).get<double>()});
        }
        for (const auto& p : j.at("ego_path")) {
            scene.ego_path.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        }
        for (const auto& jo : j.at("objects")) {
            SceneObject o;
            o.id = jo.at("id").get<AgentId>();
            o.length = jo.at("length").get<double>();
            o.width = jo.at("width").get<double>();
            o.z0 = jo.at("z0").get<double>();
            o.z1 = jo.at("z1").get<double>();
            o.connected = jo.at("connected").get<bool>();
            for (const auto& w : jo.at("script")) {
                o.script.push_back(
                    {w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<double>()});
            }
            scene.objects.push_back(std::move(o));
        }
        scene.validate();
        return scene;
    } catch (const ordered_json::exception& e) {
        throw ConfigError(std::string("scene: schema error: ") + e.what());
    }
}

void save_scene(const Scene& scene, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("scene: cannot write " + path);
    out << scene_to_json(scene);
}

Scene load_scene(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("scene: cannot read " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return scene_from_json(buffer.str());
}

}  // namespace sracp
