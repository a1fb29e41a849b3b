#include "sracp/sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sracp/errors.hpp"
#include "sracp/payload.hpp"

namespace sracp {

using ordered_json = nlohmann::ordered_json;

std::string CommPolicy::name() const {
    switch (kind) {
        case Kind::LowerBound: return "lower";
        case Kind::UpperBound: return "upper";
        case Kind::FixedNeighborEqual: return "fixed";
        case Kind::RandomCell: return "random";
        case Kind::SRACP: return "sracp-" + to_string(gate);
    }
    return "?";
}

std::optional<CommPolicy> CommPolicy::parse(const std::string& name) {
    CommPolicy policy;
    if (name == "lower") {
        policy.kind = Kind::LowerBound;
    } else if (name == "upper") {
        policy.kind = Kind::UpperBound;
    } else if (name == "fixed") {
        policy.kind = Kind::FixedNeighborEqual;
    } else if (name == "random") {
        policy.kind = Kind::RandomCell;
    } else if (name == "sracp" || name == "sracp-union") {
        policy.kind = Kind::SRACP;
        policy.gate = GateMode::Union;
    } else if (name == "sracp-s") {
        policy.kind = Kind::SRACP;
        policy.gate = GateMode::SpatialOnly;
    } else if (name == "sracp-r") {
        policy.kind = Kind::SRACP;
        policy.gate = GateMode::RiskOnly;
    } else {
        return std::nullopt;
    }
    return policy;
}

void SimConfig::validate() const {
    sensing.grid.validate();
    sensing.fov.validate();
    sensing.ray.validate(sensing.grid.cell_size);
    if (sensing.rays < 1) throw ConfigError("sim: rays must be >= 1");
    if (sensing.kernel_radius < 0) throw ConfigError("sim: kernel_radius must be >= 0");
    if (!(sensing.tau_occ > 0.0 && sensing.tau_occ < 1.0)) {
        throw ConfigError("sim: tau_occ must lie in (0, 1)");
    }
    if (sensing.temporal_frames < 1) throw ConfigError("sim: temporal_frames must be >= 1");
    if (!(sensing.tau_t > 0.0 && sensing.tau_t < 1.0)) {
        throw ConfigError("sim: tau_t must lie in (0, 1)");
    }
    weights.validate();
    budget.validate();
    if (!(comm_radius > 0.0)) throw ConfigError("sim: comm_radius must be > 0");
    if (!(tau_r > 0.0 && tau_r < 1.0)) throw ConfigError("sim: tau_r must lie in (0, 1)");
    if (!(occupancy_threshold > 0.0 && occupancy_threshold < 1.0)) {
        throw ConfigError("sim: occupancy_threshold must lie in (0, 1)");
    }
    if (min_cells < 1) throw ConfigError("sim: min_cells must be >= 1");
    if (!(policy.alpha >= 0.0 && policy.alpha <= 1.0)) {
        throw ConfigError("sim: policy alpha must lie in [0, 1]");
    }
    if (frames < 0) throw ConfigError("sim: frames must be >= 0");
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

}  // namespace

SceneSensing::SceneSensing(Scene scene, SensingConfig sensing, RiskWeights weights,
                           std::uint64_t seed)
    : scene_(std::move(scene)), sensing_(std::move(sensing)), weights_(weights), seed_(seed) {
    scene_.validate();
}

const AgentSensing& SceneSensing::get(AgentId agent, int frame) {
    auto& history = per_agent_[agent];
    while (static_cast<int>(history.size()) <= frame) {
        compute(agent, static_cast<int>(history.size()));
    }
    return history[static_cast<std::size_t>(frame)];
}

void SceneSensing::compute(AgentId agent, int frame) {
    AgentSensing out;
    out.self = object_state_at(scene_, agent, frame);
    const Pose2D pose{out.self.position, 0.0};

    const auto hits = raycast_hits(scene_, agent, frame, sensing_.fov, sensing_.rays,
                                   mix_seed(seed_, 0x5261794eull), sensing_.jitter);
    std::vector<Point3> points;
    points.reserve(hits.size());
    std::vector<AgentId> seen;
    for (const RayHit& h : hits) {
        points.push_back(h.point);
        if (std::find(seen.begin(), seen.end(), h.object) == seen.end()) {
            seen.push_back(h.object);
        }
    }
    std::sort(seen.begin(), seen.end());

    out.occupancy = build_occupancy(points, pose, sensing_.grid, sensing_.kernel_radius);
    out.instant = occlusion_map(out.occupancy, sensing_.fov, sensing_.ray, sensing_.tau_occ);

    // Temporal vote over the last K_t instantaneous masks.
    auto& history = per_agent_[agent];
    std::vector<MaskFrame> window;
    const int first = std::max(0, frame - sensing_.temporal_frames + 1);
    for (int f = first; f < frame; ++f) {
        const AgentSensing& past = history[static_cast<std::size_t>(f)];
        window.push_back({past.instant, Pose2D{past.self.position, 0.0}});
    }
    window.push_back({out.instant, pose});
    out.stabilized = stabilize_blind_zone(window, pose, sensing_.tau_t);

    for (AgentId id : seen) {
        out.visible.push_back(object_state_at(scene_, id, frame));
    }
    if (frame > 0) out.last_known = history.back().last_known;
    for (const ObjectState& obj : out.visible) {
        out.last_known[obj.id] = obj;
    }

    out.risk_raster =
        rasterize_risk_map(out.visible, out.self, scene_.intersections, weights_, sensing_.grid);

    std::vector<ObjectState> remembered;
    remembered.reserve(out.last_known.size());
    for (const auto& [id, state] : out.last_known) remembered.push_back(state);
    const RiskMap memory_raster = rasterize_risk_map(remembered, out.self, scene_.intersections,
                                                     weights_, sensing_.grid);

    out.trigger_prior = ScalarField(sensing_.grid);
    const std::size_t n = sensing_.grid.cell_count();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 world = sensing_.grid.cell_center(static_cast<CellIndex>(i)) +
                           out.self.position;
        const double phantom =
            intersection_risk(world, scene_.intersections, weights_.lambda_n);
        out.trigger_prior.values[i] = std::max(memory_raster.values[i], phantom);
    }

    history.push_back(std::move(out));
}

CooperationNeed needs_cooperation(const BlindZoneMask& blind, const ScalarField& risk,
                                  double tau_r) {
    if (!(blind.grid == risk.grid)) {
        throw std::invalid_argument("needs_cooperation: mismatched grids");
    }
    CooperationNeed need;
    for (std::size_t i = 0; i < blind.occluded.size(); ++i) {
        if (blind.occluded[i] && risk.values[i] > tau_r) {
            need.risky_cells.push_back(static_cast<CellIndex>(i));
        }
    }
    need.needed = !need.risky_cells.empty();
    return need;
}

std::optional<AgentId> select_partner(const std::vector<CellIndex>& risky_cells,
                                      const GridSpec& grid, const Vec2& requester_position,
                                      const std::vector<CoverageBeacon>& beacons) {
    std::optional<AgentId> best;
    std::size_t best_count = 0;
    std::vector<const CoverageBeacon*> ordered;
    for (const CoverageBeacon& b : beacons) ordered.push_back(&b);
    std::sort(ordered.begin(), ordered.end(),
              [](const CoverageBeacon* a, const CoverageBeacon* b) { return a->sender < b->sender; });

    for (const CoverageBeacon* beacon : ordered) {
        std::size_t covered = 0;
        for (CellIndex cell : risky_cells) {
            const Vec2 world = grid.cell_center(cell) + requester_position;
            const CellIndex theirs = grid.cell_at(world - beacon->position);
            if (theirs < 0) continue;  // outside the partner's raster: unknown
            if (!beacon->blind_mask[static_cast<std::size_t>(theirs)]) ++covered;
        }
        if (covered > best_count) {
            best_count = covered;
            best = beacon->sender;
        }
    }
    return best;
}

namespace {

/// Cells of the requester grid the responder can actually speak about:
/// inside the responder's raster, not blind to it, and carrying content.
struct ResponderPlanes {
    std::vector<CellIndex> map_to_responder;  // requester cell -> responder cell (-1 = none)
    std::vector<std::uint8_t> support;
    RiskMap requester_relative_risk;          // on the requester grid
};

ResponderPlanes build_responder_planes(const ResponderContext& ctx, const CPRequest& request) {
    const GridSpec& grid = ctx.sensing->occupancy.grid;
    ResponderPlanes planes;
    planes.requester_relative_risk = rasterize_risk_map(
        ctx.sensing->visible, ctx.requester, ctx.intersections, ctx.weights, grid);

    // Cells this close to the requester are its own body; echoing them back
    // would make the receiver detect itself.
    constexpr double kSelfEchoRadius = 3.8;

    // The two rasters are offset by the agents' relative position, so one
    // requester cell overlaps up to four responder cells. Taking the
    // strongest overlapping return keeps thin boundary bands connected
    // through the resampling.
    const std::size_t n = grid.cell_count();
    planes.map_to_responder.assign(n, -1);
    planes.support.assign(n, 0);
    const double half = 0.5 * grid.cell_size * (1.0 - 1e-9);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 world = grid.cell_center(static_cast<CellIndex>(i)) + request.position;
        const Vec2 local = world - ctx.sensing->self.position;
        CellIndex best = -1;
        double best_occ = -1.0;
        for (const double dx : {-half, half}) {
            for (const double dy : {-half, half}) {
                const CellIndex v = grid.cell_at({local.x + dx, local.y + dy});
                if (v < 0) continue;
                const double occ = ctx.sensing->occupancy.values[static_cast<std::size_t>(v)];
                if (occ > best_occ) {
                    best_occ = occ;
                    best = v;
                }
            }
        }
        if (best < 0) continue;
        planes.map_to_responder[i] = best;
        if ((world - request.position).norm() <= kSelfEchoRadius) continue;
        // Only cells with sensed returns carry transmittable content.
        planes.support[i] = best_occ > 0.0;
    }
    return planes;
}

FeaturePayload build_payload_cells(const ResponderContext& ctx, const ResponderPlanes& planes,
                                   const std::vector<CellIndex>& cells,
                                   std::uint32_t channels, std::uint64_t grid_hash) {
    FeaturePayload payload;
    payload.header.sender = ctx.id;
    payload.header.frame = static_cast<std::uint32_t>(ctx.frame);
    payload.header.grid_hash = grid_hash;
    payload.cells.reserve(cells.size());
    for (CellIndex u : cells) {
        const CellIndex v = planes.map_to_responder[static_cast<std::size_t>(u)];
        PayloadCell cell;
        cell.index = static_cast<std::uint32_t>(u);
        const auto features = expand_cell_features(
            ctx.sensing->occupancy.at(v),
            planes.requester_relative_risk.values[static_cast<std::size_t>(u)],
            ctx.sensing->instant.occ_prob[static_cast<std::size_t>(v)], channels);
        cell.features.resize(channels);
        for (std::uint32_t c = 0; c < channels; ++c) {
            cell.features[c] = quantize_feature(features[c]);
        }
        payload.cells.push_back(std::move(cell));
    }
    return payload;
}

std::vector<CellIndex> sample_uniform(const std::vector<CellIndex>& pool, std::uint64_t k,
                                      std::uint64_t seed) {
    if (pool.size() <= k) return pool;
    std::vector<CellIndex> shuffled = pool;
    std::mt19937_64 rng(seed);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    shuffled.resize(static_cast<std::size_t>(k));
    std::sort(shuffled.begin(), shuffled.end());
    return shuffled;
}

}  // namespace

CPResponse handle_request(const ResponderContext& ctx, const CPRequest& request,
                          const BudgetSpec& budget, const CommPolicy& policy) {
    const GridSpec& grid = ctx.sensing->occupancy.grid;
    if (request.grid_hash != grid.hash()) {
        throw ProtocolError("handle_request: grid hash mismatch");
    }

    const ResponderPlanes planes = build_responder_planes(ctx, request);
    const std::size_t n = grid.cell_count();

    std::vector<CellIndex> chosen;
    BudgetSpec encode_budget = budget;

    switch (policy.kind) {
        case CommPolicy::Kind::LowerBound:
            break;
        case CommPolicy::Kind::UpperBound: {
            for (std::size_t i = 0; i < n; ++i) {
                if (planes.support[i]) chosen.push_back(static_cast<CellIndex>(i));
            }
            // No budget: lift the cap to whatever the full support costs.
            encode_budget.budget_bytes =
                budget.header_bytes + chosen.size() * budget.cell_bytes();
            break;
        }
        case CommPolicy::Kind::RandomCell:
        case CommPolicy::Kind::FixedNeighborEqual: {
            std::vector<CellIndex> pool;
            for (std::size_t i = 0; i < n; ++i) {
                if (planes.support[i]) pool.push_back(static_cast<CellIndex>(i));
            }
            std::uint64_t k = 0;
            if (policy.kind == CommPolicy::Kind::RandomCell) {
                k = capacity_cells(budget);
            } else {
                BudgetSpec share = budget;
                share.budget_bytes =
                    budget.budget_bytes / std::max(1, ctx.receiver_neighbor_count);
                k = capacity_cells(share);
            }
            chosen = sample_uniform(
                pool, k,
                mix_seed(policy.seed, mix_seed(static_cast<std::uint64_t>(ctx.frame),
                                               mix_seed(request.requester, ctx.id))));
            break;
        }
        case CommPolicy::Kind::SRACP: {
            // g_sp carries the requester's shared occlusion probabilities,
            // g_risk the responder's own risk map rendered against the
            // requester, zeroed where the responder has nothing to send.
            ScalarField g_sp(grid), g_risk(grid);
            BlindZoneMask blind(grid);
            for (std::size_t i = 0; i < n; ++i) {
                blind.occluded[i] = request.blind_mask[i];
                blind.occ_prob[i] = dequantize_feature(request.occ_q8[i]);
                g_sp.values[i] = dequantize_feature(request.occ_q8[i]);
                if (planes.support[i]) {
                    g_risk.values[i] = planes.requester_relative_risk.values[i];
                }
            }
            const GainMap gain = compute_gain(g_sp, g_risk, blind, policy.alpha);
            chosen = select_cells(gain, capacity_cells(budget), policy.gate).selected;
            break;
        }
    }

    const FeaturePayload payload =
        build_payload_cells(ctx, planes, chosen, budget.channels, grid.hash());
    CPResponse response;
    response.responder = ctx.id;
    response.requester = request.requester;
    response.payload_bytes = encode_payload(payload, encode_budget);
    return response;
}

std::uint64_t RunLog::total_bytes() const {
    std::uint64_t total = 0;
    for (const FrameRecord& r : records) total += r.bytes_beacon + r.bytes_payload;
    return total;
}

std::vector<DetectionBox> RunLog::ego_detections(AgentId ego, int frame) const {
    for (const FrameRecord& r : records) {
        if (r.agent == ego && r.frame == frame) return r.detections;
    }
    return {};
}

RunLog run_scene(const Scene& scene, const SimConfig& config, SceneSensing* shared_sensing) {
    config.validate();
    scene.validate();

    std::unique_ptr<SceneSensing> local;
    SceneSensing* sensing = shared_sensing;
    if (!sensing) {
        local = std::make_unique<SceneSensing>(scene, config.sensing, config.weights, config.seed);
        sensing = local.get();
    }

    const GridSpec& grid = config.sensing.grid;
    const std::uint64_t grid_hash = grid.hash();
    const int frames = config.frames > 0 ? config.frames : scene.frames;

    std::vector<AgentId> agents = scene.connected_ids;
    std::sort(agents.begin(), agents.end());

    RunLog log;
    log.scene = scene.name;
    log.policy = config.policy.name();
    log.budget_bytes = config.budget.budget_bytes;
    log.frames = frames;

    for (int frame = 0; frame < frames; ++frame) {
        std::map<AgentId, const AgentSensing*> sens;
        for (AgentId a : agents) sens[a] = &sensing->get(a, frame);

        // Routine mode: beacons to everyone in communication range.
        std::map<AgentId, std::vector<std::uint8_t>> beacon_wire;
        std::map<AgentId, std::uint64_t> beacon_size;
        for (AgentId a : agents) {
            CoverageBeacon beacon;
            beacon.sender = a;
            beacon.frame = static_cast<std::uint32_t>(frame);
            beacon.position = sens[a]->self.position;
            beacon.velocity = sens[a]->self.velocity;
            beacon.blind_mask = sens[a]->stabilized.occluded;
            beacon_wire[a] = encode_beacon(beacon);
            beacon_size[a] = beacon_wire[a].size();
        }
        std::map<AgentId, std::vector<CoverageBeacon>> heard;
        for (AgentId r : agents) {
            for (AgentId s : agents) {
                if (s == r) continue;
                const double dist = (sens[s]->self.position - sens[r]->self.position).norm();
                if (dist > config.comm_radius) continue;
                heard[r].push_back(decode_beacon(beacon_wire[s], grid));
            }
        }

        std::map<AgentId, std::uint64_t> payload_sent;
        std::map<AgentId, std::uint32_t> requests_sent, responses_sent;
        std::map<AgentId, std::vector<SparsePartner>> inbox;

        auto requester_state = [&](AgentId r) {
            ObjectState state;
            state.id = r;
            state.position = sens[r]->self.position;
            state.velocity = sens[r]->self.velocity;
            return state;
        };

        auto deliver = [&](AgentId from, AgentId to, const CPResponse& response) {
            payload_sent[from] += response.payload_bytes.size();
            responses_sent[from] += 1;
            log.links.push_back({frame, from, to, response.payload_bytes.size()});
            SparsePartner partner;
            partner.payload = decode_payload(response.payload_bytes, config.budget, grid_hash);
            inbox[to].push_back(std::move(partner));
        };

        switch (config.policy.kind) {
            case CommPolicy::Kind::LowerBound:
                break;
            case CommPolicy::Kind::SRACP: {
                for (AgentId a : agents) {
                    const CooperationNeed need = needs_cooperation(
                        sens[a]->stabilized, sens[a]->trigger_prior, config.tau_r);
                    if (!need.needed) continue;
                    const auto partner = select_partner(need.risky_cells, grid,
                                                        sens[a]->self.position, heard[a]);
                    if (!partner) continue;

                    CPRequest request;
                    request.requester = a;
                    request.target = *partner;
                    request.frame = static_cast<std::uint32_t>(frame);
                    request.position = sens[a]->self.position;
                    request.grid_hash = grid_hash;
                    request.blind_mask = sens[a]->stabilized.occluded;
                    request.risk_q8.assign(grid.cell_count(), 0);
                    request.occ_q8.assign(grid.cell_count(), 0);
                    for (std::size_t i = 0; i < request.blind_mask.size(); ++i) {
                        if (!request.blind_mask[i]) continue;
                        request.risk_q8[i] = quantize_feature(sens[a]->trigger_prior.values[i]);
                        request.occ_q8[i] = quantize_feature(sens[a]->instant.occ_prob[i]);
                    }
                    const auto wire = encode_request(request);
                    const CPRequest decoded = decode_request(wire, grid);

                    ResponderContext ctx;
                    ctx.id = *partner;
                    ctx.frame = frame;
                    ctx.sensing = sens[*partner];
                    ctx.requester = requester_state(a);
                    ctx.intersections = scene.intersections;
                    ctx.weights = config.weights;
                    ctx.receiver_neighbor_count = static_cast<int>(heard[a].size());

                    requests_sent[a] += 1;
                    deliver(*partner, a, handle_request(ctx, decoded, config.budget, config.policy));
                }
                break;
            }
            case CommPolicy::Kind::UpperBound:
            case CommPolicy::Kind::RandomCell:
            case CommPolicy::Kind::FixedNeighborEqual: {
                // Always-on sharing: every in-range partner pushes to every receiver.
                for (AgentId r : agents) {
                    std::vector<AgentId> partners;
                    for (const CoverageBeacon& b : heard[r]) partners.push_back(b.sender);
                    std::sort(partners.begin(), partners.end());
                    for (AgentId s : partners) {
                        CPRequest pseudo;
                        pseudo.requester = r;
                        pseudo.target = s;
                        pseudo.frame = static_cast<std::uint32_t>(frame);
                        pseudo.position = sens[r]->self.position;
                        pseudo.grid_hash = grid_hash;
                        pseudo.blind_mask = sens[r]->stabilized.occluded;
                        pseudo.risk_q8.assign(grid.cell_count(), 0);
                        pseudo.occ_q8.assign(grid.cell_count(), 0);

                        ResponderContext ctx;
                        ctx.id = s;
                        ctx.frame = frame;
                        ctx.sensing = sens[s];
                        ctx.requester = requester_state(r);
                        ctx.intersections = scene.intersections;
                        ctx.weights = config.weights;
                        ctx.receiver_neighbor_count = static_cast<int>(partners.size());

                        deliver(s, r, handle_request(ctx, pseudo, config.budget, config.policy));
                    }
                }
                break;
            }
        }

        // Fusion and decoding on every agent, then the per-agent log record.
        for (AgentId a : agents) {
            const auto fused = fuse_sparse(sens[a]->occupancy, sens[a]->risk_raster,
                                           sens[a]->instant, config.budget.channels,
                                           inbox[a]);
            auto detections =
                decode_detection_planes(grid, fused.occupancy, fused.risk,
                                        config.occupancy_threshold, config.min_cells);
            for (DetectionBox& box : detections) {
                box.center = box.center + sens[a]->self.position;
            }

            FrameRecord record;
            record.frame = frame;
            record.agent = a;
            record.policy = log.policy;
            record.bytes_beacon = beacon_size[a];
            record.bytes_payload = payload_sent[a];
            record.requests = requests_sent[a];
            record.responses = responses_sent[a];
            record.detections = std::move(detections);
            log.records.push_back(std::move(record));
        }
    }
    return log;
}

std::string run_log_to_ndjson(const RunLog& log) {
    std::ostringstream out;
    for (const FrameRecord& r : log.records) {
        ordered_json j;
        j["frame"] = r.frame;
        j["agent"] = r.agent;
        j["policy"] = r.policy;
        j["bytes_beacon"] = r.bytes_beacon;
        j["bytes_payload"] = r.bytes_payload;
        j["requests"] = r.requests;
        j["responses"] = r.responses;
        j["detections"] = ordered_json::array();
        for (const DetectionBox& d : r.detections) {
            ordered_json jd;
            jd["cx"] = d.center.x;
            jd["cy"] = d.center.y;
            jd["length"] = d.length;
            jd["width"] = d.width;
            jd["yaw"] = d.yaw;
            jd["score"] = d.score;
            jd["risk"] = d.risk;
            j["detections"].push_back(std::move(jd));
        }
        out << j.dump() << "\n";
    }
    return out.str();
}

std::vector<FrameRecord> frame_records_from_ndjson(const std::string& text) {
    std::vector<FrameRecord> records;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("ndjson: invalid record: ") + e.what());
        }
        try {
            FrameRecord r;
            r.frame = j.at("frame").get<int>();
            r.agent = j.at("agent").get<AgentId>();
            r.policy = j.at("policy").get<std::string>();
            r.bytes_beacon = j.at("bytes_beacon").get<std::uint64_t>();
            r.bytes_payload = j.at("bytes_payload").get<std::uint64_t>();
            r.requests = j.at("requests").get<std::uint32_t>();
            r.responses = j.at("responses").get<std::uint32_t>();
            for (const auto& jd : j.at("detections")) {
                DetectionBox d;
                d.center = {jd.at("cx").get<double>(), jd.at("cy").get<double>()};
                d.length = jd.at("length").get<double>();
                d.width = jd.at("width").get<double>();
                d.yaw = jd.at("yaw").get<double>();
                d.score = jd.at("score").get<double>();
                d.risk = jd.at("risk").get<double>();
                r.detections.push_back(d);
            }
            records.push_back(std::move(r));
        } catch (const ordered_json::exception& e) {
            throw ConfigError(std::string("ndjson: schema error: ") + e.what());
        }
    }
    return records;
}

}  // namespace sracp
