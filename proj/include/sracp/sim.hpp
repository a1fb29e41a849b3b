#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sracp/bev.hpp"
#include "sracp/fusion.hpp"
#include "sracp/messages.hpp"
#include "sracp/scenario.hpp"
#include "sracp/selection.hpp"

namespace sracp {

/// Communication policy run by the simulator. SRACP is the handshake
/// protocol; the others are the always-on baselines.
struct CommPolicy {
    enum class Kind { SRACP, UpperBound, LowerBound, FixedNeighborEqual, RandomCell };

    Kind kind = Kind::SRACP;
    GateMode gate = GateMode::Union;  // SRACP only
    double alpha = 0.5;               // SRACP only
    std::uint64_t seed = 0;           // RandomCell / FixedNeighborEqual sampling

    std::string name() const;
    static std::optional<CommPolicy> parse(const std::string& name);
};

/// Sensing pipeline parameters shared by every agent.
struct SensingConfig {
    GridSpec grid{};
    FovSpec fov{};
    RaycastParams ray{};
    int rays = 720;
    int kernel_radius = 0;
    double jitter = 0.05;
    double tau_occ = 0.5;
    int temporal_frames = 3;  // K_t
    double tau_t = 0.5;
};

struct SimConfig {
    SensingConfig sensing{};
    RiskWeights weights{};
    BudgetSpec budget{};
    CommPolicy policy{};
    double comm_radius = 50.0;  // l_c
    double tau_r = 0.45;
    double occupancy_threshold = 0.3;
    int min_cells = 2;
    std::uint64_t seed = 7;
    int frames = 0;  // 0 = scene duration

    void validate() const;
};

/// Everything one agent computed about one frame from its own sensors.
struct AgentSensing {
    ObjectState self{};
    OccupancyField occupancy{};
    BlindZoneMask instant{};
    BlindZoneMask stabilized{};
    std::vector<ObjectState> visible;            // objects with ray hits this frame
    std::map<AgentId, ObjectState> last_known;   // per-object latest observed state
    RiskMap risk_raster{};                       // self-relative risk over visible objects
    ScalarField trigger_prior{};                 // max(last-known raster, intersection decay)
};

/// Memoized, policy-independent sensing for one scene. Safe to share across
/// simulator runs with the same sensing config and seed; not thread-safe.
class SceneSensing {
  public:
    SceneSensing(Scene scene, SensingConfig sensing, RiskWeights weights, std::uint64_t seed);

    const AgentSensing& get(AgentId agent, int frame);
    const Scene& scene() const { return scene_; }
    const SensingConfig& sensing_config() const { return sensing_; }
    const RiskWeights& weights() const { return weights_; }
    std::uint64_t seed() const { return seed_; }

  private:
    void compute(AgentId agent, int frame);

    Scene scene_;
    SensingConfig sensing_;
    RiskWeights weights_;
    std::uint64_t seed_;
    std::map<AgentId, std::vector<AgentSensing>> per_agent_;
};

struct CooperationNeed {
    bool needed = false;
    std::vector<CellIndex> risky_cells;
};

/// True iff some cell is both inside the stabilized blind zone and has risk
/// strictly above tau_r; returns those cells.
CooperationNeed needs_cooperation(const BlindZoneMask& blind, const ScalarField& risk,
                                  double tau_r);

/// Picks the beacon sender whose coverage (complement of its blind summary)
/// covers the most risky cells; ties go to the smaller id, and agents that
/// cover nothing are never selected.
std::optional<AgentId> select_partner(const std::vector<CellIndex>& risky_cells,
                                      const GridSpec& grid, const Vec2& requester_position,
                                      const std::vector<CoverageBeacon>& beacons);

/// Responder-side view used to serve one request.
struct ResponderContext {
    AgentId id = 0;
    int frame = 0;
    const AgentSensing* sensing = nullptr;
    ObjectState requester{};           // position/velocity from beacon + request
    std::vector<Vec2> intersections;
    RiskWeights weights{};
    int receiver_neighbor_count = 1;   // |W_e| of the receiver, for FixedNeighborEqual
};

/// Builds the gain map from the request and the responder's local view,
/// applies the policy's selection, and serializes within budget (UpperBound
/// is exempt from the cap). The returned payload is always well-formed, and
/// header-only when nothing is affordable or selectable.
CPResponse handle_request(const ResponderContext& ctx, const CPRequest& request,
                          const BudgetSpec& budget, const CommPolicy& policy);

struct FrameRecord {
    int frame = 0;
    AgentId agent = 0;
    std::string policy;
    std::uint64_t bytes_beacon = 0;
    std::uint64_t bytes_payload = 0;  // payload bytes sent as responder
    std::uint32_t requests = 0;       // CP requests sent
    std::uint32_t responses = 0;      // payload messages sent
    std::vector<DetectionBox> detections;  // world frame
};

struct LinkTransfer {
    int frame = 0;
    AgentId from = 0;
    AgentId to = 0;
    std::uint64_t payload_bytes = 0;
};

struct RunLog {
    std::string scene;
    std::string policy;
    std::uint64_t budget_bytes = 0;
    int frames = 0;
    std::vector<FrameRecord> records;
    std::vector<LinkTransfer> links;

    std::uint64_t total_bytes() const;
    std::vector<DetectionBox> ego_detections(AgentId ego, int frame) const;
};

/// Runs the full per-frame pipeline (kinematics, sensing, beacons, trigger,
/// handshake, fusion, decoding, logging). Deterministic for a fixed
/// (scene, config, seed). A shared SceneSensing may be passed to reuse
/// sensing across runs; it must match the scene, sensing config, and seed.
RunLog run_scene(const Scene& scene, const SimConfig& config,
                 SceneSensing* shared_sensing = nullptr);

/// Newline-delimited JSON records:
/// {frame, agent, policy, bytes_beacon, bytes_payload, requests, responses,
///  detections}.
std::string run_log_to_ndjson(const RunLog& log);
std::vector<FrameRecord> frame_records_from_ndjson(const std::string& text);

}  // namespace sracp
