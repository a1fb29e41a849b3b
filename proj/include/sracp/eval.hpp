#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sracp/fusion.hpp"
#include "sracp/scenario.hpp"
#include "sracp/sim.hpp"

namespace sracp {

struct MatchConfig {
    std::vector<double> iou_thresholds{0.3, 0.5, 0.7};
    std::vector<double> risk_thresholds{0.2, 0.3, 0.4};

    void validate() const;
};

/// Ground-truth object with its generated risk label.
struct GtObject {
    AgentId id = 0;
    Obb box{};
    double risk = 0.0;
};

/// One evaluation unit: the ego's detections and the ground truth of a
/// single frame.
struct EvalInstance {
    std::vector<DetectionBox> detections;
    std::vector<GtObject> ground_truth;
};

/// BEV IoU between two (possibly rotated) boxes via convex polygon clipping.
double box_iou(const DetectionBox& a, const DetectionBox& b);
double box_iou(const DetectionBox& a, const Obb& b);

/// All-point interpolated average precision with greedy score-descending
/// matching; a detection matches at most one ground-truth box at IoU
/// strictly above theta. Empty ground truth yields 0.
double average_precision(const std::vector<DetectionBox>& detections,
                         const std::vector<GtObject>& ground_truth, double theta);
double average_precision_pooled(std::span<const EvalInstance> instances, double theta);

/// AP restricted to ground truth with risk strictly above tau. Detections
/// matching excluded ground truth are ignored (neither TP nor FP). Returns
/// nullopt when the filtered subset is empty.
std::optional<double> risk_ap(const std::vector<DetectionBox>& detections,
                              const std::vector<GtObject>& ground_truth, double theta,
                              double tau);
std::optional<double> risk_ap_pooled(std::span<const EvalInstance> instances, double theta,
                                     double tau);

/// Ground truth of one frame as seen from the scene ego: every non-ego
/// object whose center falls inside the ego-relative grid extent, with risk
/// labels computed against the ego state.
std::vector<GtObject> ground_truth_for(const Scene& scene, int frame, const GridSpec& grid,
                                       const RiskWeights& weights);

/// Extracts the ego's per-frame instances from a finished run.
std::vector<EvalInstance> instances_from_run(const Scene& scene, const RunLog& log,
                                             const GridSpec& grid, const RiskWeights& weights);

struct EvalRow {
    std::string policy;
    std::uint64_t budget_bytes = 0;
    double theta = 0.0;
    double tau = 0.0;
    std::optional<double> ap;
    double bytes_per_frame = 0.0;
    std::uint64_t frames = 0;
    std::optional<double> bpk;  // delta Risk-AP per KB vs the no-cooperation bound
};

struct EvalReport {
    std::vector<EvalRow> rows;
};

/// CSV with columns policy,budget_bytes,theta,tau,ap,bytes_per_frame,bpk.
std::string report_to_csv(const EvalReport& report);
std::string report_to_json(const EvalReport& report);

/// P1 protocol: run every (policy, budget) over the scene suite and report
/// pooled Risk-AP per (theta, tau), mean bytes per frame, and bpk against
/// the LowerBound rows at the same budget.
EvalReport sweep_p1(std::span<const Scene> scenes, std::span<const CommPolicy> policies,
                    std::span<const std::uint64_t> budgets, const SimConfig& base,
                    const MatchConfig& match);

struct P2Target {
    double theta = 0.3;
    double tau = 0.2;
    double target_ap = 0.5;
};

/// P2 protocol: least budget (64-byte granularity, 64 KB ceiling) whose
/// pooled Risk-AP meets the target; nullopt when unreachable.
std::optional<std::uint64_t> min_bytes_p2(std::span<const Scene> scenes,
                                          const CommPolicy& policy, const P2Target& target,
                                          const SimConfig& base);

/// Frames until the running pooled Risk-AP of a scene first meets the
/// target, averaged over the scenes that reach it at the given budget.
std::optional<double> frames_to_target(std::span<const Scene> scenes, const CommPolicy& policy,
                                       std::uint64_t budget_bytes, const P2Target& target,
                                       const SimConfig& base);

}  // namespace sracp
