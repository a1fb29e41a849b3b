#include "sracp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sracp/errors.hpp"

namespace sracp {

using ordered_json = nlohmann::ordered_json;

void MatchConfig::validate() const {
    for (double theta : iou_thresholds) {
        if (!(theta > 0.0 && theta <= 1.0)) {
            throw ConfigError("eval: iou thresholds must lie in (0, 1]");
        }
    }
    for (double tau : risk_thresholds) {
        if (!(tau >= 0.0 && tau < 1.0)) {
            throw ConfigError("eval: risk thresholds must lie in [0, 1)");
        }
    }
}

namespace {

std::vector<Vec2> box_corners(const Vec2& center, double length, double width, double yaw) {
    const double c = std::cos(yaw);
    const double s = std::sin(yaw);
    const double hl = 0.5 * length;
    const double hw = 0.5 * width;
    std::vector<Vec2> corners;
    for (const auto& [dx, dy] :
         {std::pair{hl, hw}, std::pair{-hl, hw}, std::pair{-hl, -hw}, std::pair{hl, -hw}}) {
        corners.push_back({center.x + c * dx - s * dy, center.y + s * dx + c * dy});
    }
    return corners;
}

double polygon_area(const std::vector<Vec2>& poly) {
    double area = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % poly.size()];
        area += a.x * b.y - b.x * a.y;
    }
    return 0.5 * std::abs(area);
}

/// Sutherland-Hodgman clip of `poly` against the half-plane left of (a, b).
std::vector<Vec2> clip_edge(const std::vector<Vec2>& poly, const Vec2& a, const Vec2& b) {
    std::vector<Vec2> out;
    const auto side = [&](const Vec2& p) {
        return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    };
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2& cur = poly[i];
        const Vec2& nxt = poly[(i + 1) % poly.size()];
        const double sc = side(cur);
        const double sn = side(nxt);
        if (sc >= 0.0) out.push_back(cur);
        if ((sc > 0.0 && sn < 0.0) || (sc < 0.0 && sn > 0.0)) {
            const double t = sc / (sc - sn);
            out.push_back({cur.x + t * (nxt.x - cur.x), cur.y + t * (nxt.y - cur.y)});
        }
    }
    return out;
}

double intersection_area(std::vector<Vec2> subject, const std::vector<Vec2>& clip) {
    for (std::size_t i = 0; i < clip.size() && !subject.empty(); ++i) {
        subject = clip_edge(subject, clip[i], clip[(i + 1) % clip.size()]);
    }
    if (subject.size() < 3) return 0.0;
    return polygon_area(subject);
}

double iou_corners(const std::vector<Vec2>& a, const std::vector<Vec2>& b, double area_a,
                   double area_b) {
    const double inter = intersection_area(a, b);
    const double uni = area_a + area_b - inter;
    if (uni <= 0.0) return 0.0;
    return std::min(1.0, std::max(0.0, inter / uni));
}

}  // namespace

double box_iou(const DetectionBox& a, const DetectionBox& b) {
    const auto ca = box_corners(a.center, a.length, a.width, a.yaw);
    const auto cb = box_corners(b.center, b.length, b.width, b.yaw);
    return iou_corners(ca, cb, a.length * a.width, b.length * b.width);
}

double box_iou(const DetectionBox& a, const Obb& b) {
    const auto ca = box_corners(a.center, a.length, a.width, a.yaw);
    const auto cb = box_corners(b.center, b.length, b.width, b.yaw);
    return iou_corners(ca, cb, a.length * a.width, b.length * b.width);
}

namespace {

struct ScoredOutcome {
    double score = 0.0;
    bool tp = false;
};

/// Greedy score-descending matching of one instance. Ground truth below the
/// risk threshold is "ignored": it cannot make a TP and detections matching
/// only ignored boxes are dropped from the ranking.
void match_instance(const EvalInstance& inst, double theta, double tau,
                    std::vector<ScoredOutcome>& pooled, std::uint64_t& total_included) {
    std::vector<bool> included(inst.ground_truth.size());
    for (std::size_t g = 0; g < inst.ground_truth.size(); ++g) {
        included[g] = inst.ground_truth[g].risk > tau;
        if (included[g]) ++total_included;
    }

    std::vector<std::size_t> order(inst.detections.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return inst.detections[a].score > inst.detections[b].score;
    });

    std::vector<bool> used(inst.ground_truth.size(), false);
    for (std::size_t i : order) {
        const DetectionBox& det = inst.detections[i];
        double best_iou = theta;
        std::ptrdiff_t best_g = -1;
        bool hits_ignored = false;
        for (std::size_t g = 0; g < inst.ground_truth.size(); ++g) {
            const double iou = box_iou(det, inst.ground_truth[g].box);
            if (iou <= theta) continue;
            if (included[g]) {
                if (!used[g] && iou > best_iou) {
                    best_iou = iou;
                    best_g = static_cast<std::ptrdiff_t>(g);
                }
            } else {
                hits_ignored = true;
            }
        }
        if (best_g >= 0) {
            used[static_cast<std::size_t>(best_g)] = true;
            pooled.push_back({det.score, true});
        } else if (!hits_ignored) {
            pooled.push_back({det.score, false});
        }
        // Detections overlapping only ignored ground truth leave no trace.
    }
}

/// All-point interpolated area under the pooled precision-recall curve.
double ap_from_outcomes(std::vector<ScoredOutcome>& pooled, std::uint64_t total_included) {
    if (total_included == 0) return 0.0;
    std::stable_sort(pooled.begin(), pooled.end(),
                     [](const ScoredOutcome& a, const ScoredOutcome& b) { return a.score > b.score; });

    std::vector<double> precision, recall;
    std::uint64_t tp = 0, fp = 0;
    for (const ScoredOutcome& o : pooled) {
        o.tp ? ++tp : ++fp;
        precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
        recall.push_back(static_cast<double>(tp) / static_cast<double>(total_included));
    }

    // p_interp(r) = max precision at recall >= r.
    for (std::size_t i = precision.size(); i-- > 1;) {
        precision[i - 1] = std::max(precision[i - 1], precision[i]);
    }
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < precision.size(); ++i) {
        ap += (recall[i] - prev_recall) * precision[i];
        prev_recall = recall[i];
    }
    return ap;
}

double pooled_ap(std::span<const EvalInstance> instances, double theta, double tau,
                 std::uint64_t& total_included) {
    std::vector<ScoredOutcome> pooled;
    total_included = 0;
    for (const EvalInstance& inst : instances) {
        match_instance(inst, theta, tau, pooled, total_included);
    }
    return ap_from_outcomes(pooled, total_included);
}

}  // namespace

double average_precision(const std::vector<DetectionBox>& detections,
                         const std::vector<GtObject>& ground_truth, double theta) {
    const EvalInstance inst{detections, ground_truth};
    return average_precision_pooled(std::span(&inst, 1), theta);
}

double average_precision_pooled(std::span<const EvalInstance> instances, double theta) {
    std::uint64_t total = 0;
    return pooled_ap(instances, theta, -1.0, total);  // risk > -1 keeps everything
}

std::optional<double> risk_ap(const std::vector<DetectionBox>& detections,
                              const std::vector<GtObject>& ground_truth, double theta,
                              double tau) {
    const EvalInstance inst{detections, ground_truth};
    return risk_ap_pooled(std::span(&inst, 1), theta, tau);
}

std::optional<double> risk_ap_pooled(std::span<const EvalInstance> instances, double theta,
                                     double tau) {
    std::uint64_t total = 0;
    const double ap = pooled_ap(instances, theta, tau, total);
    if (total == 0) return std::nullopt;
    return ap;
}

std::vector<GtObject> ground_truth_for(const Scene& scene, int frame, const GridSpec& grid,
                                       const RiskWeights& weights) {
    const ObjectState ego = object_state_at(scene, scene.ego_id, frame);
    std::vector<ObjectState> others;
    for (const SceneObject& obj : scene.objects) {
        if (obj.id == scene.ego_id) continue;
        others.push_back(object_state_at(scene, obj, frame));
    }

    std::vector<GtObject> gts;
    for (const ObjectState& state : others) {
        const Vec2 rel = state.position - ego.position;
        if (rel.x < grid.x_min || rel.x > grid.x_max || rel.y < grid.y_min ||
            rel.y > grid.y_max) {
            continue;
        }
        GtObject gt;
        gt.id = state.id;
        gt.box = state.box;
        gt.risk = object_risk(state, ego, others, scene.intersections, weights);
        gts.push_back(gt);
    }
    return gts;
}

std::vector<EvalInstance> instances_from_run(const Scene& scene, const RunLog& log,
                                             const GridSpec& grid, const RiskWeights& weights) {
    std::vector<EvalInstance> instances;
    for (int frame = 0; frame < log.frames; ++frame) {
        EvalInstance inst;
        inst.detections = log.ego_detections(scene.ego_id, frame);
        inst.ground_truth = ground_truth_for(scene, frame, grid, weights);
        instances.push_back(std::move(inst));
    }
    return instances;
}

namespace {

std::string format_double(double v) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.9g", v);
    return buffer;
}

}  // namespace

std::string report_to_csv(const EvalReport& report) {
    std::ostringstream out;
    out << "policy,budget_bytes,theta,tau,ap,bytes_per_frame,bpk\n";
    for (const EvalRow& row : report.rows) {
        out << row.policy << ',' << row.budget_bytes << ',' << format_double(row.theta) << ','
            << format_double(row.tau) << ',' << (row.ap ? format_double(*row.ap) : "") << ','
            << format_double(row.bytes_per_frame) << ','
            << (row.bpk ? format_double(*row.bpk) : "") << "\n";
    }
    return out.str();
}

std::string report_to_json(const EvalReport& report) {
    ordered_json rows = ordered_json::array();
    for (const EvalRow& row : report.rows) {
        ordered_json j;
        j["policy"] = row.policy;
        j["budget_bytes"] = row.budget_bytes;
        j["theta"] = row.theta;
        j["tau"] = row.tau;
        j["ap"] = row.ap ? ordered_json(*row.ap) : ordered_json(nullptr);
        j["bytes_per_frame"] = row.bytes_per_frame;
        j["frames"] = row.frames;
        j["bpk"] = row.bpk ? ordered_json(*row.bpk) : ordered_json(nullptr);
        rows.push_back(std::move(j));
    }
    ordered_json doc;
    doc["rows"] = std::move(rows);
    return doc.dump(2) + "\n";
}

namespace {

struct PooledRun {
    std::vector<EvalInstance> instances;
    std::uint64_t bytes = 0;
    std::uint64_t frames = 0;
};

SimConfig config_for(const SimConfig& base, const CommPolicy& policy, std::uint64_t budget) {
    SimConfig config = base;
    config.policy = policy;
    config.budget.budget_bytes = budget;
    return config;
}

}  // namespace

EvalReport sweep_p1(std::span<const Scene> scenes, std::span<const CommPolicy> policies,
                    std::span<const std::uint64_t> budgets, const SimConfig& base,
                    const MatchConfig& match) {
    match.validate();
    for (std::uint64_t b : budgets) {
        if (b == 0) throw ConfigError("sweep: budgets must be positive");
    }

    // Always include the no-cooperation bound; it anchors bpk.
    std::vector<CommPolicy> all_policies(policies.begin(), policies.end());
    if (std::none_of(all_policies.begin(), all_policies.end(), [](const CommPolicy& p) {
            return p.kind == CommPolicy::Kind::LowerBound;
        })) {
        CommPolicy lower;
        lower.kind = CommPolicy::Kind::LowerBound;
        all_policies.push_back(lower);
    }

    std::map<std::pair<std::string, std::uint64_t>, PooledRun> pooled;
    for (const Scene& scene : scenes) {
        SceneSensing sensing(scene, base.sensing, base.weights, base.seed);
        for (const CommPolicy& policy : all_policies) {
            for (std::uint64_t budget : budgets) {
                const SimConfig config = config_for(base, policy, budget);
                const RunLog log = run_scene(scene, config, &sensing);
                PooledRun& agg = pooled[{policy.name(), budget}];
                auto instances = instances_from_run(scene, log, base.sensing.grid, base.weights);
                agg.instances.insert(agg.instances.end(),
                                     std::make_move_iterator(instances.begin()),
                                     std::make_move_iterator(instances.end()));
                agg.bytes += log.total_bytes();
                agg.frames += static_cast<std::uint64_t>(log.frames);
            }
        }
    }

    EvalReport report;
    for (const CommPolicy& policy : all_policies) {
        for (std::uint64_t budget : budgets) {
            const PooledRun& agg = pooled.at({policy.name(), budget});
            const PooledRun& lower = pooled.at({"lower", budget});
            const double bytes_pf =
                agg.frames ? static_cast<double>(agg.bytes) / static_cast<double>(agg.frames) : 0.0;
            const double lower_pf =
                lower.frames ? static_cast<double>(lower.bytes) / static_cast<double>(lower.frames)
                             : 0.0;
            for (double theta : match.iou_thresholds) {
                for (double tau : match.risk_thresholds) {
                    EvalRow row;
                    row.policy = policy.name();
                    row.budget_bytes = budget;
                    row.theta = theta;
                    row.tau = tau;
                    row.ap = risk_ap_pooled(agg.instances, theta, tau);
                    row.bytes_per_frame = bytes_pf;
                    row.frames = agg.frames;
                    if (policy.kind != CommPolicy::Kind::LowerBound && row.ap) {
                        const auto lower_ap = risk_ap_pooled(lower.instances, theta, tau);
                        const double delta_kb = (bytes_pf - lower_pf) / 1024.0;
                        if (lower_ap && delta_kb > 0.0) {
                            row.bpk = (*row.ap - *lower_ap) / delta_kb;
                        }
                    }
                    report.rows.push_back(std::move(row));
                }
            }
        }
    }
    return report;
}

namespace {

std::optional<double> suite_risk_ap(std::span<const Scene> scenes, const CommPolicy& policy,
                                    std::uint64_t budget, const P2Target& target,
                                    const SimConfig& base) {
    std::vector<EvalInstance> instances;
    for (const Scene& scene : scenes) {
        SceneSensing sensing(scene, base.sensing, base.weights, base.seed);
        const RunLog log = run_scene(scene, config_for(base, policy, budget), &sensing);
        auto scene_instances = instances_from_run(scene, log, base.sensing.grid, base.weights);
        instances.insert(instances.end(), std::make_move_iterator(scene_instances.begin()),
                         std::make_move_iterator(scene_instances.end()));
    }
    return risk_ap_pooled(instances, target.theta, target.tau);
}

}  // namespace

std::optional<std::uint64_t> min_bytes_p2(std::span<const Scene> scenes,
                                          const CommPolicy& policy, const P2Target& target,
                                          const SimConfig& base) {
    if (!(target.target_ap > 0.0 && target.target_ap <= 1.0)) {
        throw ConfigError("p2: target ap must lie in (0, 1]");
    }
    constexpr std::uint64_t kGranularity = 64;
    constexpr std::uint64_t kCeiling = 64 * 1024;

    const auto meets = [&](std::uint64_t budget) {
        const auto ap = suite_risk_ap(scenes, policy, budget, target, base);
        return ap && *ap >= target.target_ap;
    };

    if (!meets(kCeiling)) return std::nullopt;

    std::uint64_t lo = 1;  // in units of 64 bytes
    std::uint64_t hi = kCeiling / kGranularity;
    if (meets(kGranularity)) return kGranularity;
    // Invariant: lo fails, hi meets.
    while (hi - lo > 1) {
        const std::uint64_t mid = lo + (hi - lo) / 2;
        if (meets(mid * kGranularity)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return hi * kGranularity;
}

std::optional<double> frames_to_target(std::span<const Scene> scenes, const CommPolicy& policy,
                                       std::uint64_t budget_bytes, const P2Target& target,
                                       const SimConfig& base) {
    double total = 0.0;
    std::uint64_t reached = 0;
    for (const Scene& scene : scenes) {
        SceneSensing sensing(scene, base.sensing, base.weights, base.seed);
        const RunLog log = run_scene(scene, config_for(base, policy, budget_bytes), &sensing);
        const auto instances = instances_from_run(scene, log, base.sensing.grid, base.weights);
        for (std::size_t f = 0; f < instances.size(); ++f) {
            const auto ap = risk_ap_pooled(std::span(instances.data(), f + 1), target.theta,
                                           target.tau);
            if (ap && *ap >= target.target_ap) {
                total += static_cast<double>(f);
                ++reached;
                break;
            }
        }
    }
    if (reached == 0) return std::nullopt;
    return total / static_cast<double>(reached);
}

}  // namespace sracp
