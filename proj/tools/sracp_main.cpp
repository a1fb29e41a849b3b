// Command-line front end: scene generation, simulation, evaluation, and the
// P1/P2 experiment protocols.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sracp/config.hpp"
#include "sracp/errors.hpp"
#include "sracp/eval.hpp"
#include "sracp/scenario.hpp"
#include "sracp/sim.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> policy;
    std::optional<std::uint64_t> budget_bytes;
    std::optional<std::string> gate;
};

void add_override_flags(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--seed", o.seed, "Override the run seed");
    cmd->add_option("--policy", o.policy,
                    "Override the policy (lower|upper|fixed|random|sracp-s|sracp-r|sracp-union)");
    cmd->add_option("--budget-bytes", o.budget_bytes, "Override the per-link byte budget");
    cmd->add_option("--gate", o.gate, "Override the SRACP gate (s|r|union)")
        ->check(CLI::IsMember({"s", "r", "union"}));
}

void apply_overrides(sracp::RunConfig& config, const Overrides& o) {
    if (o.seed) {
        config.sim.seed = *o.seed;
        config.sim.policy.seed = *o.seed;
    }
    if (o.policy) {
        const auto policy = sracp::CommPolicy::parse(*o.policy);
        if (!policy) throw sracp::ConfigError("unknown policy: " + *o.policy);
        const auto gate = config.sim.policy.gate;
        const auto alpha = config.sim.policy.alpha;
        const auto seed = config.sim.policy.seed;
        config.sim.policy = *policy;
        if (policy->kind == sracp::CommPolicy::Kind::SRACP && *o.policy == "sracp") {
            config.sim.policy.gate = gate;
        }
        config.sim.policy.alpha = alpha;
        config.sim.policy.seed = seed;
    }
    if (o.budget_bytes) config.sim.budget.budget_bytes = *o.budget_bytes;
    if (o.gate) {
        if (*o.gate == "s") config.sim.policy.gate = sracp::GateMode::SpatialOnly;
        if (*o.gate == "r") config.sim.policy.gate = sracp::GateMode::RiskOnly;
        if (*o.gate == "union") config.sim.policy.gate = sracp::GateMode::Union;
    }
    config.validate();
}

sracp::RunConfig load_config_or_default(const std::string& path) {
    if (path.empty()) {
        auto config = sracp::default_run_config();
        config.validate();
        return config;
    }
    return sracp::load_run_config(path);
}

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw sracp::ConfigError("cannot write " + path.string());
    out << content;
}

std::string log_file_name(const std::string& scene, const std::string& policy,
                          std::uint64_t budget) {
    return scene + "__" + policy + "__b" + std::to_string(budget) + ".ndjson";
}

int cmd_scene_gen(const std::string& kind_name, std::uint64_t seed, const std::string& out_path,
                  int frames, double dt) {
    const auto kind = sracp::scenario_kind_from_string(kind_name);
    if (!kind) {
        std::cerr << "error: unknown scenario kind '" << kind_name << "' (expected one of";
        for (auto k : sracp::all_scenario_kinds()) std::cerr << " " << to_string(k);
        std::cerr << ")\n";
        return 1;
    }
    sracp::ScenarioParams params;
    params.frames = frames;
    params.dt = dt;
    const sracp::Scene scene = sracp::generate_scene(*kind, seed, params);
    sracp::save_scene(scene, out_path);
    std::cout << "wrote " << out_path << " (" << scene.objects.size() << " objects, "
              << scene.frames << " frames)\n";
    return 0;
}

int cmd_simulate(const std::string& config_path, const Overrides& overrides,
                 std::string out_dir) {
    sracp::RunConfig config = load_config_or_default(config_path);
    apply_overrides(config, overrides);
    if (!out_dir.empty()) config.output_dir = out_dir;

    const fs::path out = config.output_dir;
    fs::create_directories(out / "scenes");
    fs::create_directories(out / "logs");

    ordered_json summary;
    summary["policy"] = config.sim.policy.name();
    summary["budget_bytes"] = config.sim.budget.budget_bytes;
    summary["seed"] = config.sim.seed;
    summary["scenes"] = ordered_json::array();

    std::uint64_t total_beacon = 0, total_payload = 0, total_requests = 0, total_responses = 0;
    for (const sracp::Scene& scene : config.make_scenes()) {
        sracp::save_scene(scene, (out / "scenes" / (scene.name + ".json")).string());
        const sracp::RunLog log = sracp::run_scene(scene, config.sim);
        write_file(out / "logs" /
                       log_file_name(scene.name, log.policy, config.sim.budget.budget_bytes),
                   sracp::run_log_to_ndjson(log));

        std::uint64_t beacon = 0, payload = 0, requests = 0, responses = 0;
        for (const auto& r : log.records) {
            beacon += r.bytes_beacon;
            payload += r.bytes_payload;
            requests += r.requests;
            responses += r.responses;
        }
        ordered_json js;
        js["name"] = scene.name;
        js["frames"] = log.frames;
        js["bytes_beacon"] = beacon;
        js["bytes_payload"] = payload;
        js["requests"] = requests;
        js["responses"] = responses;
        summary["scenes"].push_back(std::move(js));
        total_beacon += beacon;
        total_payload += payload;
        total_requests += requests;
        total_responses += responses;
    }
    summary["total_bytes_beacon"] = total_beacon;
    summary["total_bytes_payload"] = total_payload;
    summary["total_requests"] = total_requests;
    summary["total_responses"] = total_responses;
    write_file(out / "summary.json", summary.dump(2) + "\n");
    std::cout << "wrote " << (out / "summary.json").string() << "\n";
    return 0;
}

struct LogGroup {
    std::string policy;
    std::uint64_t budget = 0;
    std::vector<sracp::EvalInstance> instances;
    std::uint64_t bytes = 0;
    std::uint64_t frames = 0;
};

int cmd_eval(const std::string& logs_dir, const std::string& config_path, std::string out_dir) {
    const sracp::RunConfig config = load_config_or_default(config_path);
    const fs::path root = logs_dir;
    const fs::path scenes_dir = root / "scenes";
    const fs::path log_files = root / "logs";
    if (!fs::is_directory(log_files)) {
        std::cerr << "error: no data: " << log_files.string() << " is not a directory\n";
        return 1;
    }

    std::map<std::pair<std::string, std::uint64_t>, LogGroup> groups;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(log_files)) {
        if (entry.path().extension() == ".ndjson") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        std::cerr << "error: no data: no .ndjson logs under " << log_files.string() << "\n";
        return 1;
    }

    for (const fs::path& file : files) {
        // <scene>__<policy>__b<budget>.ndjson
        const std::string stem = file.stem().string();
        const auto p1 = stem.find("__");
        const auto p2 = stem.rfind("__b");
        if (p1 == std::string::npos || p2 == std::string::npos || p2 <= p1) {
            std::cerr << "error: malformed log name: " << file.filename().string() << "\n";
            return 1;
        }
        const std::string scene_name = stem.substr(0, p1);
        const std::string policy = stem.substr(p1 + 2, p2 - p1 - 2);
        const std::uint64_t budget = std::stoull(stem.substr(p2 + 3));

        const sracp::Scene scene =
            sracp::load_scene((scenes_dir / (scene_name + ".json")).string());
        std::ifstream in(file, std::ios::binary);
        std::ostringstream buffer;
        buffer << in.rdbuf();
        const auto records = sracp::frame_records_from_ndjson(buffer.str());
        if (records.empty()) {
            std::cerr << "error: empty log: " << file.filename().string() << "\n";
            return 1;
        }

        int frames = 0;
        for (const auto& r : records) frames = std::max(frames, r.frame + 1);

        LogGroup& group = groups[{policy, budget}];
        group.policy = policy;
        group.budget = budget;
        group.frames += static_cast<std::uint64_t>(frames);
        for (const auto& r : records) group.bytes += r.bytes_beacon + r.bytes_payload;
        for (int frame = 0; frame < frames; ++frame) {
            sracp::EvalInstance inst;
            for (const auto& r : records) {
                if (r.agent == scene.ego_id && r.frame == frame) inst.detections = r.detections;
            }
            inst.ground_truth = sracp::ground_truth_for(scene, frame, config.sim.sensing.grid,
                                                        config.sim.weights);
            group.instances.push_back(std::move(inst));
        }
    }

    sracp::EvalReport report;
    for (const auto& [key, group] : groups) {
        const double bytes_pf =
            group.frames ? static_cast<double>(group.bytes) / static_cast<double>(group.frames)
                         : 0.0;
        const LogGroup* lower = nullptr;
        const auto same_budget = groups.find({"lower", group.budget});
        if (same_budget != groups.end()) {
            lower = &same_budget->second;
        } else {
            for (const auto& [k2, g2] : groups) {
                if (k2.first == "lower") lower = &g2;
            }
        }
        for (double theta : config.match.iou_thresholds) {
            for (double tau : config.match.risk_thresholds) {
                sracp::EvalRow row;
                row.policy = group.policy;
                row.budget_bytes = group.budget;
                row.theta = theta;
                row.tau = tau;
                row.ap = sracp::risk_ap_pooled(group.instances, theta, tau);
                row.bytes_per_frame = bytes_pf;
                row.frames = group.frames;
                if (lower && lower != &group && row.ap) {
                    const auto lower_ap = sracp::risk_ap_pooled(lower->instances, theta, tau);
                    const double lower_pf = lower->frames ? static_cast<double>(lower->bytes) /
                                                                static_cast<double>(lower->frames)
                                                          : 0.0;
                    const double delta_kb = (bytes_pf - lower_pf) / 1024.0;
                    if (lower_ap && delta_kb > 0.0) row.bpk = (*row.ap - *lower_ap) / delta_kb;
                }
                report.rows.push_back(std::move(row));
            }
        }
    }

    const fs::path out = out_dir.empty() ? root : fs::path(out_dir);
    write_file(out / "report.csv", sracp::report_to_csv(report));
    write_file(out / "report.json", sracp::report_to_json(report));
    std::cout << "wrote " << (out / "report.csv").string() << " ("
              << report.rows.size() << " rows)\n";
    return 0;
}

int cmd_sweep_p1(const std::string& config_path, const Overrides& overrides,
                 std::string out_dir) {
    sracp::RunConfig config = load_config_or_default(config_path);
    apply_overrides(config, overrides);
    if (!out_dir.empty()) config.output_dir = out_dir;

    const auto scenes = config.make_scenes();
    std::vector<sracp::CommPolicy> policies;
    for (const char* name : {"lower", "upper", "fixed", "random", "sracp-union"}) {
        auto policy = *sracp::CommPolicy::parse(name);
        policy.alpha = config.sim.policy.alpha;
        policy.seed = config.sim.seed;
        policies.push_back(policy);
    }

    const sracp::EvalReport report =
        sracp::sweep_p1(scenes, policies, config.budgets, config.sim, config.match);

    const fs::path out = config.output_dir;
    write_file(out / "p1_report.csv", sracp::report_to_csv(report));
    write_file(out / "p1_report.json", sracp::report_to_json(report));
    std::cout << "wrote " << (out / "p1_report.csv").string() << " ("
              << report.rows.size() << " rows)\n";
    return 0;
}

int cmd_min_bytes_p2(const std::string& config_path, const Overrides& overrides, double theta,
                     double tau, double target_ap, std::string out_dir) {
    sracp::RunConfig config = load_config_or_default(config_path);
    apply_overrides(config, overrides);
    if (!out_dir.empty()) config.output_dir = out_dir;

    const auto scenes = config.make_scenes();
    const sracp::P2Target target{theta, tau, target_ap};
    const auto bytes = sracp::min_bytes_p2(scenes, config.sim.policy, target, config.sim);

    ordered_json result;
    result["policy"] = config.sim.policy.name();
    result["theta"] = theta;
    result["tau"] = tau;
    result["target_ap"] = target_ap;
    if (bytes) {
        result["min_bytes"] = *bytes;
        const auto latency =
            sracp::frames_to_target(scenes, config.sim.policy, *bytes, target, config.sim);
        result["frames_to_target"] =
            latency ? ordered_json(*latency) : ordered_json(nullptr);
        std::cout << "min bytes: " << *bytes;
        if (latency) std::cout << " (mean frames to target: " << *latency << ")";
        std::cout << "\n";
    } else {
        result["min_bytes"] = nullptr;
        result["frames_to_target"] = nullptr;
        std::cout << "target unreachable within the 64 KB search ceiling\n";
    }
    write_file(fs::path(config.output_dir) / "p2_result.json", result.dump(2) + "\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Risk-aware selective cooperative perception simulator"};
    app.require_subcommand(1);

    // scene-gen
    std::string kind_name, scene_out = "scene.json";
    std::uint64_t scene_seed = 1;
    int scene_frames = 16;
    double scene_dt = 0.1;
    auto* scene_gen = app.add_subcommand("scene-gen", "Generate a synthetic scene file");
    scene_gen->add_option("--kind", kind_name, "Scenario kind")->required();
    scene_gen->add_option("--seed", scene_seed, "Scene seed")->required();
    scene_gen->add_option("--out", scene_out, "Output path");
    scene_gen->add_option("--frames", scene_frames, "Scene duration in frames");
    scene_gen->add_option("--dt", scene_dt, "Seconds per frame");

    // simulate
    std::string sim_config, sim_out;
    Overrides sim_overrides;
    auto* simulate = app.add_subcommand("simulate", "Run the protocol over the configured scenes");
    simulate->add_option("--config", sim_config, "Config file (defaults used when omitted)");
    simulate->add_option("--out", sim_out, "Output directory");
    add_override_flags(simulate, sim_overrides);

    // eval
    std::string eval_logs, eval_config, eval_out;
    auto* eval = app.add_subcommand("eval", "Aggregate simulation logs into AP reports");
    eval->add_option("--logs", eval_logs, "Directory written by simulate")->required();
    eval->add_option("--config", eval_config, "Config file (defaults used when omitted)");
    eval->add_option("--out", eval_out, "Report output directory (defaults to --logs)");

    // sweep-p1
    std::string p1_config, p1_out;
    Overrides p1_overrides;
    auto* sweep = app.add_subcommand("sweep-p1", "Fixed-bandwidth sweep over policies x budgets");
    sweep->add_option("--config", p1_config, "Config file (defaults used when omitted)");
    sweep->add_option("--out", p1_out, "Output directory");
    add_override_flags(sweep, p1_overrides);

    // min-bytes-p2
    std::string p2_config, p2_out;
    Overrides p2_overrides;
    double p2_theta = 0.3, p2_tau = 0.2, p2_target = 0.5;
    auto* p2 = app.add_subcommand("min-bytes-p2", "Least budget reaching a Risk-AP target");
    p2->add_option("--config", p2_config, "Config file (defaults used when omitted)");
    p2->add_option("--theta", p2_theta, "IoU threshold")->required();
    p2->add_option("--tau", p2_tau, "Risk threshold")->required();
    p2->add_option("--target-ap", p2_target, "Risk-AP target")->required();
    p2->add_option("--out", p2_out, "Output directory");
    add_override_flags(p2, p2_overrides);

    // init-config
    std::string init_out = "sracp.toml";
    auto* init = app.add_subcommand("init-config", "Write the default config file");
    init->add_option("--out", init_out, "Output path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (scene_gen->parsed()) {
            return cmd_scene_gen(kind_name, scene_seed, scene_out, scene_frames, scene_dt);
        }
        if (simulate->parsed()) return cmd_simulate(sim_config, sim_overrides, sim_out);
        if (eval->parsed()) return cmd_eval(eval_logs, eval_config, eval_out);
        if (sweep->parsed()) return cmd_sweep_p1(p1_config, p1_overrides, p1_out);
        if (p2->parsed()) {
            return cmd_min_bytes_p2(p2_config, p2_overrides, p2_theta, p2_tau, p2_target, p2_out);
        }
        if (init->parsed()) {
            write_file(init_out, sracp::default_config_text());
            std::cout << "wrote " << init_out << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
