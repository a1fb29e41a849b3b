#pragma once

#include <string>
#include <vector>

#include "sracp/eval.hpp"
#include "sracp/scenario.hpp"
#include "sracp/sim.hpp"

namespace sracp {

/// Full experiment configuration. Parsed from a sectioned key = value file;
/// unknown sections or keys are rejected with line-level diagnostics, and
/// every module invariant is validated before any simulation runs.
struct RunConfig {
    SimConfig sim{};
    std::vector<ScenarioKind> kinds = all_scenario_kinds();
    std::vector<std::uint64_t> scenario_seeds{1, 2, 3};
    int scenario_frames = 16;
    double scenario_dt = 0.1;
    MatchConfig match{};
    std::vector<std::uint64_t> budgets{512, 717, 1024, 2048, 3072, 5120, 10240};
    std::string output_dir = "out";

    void validate() const;

    /// The configured scenario suite (kinds x seeds), deterministic.
    std::vector<Scene> make_scenes() const;
};

RunConfig default_run_config();

/// Parses and validates a config file. Throws ConfigError with a
/// "line N: ..." diagnostic on syntax errors, unknown keys, or invariant
/// violations.
RunConfig load_run_config(const std::string& path);
RunConfig run_config_from_string(const std::string& text);

/// The shipped defaults in config-file form.
std::string default_config_text();

}  // namespace sracp
