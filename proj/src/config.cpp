#include "sracp/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "sracp/errors.hpp"

namespace sracp {

void RunConfig::validate() const {
    sim.validate();
    match.validate();
    if (kinds.empty()) throw ConfigError("scenario: kinds must be non-empty");
    if (scenario_seeds.empty()) throw ConfigError("scenario: seeds must be non-empty");
    if (scenario_frames < 1) throw ConfigError("scenario: frames must be >= 1");
    if (!(scenario_dt > 0.0)) throw ConfigError("scenario: dt must be > 0");
    for (std::uint64_t b : budgets) {
        if (b == 0) throw ConfigError("eval: budgets must be positive");
    }
    if (output_dir.empty()) throw ConfigError("output: dir must be non-empty");
}

std::vector<Scene> RunConfig::make_scenes() const {
    ScenarioParams params;
    params.frames = scenario_frames;
    params.dt = scenario_dt;
    std::vector<Scene> scenes;
    for (ScenarioKind kind : kinds) {
        for (std::uint64_t seed : scenario_seeds) {
            scenes.push_back(generate_scene(kind, seed, params));
        }
    }
    return scenes;
}

RunConfig default_run_config() {
    RunConfig config;
    config.sim.sensing.grid = GridSpec{-25.6, 25.6, -25.6, 25.6, 0.8, -0.5, 3.0};
    config.sim.sensing.fov = FovSpec{};
    config.sim.sensing.ray = RaycastParams{2.0, 0.4};
    config.sim.sensing.rays = 720;
    config.sim.sensing.kernel_radius = 0;
    config.sim.sensing.jitter = 0.05;
    config.sim.sensing.tau_occ = 0.5;
    config.sim.sensing.temporal_frames = 3;
    config.sim.sensing.tau_t = 0.5;
    return config;
}

namespace {

struct ConfigValue {
    enum class Type { Number, String, Boolean, NumberList, StringList };
    Type type = Type::Number;
    double number = 0.0;
    std::string text;
    bool boolean = false;
    std::vector<double> numbers;
    std::vector<std::string> strings;
    int line = 0;
};

[[noreturn]] void fail(int line, const std::string& message) {
    throw ConfigError("line " + std::to_string(line) + ": " + message);
}

std::string trim(const std::string& s) {
    std::size_t begin = 0;
    std::size_t end = s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
    return s.substr(begin, end - begin);
}

bool parse_number(const std::string& text, double& out) {
    const std::string t = trim(text);
    if (t.empty()) return false;
    char* end = nullptr;
    out = std::strtod(t.c_str(), &end);
    return end == t.c_str() + t.size();
}

ConfigValue parse_value(const std::string& raw, int line) {
    ConfigValue value;
    value.line = line;
    const std::string text = trim(raw);
    if (text.empty()) fail(line, "missing value");

    if (text.front() == '"') {
        if (text.size() < 2 || text.back() != '"') fail(line, "unterminated string");
        value.type = ConfigValue::Type::String;
        value.text = text.substr(1, text.size() - 2);
        return value;
    }
    if (text == "true" || text == "false") {
        value.type = ConfigValue::Type::Boolean;
        value.boolean = text == "true";
        return value;
    }
    if (text.front() == '[') {
        if (text.back() != ']') fail(line, "unterminated array");
        const std::string inner = trim(text.substr(1, text.size() - 2));
        value.type = ConfigValue::Type::NumberList;
        if (inner.empty()) return value;
        std::stringstream ss(inner);
        std::string item;
        bool strings = false;
        while (std::getline(ss, item, ',')) {
            const std::string entry = trim(item);
            if (entry.empty()) fail(line, "empty array element");
            if (entry.front() == '"') {
                if (entry.size() < 2 || entry.back() != '"') fail(line, "unterminated string");
                value.strings.push_back(entry.substr(1, entry.size() - 2));
                strings = true;
            } else {
                double num = 0.0;
                if (!parse_number(entry, num)) fail(line, "invalid array number: " + entry);
                value.numbers.push_back(num);
            }
        }
        if (strings && !value.numbers.empty()) fail(line, "mixed array types");
        value.type = strings ? ConfigValue::Type::StringList : ConfigValue::Type::NumberList;
        return value;
    }
    double num = 0.0;
    if (!parse_number(text, num)) fail(line, "invalid value: " + text);
    value.type = ConfigValue::Type::Number;
    value.number = num;
    return value;
}

using ConfigTable = std::map<std::string, ConfigValue>;

ConfigTable parse_table(const std::string& text) {
    ConfigTable table;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        if (stripped.front() == '[') {
            if (stripped.back() != ']') fail(line_no, "unterminated section header");
            section = trim(stripped.substr(1, stripped.size() - 2));
            if (section.empty()) fail(line_no, "empty section name");
            continue;
        }
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) fail(line_no, "expected key = value");
        const std::string key = trim(stripped.substr(0, eq));
        if (key.empty()) fail(line_no, "empty key");
        if (section.empty()) fail(line_no, "key outside any section");
        const std::string full = section + "." + key;
        if (table.count(full)) fail(line_no, "duplicate key: " + full);
        table[full] = parse_value(stripped.substr(eq + 1), line_no);
    }
    return table;
}

class ConfigReader {
  public:
    explicit ConfigReader(ConfigTable table) : table_(std::move(table)) {}

    bool has(const std::string& key) const { return table_.count(key) > 0; }

    double number(const std::string& key, double fallback) {
        const ConfigValue* v = take(key);
        if (!v) return fallback;
        if (v->type != ConfigValue::Type::Number) fail(v->line, key + ": expected a number");
        return v->number;
    }

    std::int64_t integer(const std::string& key, std::int64_t fallback) {
        const ConfigValue* v = take(key);
        if (!v) return fallback;
        if (v->type != ConfigValue::Type::Number || v->number != std::floor(v->number)) {
            fail(v->line, key + ": expected an integer");
        }
        return static_cast<std::int64_t>(v->number);
    }

    std::string string(const std::string& key, const std::string& fallback) {
        const ConfigValue* v = take(key);
        if (!v) return fallback;
        if (v->type != ConfigValue::Type::String) fail(v->line, key + ": expected a string");
        return v->text;
    }

    std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
        const ConfigValue* v = take(key);
        if (!v) return fallback;
        if (v->type != ConfigValue::Type::NumberList) {
            fail(v->line, key + ": expected an array of numbers");
        }
        return v->numbers;
    }

    std::vector<std::string> strings(const std::string& key, std::vector<std::string> fallback) {
        const ConfigValue* v = take(key);
        if (!v) return fallback;
        if (v->type != ConfigValue::Type::StringList) {
            fail(v->line, key + ": expected an array of strings");
        }
        return v->strings;
    }

    void reject_unknown() const {
        for (const auto& [key, value] : table_) {
            if (!consumed_.count(key)) fail(value.line, "unknown key: " + key);
        }
    }

  private:
    const ConfigValue* take(const std::string& key) {
        const auto it = table_.find(key);
        if (it == table_.end()) return nullptr;
        consumed_.insert(key);
        return &it->second;
    }

    ConfigTable table_;
    std::set<std::string> consumed_;
};

std::vector<std::uint64_t> to_u64_list(const std::vector<double>& values, const char* what) {
    std::vector<std::uint64_t> out;
    for (double v : values) {
        if (v < 0.0 || v != std::floor(v)) {
            throw ConfigError(std::string(what) + ": expected non-negative integers");
        }
        out.push_back(static_cast<std::uint64_t>(v));
    }
    return out;
}

}  // namespace

RunConfig run_config_from_string(const std::string& text) {
    ConfigReader reader(parse_table(text));
    RunConfig config = default_run_config();

    const double half_extent = reader.number("grid.half_extent", 25.6);
    const double cell_size = reader.number("grid.cell_size", 0.8);
    config.sim.sensing.grid = GridSpec{-half_extent, half_extent, -half_extent, half_extent,
                                       cell_size, reader.number("grid.z_min", -0.5),
                                       reader.number("grid.z_max", 3.0)};

    config.sim.sensing.fov.max_range = reader.number("sensing.max_range", 60.0);
    config.sim.sensing.rays = static_cast<int>(reader.integer("sensing.rays", 720));
    config.sim.sensing.ray.lambda = reader.number("sensing.lambda", 2.0);
    config.sim.sensing.ray.step = reader.number("sensing.step", cell_size / 2.0);
    config.sim.sensing.kernel_radius =
        static_cast<int>(reader.integer("sensing.kernel_radius", 0));
    config.sim.sensing.jitter = reader.number("sensing.jitter", 0.05);

    config.sim.sensing.tau_occ = reader.number("blind_zone.tau_occ", 0.5);
    config.sim.sensing.temporal_frames =
        static_cast<int>(reader.integer("blind_zone.frames", 3));
    config.sim.sensing.tau_t = reader.number("blind_zone.tau_t", 0.5);

    config.sim.weights.alpha_d = reader.number("risk.alpha_d", 0.5);
    config.sim.weights.alpha_s = reader.number("risk.alpha_s", 0.3);
    config.sim.weights.alpha_n = reader.number("risk.alpha_n", 0.2);
    config.sim.weights.lambda_d = reader.number("risk.lambda_d", 0.05);
    config.sim.weights.lambda_n = reader.number("risk.lambda_n", 0.02);
    config.sim.weights.epsilon = reader.number("risk.epsilon", 0.01);
    config.sim.tau_r = reader.number("risk.tau_r", 0.45);

    config.sim.budget.budget_bytes =
        static_cast<std::uint64_t>(reader.integer("budget.bytes", 1024));
    config.sim.budget.header_bytes =
        static_cast<std::uint32_t>(reader.integer("budget.header_bytes", 24));
    config.sim.budget.index_bytes =
        static_cast<std::uint32_t>(reader.integer("budget.index_bytes", 4));
    config.sim.budget.feature_bytes =
        static_cast<std::uint32_t>(reader.integer("budget.feature_bytes", 1));
    config.sim.budget.channels =
        static_cast<std::uint32_t>(reader.integer("budget.channels", 64));

    config.sim.policy.alpha = reader.number("selection.alpha", 0.5);
    const std::string gate = reader.string("selection.gate", "union");
    if (gate == "s") {
        config.sim.policy.gate = GateMode::SpatialOnly;
    } else if (gate == "r") {
        config.sim.policy.gate = GateMode::RiskOnly;
    } else if (gate == "union") {
        config.sim.policy.gate = GateMode::Union;
    } else {
        throw ConfigError("selection.gate: expected one of s, r, union");
    }

    config.sim.occupancy_threshold = reader.number("fusion.occupancy_threshold", 0.3);
    config.sim.min_cells = static_cast<int>(reader.integer("fusion.min_cells", 2));

    config.sim.comm_radius = reader.number("sim.comm_radius", 50.0);
    const std::string policy_name = reader.string("sim.policy", "sracp-union");
    const auto policy = CommPolicy::parse(policy_name);
    if (!policy) throw ConfigError("sim.policy: unknown policy " + policy_name);
    config.sim.policy.kind = policy->kind;
    if (policy->kind == CommPolicy::Kind::SRACP && policy_name != "sracp") {
        config.sim.policy.gate = policy->gate;
    }
    config.sim.seed = static_cast<std::uint64_t>(reader.integer("sim.seed", 7));
    config.sim.policy.seed = config.sim.seed;
    config.sim.frames = static_cast<int>(reader.integer("sim.frames", 0));

    const auto kind_names = reader.strings("scenario.kinds", {});
    if (!kind_names.empty()) {
        config.kinds.clear();
        for (const std::string& name : kind_names) {
            const auto kind = scenario_kind_from_string(name);
            if (!kind) throw ConfigError("scenario.kinds: unknown kind " + name);
            config.kinds.push_back(*kind);
        }
    }
    config.scenario_seeds =
        to_u64_list(reader.numbers("scenario.seeds", {1, 2, 3}), "scenario.seeds");
    config.scenario_frames = static_cast<int>(reader.integer("scenario.frames", 16));
    config.scenario_dt = reader.number("scenario.dt", 0.1);

    config.match.iou_thresholds = reader.numbers("eval.iou_thresholds", {0.3, 0.5, 0.7});
    config.match.risk_thresholds = reader.numbers("eval.risk_thresholds", {0.2, 0.3, 0.4});
    config.budgets = to_u64_list(
        reader.numbers("eval.budgets", {512, 717, 1024, 2048, 3072, 5120, 10240}),
        "eval.budgets");

    config.output_dir = reader.string("output.dir", "out");

    reader.reject_unknown();
    config.validate();
    return config;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot read " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return run_config_from_string(buffer.str());
}

std::string default_config_text() {
    return R"(# Experiment configuration. Values shown are the defaults.

[grid]
half_extent = 25.6     # meters; the raster spans [-half_extent, half_extent]^2
cell_size = 0.8        # meters per cell
z_min = -0.5           # occupancy height band, meters
z_max = 3.0

[sensing]
max_range = 60.0       # sensor range, meters
rays = 720             # rays per sweep
lambda = 2.0           # attenuation, 1/m
step = 0.4             # ray-march step, meters (defaults to cell_size / 2)
kernel_radius = 0      # occupancy box-kernel radius, cells
jitter = 0.05          # range jitter, meters

[blind_zone]
tau_occ = 0.5          # occlusion probability threshold
frames = 3             # temporal stabilization window
tau_t = 0.5            # temporal vote threshold

[risk]
alpha_d = 0.5
alpha_s = 0.3
alpha_n = 0.2
lambda_d = 0.05        # distance decay, 1/m
lambda_n = 0.02        # intersection decay, 1/m
epsilon = 0.01
tau_r = 0.45           # handshake trigger threshold

[budget]
bytes = 1024           # per-link bytes per frame
header_bytes = 24
index_bytes = 4
feature_bytes = 1
channels = 64

[selection]
alpha = 0.5            # gain mixing weight
gate = "union"         # s | r | union

[fusion]
occupancy_threshold = 0.3
min_cells = 2

[sim]
comm_radius = 50.0     # meters
policy = "sracp-union" # lower | upper | fixed | random | sracp-s | sracp-r | sracp-union
seed = 7
frames = 0             # 0 = scene duration

[scenario]
kinds = ["unprotected_left_turn", "intersection", "merge", "head_on", "overtake", "straight_baseline", "multi_agent"]
seeds = [1, 2, 3]
frames = 16
dt = 0.1

[eval]
iou_thresholds = [0.3, 0.5, 0.7]
risk_thresholds = [0.2, 0.3, 0.4]
budgets = [512, 717, 1024, 2048, 3072, 5120, 10240]

[output]
dir = "out"
)";
}

}  // namespace sracp
