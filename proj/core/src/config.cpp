#include "vmsim/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "vmsim/errors.hpp"

namespace vmsim {

namespace {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> keys,
                const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool known = false;
        for (const char* k : keys) known = known || key == k;
        if (!known) throw ConfigError(where + ": unknown key \"" + key + "\"");
    }
}

double as_double(const json& j, const std::string& where) {
    if (!j.is_number()) throw ConfigError(where + ": expected a number");
    return j.get<double>();
}

std::int64_t as_int(const json& j, const std::string& where) {
    if (!j.is_number_integer()) throw ConfigError(where + ": expected an integer");
    return j.get<std::int64_t>();
}

std::uint64_t as_seed(const json& j, const std::string& where) {
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    if (j.is_number_integer() && j.get<std::int64_t>() >= 0)
        return static_cast<std::uint64_t>(j.get<std::int64_t>());
    throw ConfigError(where + ": expected a non-negative integer");
}

bool as_bool(const json& j, const std::string& where) {
    if (!j.is_boolean()) throw ConfigError(where + ": expected a boolean");
    return j.get<bool>();
}

std::string as_string(const json& j, const std::string& where) {
    if (!j.is_string()) throw ConfigError(where + ": expected a string");
    return j.get<std::string>();
}

PhysicalMachine parse_pm(const json& j, const std::string& where) {
    check_keys(j,
               {"id", "cpu_capacity", "mem_capacity", "power_idle", "power_peak", "fault_domain",
                "location"},
               where);
    if (!j.contains("id")) throw ConfigError(where + ": missing key \"id\"");
    PhysicalMachine pm;
    pm.id = as_string(j["id"], where + ".id");
    if (j.contains("cpu_capacity")) pm.cpu_capacity = as_double(j["cpu_capacity"], where + ".cpu_capacity");
    if (j.contains("mem_capacity")) pm.mem_capacity = as_double(j["mem_capacity"], where + ".mem_capacity");
    if (j.contains("power_idle")) pm.power_idle = as_double(j["power_idle"], where + ".power_idle");
    if (j.contains("power_peak")) pm.power_peak = as_double(j["power_peak"], where + ".power_peak");
    if (j.contains("fault_domain"))
        pm.fault_domain = static_cast<int>(as_int(j["fault_domain"], where + ".fault_domain"));
    if (j.contains("location")) {
        const json& loc = j["location"];
        if (!loc.is_array() || loc.size() != 2)
            throw ConfigError(where + ".location: expected [x, y]");
        pm.location.x = as_double(loc[0], where + ".location[0]");
        pm.location.y = as_double(loc[1], where + ".location[1]");
    }
    return pm;
}

SynthConfig parse_synth(const json& j, const std::string& where) {
    check_keys(j,
               {"num_vms", "horizon", "base", "amplitude", "period", "noise_sigma",
                "arrival_rate", "seed", "mem", "arrival_duration", "arrival_cpu", "arrival_mem"},
               where);
    SynthConfig cfg;
    if (j.contains("num_vms")) cfg.num_vms = static_cast<int>(as_int(j["num_vms"], where + ".num_vms"));
    if (j.contains("horizon")) cfg.horizon = as_int(j["horizon"], where + ".horizon");
    if (j.contains("base")) cfg.base = as_double(j["base"], where + ".base");
    if (j.contains("amplitude")) cfg.amplitude = as_double(j["amplitude"], where + ".amplitude");
    if (j.contains("period")) cfg.period = as_int(j["period"], where + ".period");
    if (j.contains("noise_sigma")) cfg.noise_sigma = as_double(j["noise_sigma"], where + ".noise_sigma");
    if (j.contains("arrival_rate")) cfg.arrival_rate = as_double(j["arrival_rate"], where + ".arrival_rate");
    if (j.contains("seed")) cfg.seed = as_seed(j["seed"], where + ".seed");
    if (j.contains("mem")) cfg.mem = as_double(j["mem"], where + ".mem");
    if (j.contains("arrival_duration")) cfg.arrival_duration = as_int(j["arrival_duration"], where + ".arrival_duration");
    if (j.contains("arrival_cpu")) cfg.arrival_cpu = as_double(j["arrival_cpu"], where + ".arrival_cpu");
    if (j.contains("arrival_mem")) cfg.arrival_mem = as_double(j["arrival_mem"], where + ".arrival_mem");
    return cfg;
}

SimConfig parse_sim(const json& j, const std::string& where) {
    check_keys(j,
               {"step_seconds", "migration_bandwidth", "preparation_steps", "switchover_steps",
                "seed", "horizon"},
               where);
    SimConfig cfg;
    if (j.contains("step_seconds")) cfg.step_seconds = as_double(j["step_seconds"], where + ".step_seconds");
    if (j.contains("migration_bandwidth"))
        cfg.migration_bandwidth = as_double(j["migration_bandwidth"], where + ".migration_bandwidth");
    if (j.contains("preparation_steps"))
        cfg.preparation_steps = as_int(j["preparation_steps"], where + ".preparation_steps");
    if (j.contains("switchover_steps"))
        cfg.switchover_steps = as_int(j["switchover_steps"], where + ".switchover_steps");
    if (j.contains("seed")) cfg.seed = as_seed(j["seed"], where + ".seed");
    if (j.contains("horizon")) cfg.horizon = as_int(j["horizon"], where + ".horizon");
    return cfg;
}

ThresholdConfig parse_threshold(const json& j, const std::string& where) {
    check_keys(j, {"theta_hi", "theta_lo", "cooldown"}, where);
    ThresholdConfig cfg;
    if (j.contains("theta_hi")) cfg.theta_hi = as_double(j["theta_hi"], where + ".theta_hi");
    if (j.contains("theta_lo")) cfg.theta_lo = as_double(j["theta_lo"], where + ".theta_lo");
    if (j.contains("cooldown")) cfg.cooldown = as_int(j["cooldown"], where + ".cooldown");
    return cfg;
}

dqn::RewardConfig parse_reward(const json& j, const std::string& where) {
    check_keys(j,
               {"w_util", "w_energy", "w_balance", "w_migration", "w_soft", "shaping_bonus",
                "energy_norm", "soft_norm"},
               where);
    dqn::RewardConfig cfg;
    if (j.contains("w_util")) cfg.w_util = as_double(j["w_util"], where + ".w_util");
    if (j.contains("w_energy")) cfg.w_energy = as_double(j["w_energy"], where + ".w_energy");
    if (j.contains("w_balance")) cfg.w_balance = as_double(j["w_balance"], where + ".w_balance");
    if (j.contains("w_migration")) cfg.w_migration = as_double(j["w_migration"], where + ".w_migration");
    if (j.contains("w_soft")) cfg.w_soft = as_double(j["w_soft"], where + ".w_soft");
    if (j.contains("shaping_bonus")) cfg.shaping_bonus = as_double(j["shaping_bonus"], where + ".shaping_bonus");
    if (j.contains("energy_norm")) cfg.energy_norm = as_double(j["energy_norm"], where + ".energy_norm");
    if (j.contains("soft_norm")) cfg.soft_norm = as_double(j["soft_norm"], where + ".soft_norm");
    return cfg;
}

dqn::AgentConfig parse_agent(const json& j, const std::string& where) {
    check_keys(j,
               {"gamma", "epsilon_start", "epsilon_end", "epsilon_decay_steps", "batch_size",
                "target_sync_every", "learning_rate", "replay_capacity", "hidden_dims",
                "init_scale", "reward", "seed"},
               where);
    dqn::AgentConfig cfg;
    if (j.contains("gamma")) cfg.gamma = as_double(j["gamma"], where + ".gamma");
    if (j.contains("epsilon_start")) cfg.epsilon_start = as_double(j["epsilon_start"], where + ".epsilon_start");
    if (j.contains("epsilon_end")) cfg.epsilon_end = as_double(j["epsilon_end"], where + ".epsilon_end");
    if (j.contains("epsilon_decay_steps"))
        cfg.epsilon_decay_steps = as_int(j["epsilon_decay_steps"], where + ".epsilon_decay_steps");
    if (j.contains("batch_size")) cfg.batch_size = static_cast<int>(as_int(j["batch_size"], where + ".batch_size"));
    if (j.contains("target_sync_every"))
        cfg.target_sync_every = as_int(j["target_sync_every"], where + ".target_sync_every");
    if (j.contains("learning_rate")) cfg.learning_rate = as_double(j["learning_rate"], where + ".learning_rate");
    if (j.contains("replay_capacity")) {
        const std::int64_t cap = as_int(j["replay_capacity"], where + ".replay_capacity");
        if (cap < 1) throw ConfigError(where + ".replay_capacity: must be >= 1");
        cfg.replay_capacity = static_cast<std::size_t>(cap);
    }
    if (j.contains("hidden_dims")) {
        if (!j["hidden_dims"].is_array())
            throw ConfigError(where + ".hidden_dims: expected an array of integers");
        cfg.hidden_dims.clear();
        for (const auto& d : j["hidden_dims"])
            cfg.hidden_dims.push_back(static_cast<int>(as_int(d, where + ".hidden_dims[]")));
    }
    if (j.contains("init_scale")) cfg.init_scale = as_double(j["init_scale"], where + ".init_scale");
    if (j.contains("reward")) cfg.reward = parse_reward(j["reward"], where + ".reward");
    if (j.contains("seed")) cfg.seed = as_seed(j["seed"], where + ".seed");
    return cfg;
}

TrainConfig parse_train(const json& j, const std::string& where) {
    check_keys(j, {"learning_rate", "epochs", "bptt_window", "seed", "init_scale"}, where);
    TrainConfig cfg;
    if (j.contains("learning_rate")) cfg.learning_rate = as_double(j["learning_rate"], where + ".learning_rate");
    if (j.contains("epochs")) cfg.epochs = static_cast<int>(as_int(j["epochs"], where + ".epochs"));
    if (j.contains("bptt_window")) cfg.bptt_window = static_cast<int>(as_int(j["bptt_window"], where + ".bptt_window"));
    if (j.contains("seed")) cfg.seed = as_seed(j["seed"], where + ".seed");
    if (j.contains("init_scale")) cfg.init_scale = as_double(j["init_scale"], where + ".init_scale");
    return cfg;
}

ScenarioConfig parse_scenario(const json& j, const std::string& where) {
    check_keys(j,
               {"pms", "trace", "synth", "initial_placement", "proximity_weight",
                "request_slots", "max_pending", "max_migrations", "include_placement",
                "powered_off_when_empty", "power_mlp"},
               where);
    ScenarioConfig cfg;
    if (j.contains("pms")) {
        if (!j["pms"].is_array()) throw ConfigError(where + ".pms: expected an array");
        std::size_t i = 0;
        for (const auto& pj : j["pms"])
            cfg.pms.push_back(parse_pm(pj, where + ".pms[" + std::to_string(i++) + "]"));
    }
    if (j.contains("trace")) cfg.trace = as_string(j["trace"], where + ".trace");
    if (j.contains("synth")) cfg.synth = parse_synth(j["synth"], where + ".synth");
    if (j.contains("initial_placement"))
        cfg.initial_placement = as_string(j["initial_placement"], where + ".initial_placement");
    if (j.contains("proximity_weight"))
        cfg.proximity_weight = as_double(j["proximity_weight"], where + ".proximity_weight");
    if (j.contains("request_slots"))
        cfg.request_slots = static_cast<int>(as_int(j["request_slots"], where + ".request_slots"));
    if (j.contains("max_pending"))
        cfg.max_pending = static_cast<int>(as_int(j["max_pending"], where + ".max_pending"));
    if (j.contains("max_migrations"))
        cfg.max_migrations = static_cast<int>(as_int(j["max_migrations"], where + ".max_migrations"));
    if (j.contains("include_placement"))
        cfg.include_placement = as_bool(j["include_placement"], where + ".include_placement");
    if (j.contains("powered_off_when_empty"))
        cfg.powered_off_when_empty = as_bool(j["powered_off_when_empty"], where + ".powered_off_when_empty");
    if (j.contains("power_mlp")) cfg.power_mlp = as_string(j["power_mlp"], where + ".power_mlp");
    return cfg;
}

} // namespace

const char* to_string(PolicyKind kind) {
    switch (kind) {
    case PolicyKind::FirstFit: return "first_fit";
    case PolicyKind::BestFit: return "best_fit";
    case PolicyKind::Threshold: return "threshold";
    case PolicyKind::Dqn: return "dqn";
    case PolicyKind::Random: return "random";
    }
    return "?";
}

PolicyKind policy_kind_from_string(const std::string& s) {
    if (s == "first_fit") return PolicyKind::FirstFit;
    if (s == "best_fit") return PolicyKind::BestFit;
    if (s == "threshold") return PolicyKind::Threshold;
    if (s == "dqn") return PolicyKind::Dqn;
    if (s == "random") return PolicyKind::Random;
    throw ConfigError("unknown policy \"" + s + "\"");
}

void ScenarioConfig::validate() const {
    if (pms.empty()) throw ConfigError("scenario.pms must not be empty");
    std::set<PmId> ids;
    for (const auto& pm : pms) {
        pm.validate();
        if (!ids.insert(pm.id).second) throw ConfigError("duplicate PM id " + pm.id);
    }
    if (trace.has_value() == synth.has_value())
        throw ConfigError("scenario needs exactly one of \"trace\" or \"synth\"");
    if (synth) synth->validate();
    if (initial_placement != "round_robin" && initial_placement != "first_fit")
        throw ConfigError("initial_placement must be \"round_robin\" or \"first_fit\"");
    if (proximity_weight < 0.0) throw ConfigError("proximity_weight must be >= 0");
    if (request_slots < 0) throw ConfigError("request_slots must be >= 0");
    if (max_pending < 1) throw ConfigError("max_pending must be >= 1");
    if (max_migrations < 1) throw ConfigError("max_migrations must be >= 1");
}

void ExperimentConfig::validate() const {
    scenario.validate();
    sim.validate();
    threshold.validate();
    agent.validate();
    if (forecaster) forecaster->validate();
    if (output.empty()) throw ConfigError("output must not be empty");
    if (episodes < 0) throw ConfigError("episodes must be >= 0");
    if (eval_seeds < 1) throw ConfigError("eval_seeds must be >= 1");
}

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    check_keys(j,
               {"scenario", "sim", "policy", "threshold", "agent", "forecaster", "policy_file",
                "output", "seed", "episodes", "eval_seeds"},
               origin);

    ExperimentConfig cfg;
    if (j.contains("scenario")) cfg.scenario = parse_scenario(j["scenario"], origin + ": scenario");
    if (j.contains("sim")) cfg.sim = parse_sim(j["sim"], origin + ": sim");
    if (j.contains("policy"))
        cfg.policy = policy_kind_from_string(as_string(j["policy"], origin + ": policy"));
    if (j.contains("threshold")) cfg.threshold = parse_threshold(j["threshold"], origin + ": threshold");
    if (j.contains("agent")) cfg.agent = parse_agent(j["agent"], origin + ": agent");
    if (j.contains("forecaster")) cfg.forecaster = parse_train(j["forecaster"], origin + ": forecaster");
    if (j.contains("policy_file")) cfg.policy_file = as_string(j["policy_file"], origin + ": policy_file");
    if (j.contains("output")) cfg.output = as_string(j["output"], origin + ": output");
    if (j.contains("seed")) cfg.seed = as_seed(j["seed"], origin + ": seed");
    if (j.contains("episodes")) cfg.episodes = static_cast<int>(as_int(j["episodes"], origin + ": episodes"));
    if (j.contains("eval_seeds")) cfg.eval_seeds = static_cast<int>(as_int(j["eval_seeds"], origin + ": eval_seeds"));
    cfg.validate();
    return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path.string() + ": cannot open config file");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_experiment_config(buffer.str(), path.string());
}

SynthConfig load_synth_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path.string() + ": cannot open config file");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    json j;
    try {
        j = json::parse(buffer.str());
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    SynthConfig cfg = parse_synth(j, path.string());
    cfg.validate();
    return cfg;
}

} // namespace vmsim
