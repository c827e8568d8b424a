#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vmsim/dqn.hpp"
#include "vmsim/energy.hpp"
#include "vmsim/lstm.hpp"
#include "vmsim/policies.hpp"
#include "vmsim/sim.hpp"
#include "vmsim/trace.hpp"
#include "vmsim/types.hpp"

namespace vmsim {

enum class PolicyKind { FirstFit, BestFit, Threshold, Dqn, Random };

const char* to_string(PolicyKind kind);
PolicyKind policy_kind_from_string(const std::string& s);

struct ScenarioConfig {
    std::vector<PhysicalMachine> pms;
    // Exactly one of the two demand sources.
    std::optional<std::filesystem::path> trace;
    std::optional<SynthConfig> synth;

    std::string initial_placement = "round_robin";  // or "first_fit"
    double proximity_weight = 0.0;
    int request_slots = 1;
    int max_pending = 8;
    int max_migrations = 4;
    bool include_placement = false;

    // Power model selection.
    bool powered_off_when_empty = false;
    std::optional<std::filesystem::path> power_mlp;  // fitted model file

    void validate() const;
};

struct ExperimentConfig {
    ScenarioConfig scenario;
    SimConfig sim;
    PolicyKind policy = PolicyKind::FirstFit;
    ThresholdConfig threshold;              // used when policy == Threshold
    dqn::AgentConfig agent;                 // used when policy == Dqn
    std::optional<TrainConfig> forecaster;  // demand forecasting side channel
    std::optional<std::filesystem::path> policy_file;
    std::filesystem::path output = "report";
    std::uint64_t seed = 0;
    int episodes = 100;   // train
    int eval_seeds = 5;   // evaluate

    void validate() const;
};

// Reads and validates a JSON config file. Key names mirror the struct field
// names; unknown keys raise ConfigError.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig parse_experiment_config(const std::string& text, const std::string& origin);

// Standalone synthetic-trace parameters (the gentrace input): a JSON object
// with the SynthConfig field names.
SynthConfig load_synth_config(const std::filesystem::path& path);

} // namespace vmsim
