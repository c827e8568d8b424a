#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vmsim/config.hpp"
#include "vmsim/env.hpp"
#include "vmsim/sim.hpp"
#include "vmsim/trace.hpp"

namespace vmsim {

// Experiment drivers shared by the CLI and the tests. Each function is
// deterministic given its config (all randomness flows from config.seed via
// named sub-seeds).

WorkloadTrace build_trace(const ExperimentConfig& cfg);
Simulation build_simulation(const ExperimentConfig& cfg);
dqn::Scenario build_scenario(const ExperimentConfig& cfg, const Simulation& sim);
dqn::SimEnv build_env(const ExperimentConfig& cfg);

struct RunArtifacts {
    std::vector<StepMetrics> metrics;
    std::vector<SimEvent> events;
    RunSummary summary;
};

// One simulation under the configured policy; writes the report into
// cfg.output unless out_override says otherwise.
RunArtifacts run_simulate(const ExperimentConfig& cfg,
                          std::optional<std::filesystem::path> out_override = std::nullopt);

struct TrainOutput {
    dqn::DqnTrainResult result;
    std::filesystem::path policy_path;  // saved network + action manifest
    std::filesystem::path curve_path;   // per-episode returns, NDJSON
};

TrainOutput run_train(const ExperimentConfig& cfg,
                      std::optional<std::filesystem::path> out_override = std::nullopt);

struct EvalSeedResult {
    std::uint64_t seed = 0;
    double policy_return = 0.0;
    double policy_energy = 0.0;
    double random_return = 0.0;
    double random_energy = 0.0;
};

struct EvalOutput {
    std::vector<EvalSeedResult> per_seed;
    double mean_return = 0.0;
    double std_return = 0.0;
    double mean_energy = 0.0;
    double std_energy = 0.0;
    std::filesystem::path report_path;
};

// Frozen-policy rollouts over eval_seeds consecutive top-level seeds, with a
// uniform-random valid-action control under the same seeds.
EvalOutput run_evaluate(const ExperimentConfig& cfg, const std::filesystem::path& policy_file,
                        std::optional<std::filesystem::path> out_override = std::nullopt);

// Rolls the model over the cpu series of every VM in the trace and writes
// horizon autoregressive predictions per VM as NDJSON.
void run_forecast(const std::filesystem::path& model_file, const std::filesystem::path& trace_file,
                  int horizon, const std::filesystem::path& out);

struct GradCheckResult {
    double lstm_max = 0.0;
    double mlp_max = 0.0;
};

// Randomized small-model gradient checks (central finite differences).
GradCheckResult run_gradcheck(std::uint64_t seed, int cases);

void run_gentrace(const SynthConfig& cfg, const std::filesystem::path& out);

} // namespace vmsim
