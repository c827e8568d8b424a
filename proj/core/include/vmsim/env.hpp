#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vmsim/dqn.hpp"
#include "vmsim/sim.hpp"

namespace vmsim::dqn {

// Adapts a Simulation to the MDP interface: encoded observations, an action
// mask, and reward computation from consecutive step metrics.
class SimEnv {
public:
    SimEnv(Simulation sim, Scenario scenario, RewardConfig reward);

    void reset();

    const Scenario& scenario() const { return scenario_; }
    const ActionSpace& actions() const { return actions_; }
    const Simulation& sim() const { return sim_; }
    const RewardConfig& reward_config() const { return reward_; }

    MdpStateVec observe() const;
    ActionMask valid_mask() const;
    bool done() const;

    struct Outcome {
        double reward = 0.0;
        bool terminal = false;
        MdpStateVec next;
        ActionMask next_mask;
        StepMetrics metrics;
        std::vector<SimEvent> events;
    };

    // Applies the indexed action to the simulation and advances one step.
    Outcome step(int action_index);

    // The kernel action an index decodes to in the current state.
    SimAction decode(int action_index) const;

private:
    Simulation initial_;
    Simulation sim_;
    Scenario scenario_;
    ActionSpace actions_;
    RewardConfig reward_;
    StepMetrics last_metrics_;
};

// Builds a reward config whose normalization constants match the scenario:
// energy_norm = sum of power_peak * step_seconds over the PMs.
RewardConfig with_scenario_norms(RewardConfig cfg, const Simulation& sim);

// Greedy rollout of a frozen network from reset; returns the undiscounted
// episode return. Deterministic. total_energy, when given, receives the
// summed per-step energy in joules.
double greedy_rollout(SimEnv& env, const QNetwork& qnet, double* total_energy = nullptr);

// Uniform-random valid action at every step; control baseline.
double random_rollout(SimEnv& env, Rng& rng, double* total_energy = nullptr);

// Exhaustively explores the deterministic environment from reset, assigning
// one MDP state per distinct simulator state. Throws SizeError once the
// state-action pair count would exceed max_pairs.
ToyMdp enumerate_mdp(const SimEnv& env, std::size_t max_pairs = 10000);

} // namespace vmsim::dqn
