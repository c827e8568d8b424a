#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vmsim/mlp.hpp"
#include "vmsim/rng.hpp"
#include "vmsim/sim.hpp"
#include "vmsim/types.hpp"

namespace vmsim::dqn {

using MdpStateVec = Eigen::VectorXd;
using ActionMask = std::vector<std::uint8_t>;

// Fixed dimensions of one experiment. The PM and VM orders pin the state
// layout and the action enumeration; both must match the simulation.
struct Scenario {
    std::vector<PmId> pm_order;
    std::vector<VmId> vm_order;   // candidate VMs for Migrate and state features
    int request_slots = 1;        // due requests addressable by Place
    int max_pending = 8;          // normalizer for the queue-length feature
    int max_migrations = 4;       // normalizer for the active-migration feature
    bool include_placement = false;  // append per-VM normalized placement index

    void validate() const;
    std::size_t state_dim() const;
};

struct Action {
    enum class Kind { Migrate, Place, Defer, NoOp };
    Kind kind = Kind::NoOp;
    int vm = -1;    // Migrate: index into Scenario::vm_order
    int slot = -1;  // Place: due-request slot
    int pm = -1;    // Migrate / Place target: index into Scenario::pm_order
};

// Enumeration: |VMs|*|PMs| Migrate, then request_slots*|PMs| Place, then
// Defer, then NoOp. Index order is stable for a given scenario.
class ActionSpace {
public:
    explicit ActionSpace(const Scenario& scenario);

    std::size_t size() const { return actions_.size(); }
    const Action& at(std::size_t index) const;
    const std::vector<Action>& all() const { return actions_; }
    std::string descriptor(std::size_t index) const;

private:
    Scenario scenario_;
    std::vector<Action> actions_;
};

struct Transition {
    MdpStateVec s;
    int a = 0;
    double r = 0.0;
    MdpStateVec s_next;
    bool terminal = false;
    ActionMask valid_next;  // action validity in s_next, for the TD backup
};

class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, std::uint64_t seed);

    void push(Transition t);
    std::size_t size() const { return storage_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Transition& at(std::size_t i) const { return storage_[i]; }

    // n independent uniform draws (with replacement).
    std::vector<Transition> sample(std::size_t n);

private:
    std::size_t capacity_;
    std::deque<Transition> storage_;
    Rng rng_;
};

struct QNetwork {
    MlpModel model;

    Eigen::VectorXd q_values(const MdpStateVec& s) const;
};

struct RewardConfig {
    double w_util = 1.0;
    double w_energy = 1.0;
    double w_balance = 0.0;
    double w_migration = 0.0;
    double w_soft = 0.0;
    double shaping_bonus = 0.0;
    // Scenario constants the reward terms are normalized by.
    double energy_norm = 1.0;  // sum of power_peak * step_seconds
    double soft_norm = 1.0;

    void validate() const;
};

struct AgentConfig {
    double gamma = 0.95;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    std::int64_t epsilon_decay_steps = 10000;
    int batch_size = 32;
    std::int64_t target_sync_every = 250;
    double learning_rate = 1e-3;
    std::size_t replay_capacity = 10000;
    std::vector<int> hidden_dims{64, 64};
    double init_scale = 0.1;
    RewardConfig reward;
    std::uint64_t seed = 0;

    void validate() const;
};

// Flat layout: per PM (cpu_remaining, mem_remaining, power/power_peak), then
// per VM (cpu, mem, storage_io, net_io normalized), then optionally per VM
// the placement index / max(1, |PMs|-1) (-1 when unplaced), then pending/max
// and migrations/max. Entries clamped to [-1, 1].
MdpStateVec encode_state(const ClusterState& state, const Scenario& scenario);

double compute_reward(const StepMetrics& before, const StepMetrics& after, const Action& action,
                      const RewardConfig& cfg);

// Epsilon-greedy over valid actions; greedy ties break to the lowest index.
int select_action(const QNetwork& qnet, const MdpStateVec& s, double epsilon,
                  const ActionMask& valid_mask, Rng& rng);

double td_target(double r, const MdpStateVec& s_next, bool terminal, const QNetwork& q_target,
                 double gamma, const ActionMask& valid_mask_next);

// One descent step on the mean squared TD error; only the taken action's
// output carries gradient. Returns the pre-update loss.
double train_step(QNetwork& qnet, const QNetwork& q_target, const std::vector<Transition>& batch,
                  const AgentConfig& cfg);

void sync_target(const QNetwork& qnet, QNetwork& q_target);

double linear_epsilon(const AgentConfig& cfg, std::int64_t global_step);

class SimEnv;  // env.hpp

struct DqnTrainResult {
    QNetwork qnet;
    std::vector<double> returns;  // per-episode undiscounted return
};

DqnTrainResult run_training(SimEnv& env, const AgentConfig& cfg, int episodes);

// Explicit deterministic MDP for oracle checks.
struct ToyMdp {
    int n_states = 0;
    int n_actions = 0;
    std::vector<std::vector<int>> next;            // [state][action]
    std::vector<std::vector<double>> reward;       // [state][action]
    std::vector<std::vector<std::uint8_t>> valid;  // [state][action]
    std::vector<std::uint8_t> terminal;            // [state], value 0 there
    int start = 0;

    void validate() const;
    std::size_t state_action_pairs() const;
};

struct ValueIterationResult {
    std::vector<double> values;
    std::vector<int> policy;       // greedy argmax per state (-1 for terminal)
    double optimal_return = 0.0;   // values[start]
};

// Standard value iteration to residual < 1e-9. Guarded to MDPs with at most
// 10,000 state-action pairs. gamma may be 1 when every path reaches a
// terminal state (finite-horizon MDPs); non-convergence throws.
ValueIterationResult value_iteration_oracle(const ToyMdp& mdp, double gamma);

} // namespace vmsim::dqn
