#include "vmsim/env.hpp"

#include <map>
#include <sstream>

#include "vmsim/domain.hpp"
#include "vmsim/errors.hpp"

namespace vmsim::dqn {

namespace {

bool place_is_valid(const ClusterState& state, const std::vector<UserRequest>& due,
                    const Action& a, const Scenario& scenario) {
    if (a.slot < 0 || static_cast<std::size_t>(a.slot) >= due.size()) return false;
    const UserRequest& req = due[static_cast<std::size_t>(a.slot)];
    if (req.vms.size() != 1) return false;  // agent places single-VM requests
    const VirtualMachine& vm = req.vms.front();
    if (state.has_vm(vm.id)) return false;
    ClusterState scratch = state;
    scratch.vms.push_back(vm);
    Assignment assignment{{vm.id, scenario.pm_order[static_cast<std::size_t>(a.pm)]}};
    return check_hard(scratch, assignment, req.hard);
}

ActionMask compute_mask(const Simulation& sim, const Scenario& scenario,
                        const ActionSpace& actions) {
    const ClusterState& state = sim.state();
    const std::vector<UserRequest> due = sim.due_requests();
    ActionMask mask(actions.size(), 0);
    for (std::size_t i = 0; i < actions.size(); ++i) {
        const Action& a = actions.at(i);
        switch (a.kind) {
        case Action::Kind::Migrate: {
            const VmId& vm = scenario.vm_order[static_cast<std::size_t>(a.vm)];
            const PmId& pm = scenario.pm_order[static_cast<std::size_t>(a.pm)];
            mask[i] = state.has_vm(vm) && !can_start_migration(state, vm, pm) ? 1 : 0;
            break;
        }
        case Action::Kind::Place:
            mask[i] = place_is_valid(state, due, a, scenario) ? 1 : 0;
            break;
        case Action::Kind::Defer:
            mask[i] = due.empty() ? 0 : 1;
            break;
        case Action::Kind::NoOp:
            mask[i] = 1;
            break;
        }
    }
    return mask;
}

SimAction decode_action(const Simulation& sim, const Scenario& scenario, const Action& a) {
    switch (a.kind) {
    case Action::Kind::Migrate:
        return SimAction::migrate(scenario.vm_order[static_cast<std::size_t>(a.vm)],
                                  scenario.pm_order[static_cast<std::size_t>(a.pm)]);
    case Action::Kind::Place: {
        Assignment assignment;
        const std::vector<UserRequest> due = sim.due_requests();
        if (a.slot >= 0 && static_cast<std::size_t>(a.slot) < due.size()) {
            const UserRequest& req = due[static_cast<std::size_t>(a.slot)];
            for (const auto& vm : req.vms)
                assignment[vm.id] = scenario.pm_order[static_cast<std::size_t>(a.pm)];
        }
        return SimAction::place(static_cast<std::size_t>(std::max(0, a.slot)),
                                std::move(assignment));
    }
    case Action::Kind::Defer:
        return SimAction::defer(0);
    case Action::Kind::NoOp:
        return SimAction::noop();
    }
    return SimAction::noop();
}

int greedy_action(const QNetwork& qnet, const MdpStateVec& s, const ActionMask& mask) {
    const Eigen::VectorXd q = qnet.q_values(s);
    int best = -1;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        const auto idx = static_cast<Eigen::Index>(i);
        if (best < 0 || q(idx) > q(best)) best = static_cast<int>(i);
    }
    if (best < 0) throw ConfigError("no valid action available");
    return best;
}

// Everything that determines future dynamics at a fixed point in the step
// cycle. Cursor positions are functions of time, so time plus cluster
// contents identifies the simulator state exactly.
std::string state_key(const ClusterState& state) {
    std::ostringstream key;
    key << std::hexfloat;
    key << state.time << '|';
    for (const auto& vm : state.vms) {
        key << vm.id << ':' << (vm.placement ? *vm.placement : "-") << ':' << vm.cpu_demand
            << ':' << vm.mem_demand << ';';
    }
    key << '|';
    for (const auto& job : state.migrations) {
        key << job.vm << ':' << job.target << ':' << static_cast<int>(job.phase) << ':'
            << job.bytes_remaining << ':' << job.preparation_steps_remaining << ':'
            << job.downtime_steps_remaining << ';';
    }
    key << '|';
    for (const auto& req : state.pending_requests) key << req.id << ';';
    key << '|';
    for (const auto& ar : state.admitted) key << ar.request.id << ':' << ar.completes_at << ';';
    return key.str();
}

} // namespace

SimEnv::SimEnv(Simulation sim, Scenario scenario, RewardConfig reward)
    : initial_(std::move(sim)),
      sim_(initial_),
      scenario_(std::move(scenario)),
      actions_(scenario_),
      reward_(std::move(reward)) {
    reward_.validate();
    for (const auto& pm : scenario_.pm_order)
        if (!sim_.state().has_pm(pm))
            throw ConfigError("scenario PM " + pm + " not in the simulation");
    last_metrics_ = sim_.metrics_snapshot();
}

void SimEnv::reset() {
    sim_ = initial_;
    last_metrics_ = sim_.metrics_snapshot();
}

MdpStateVec SimEnv::observe() const { return encode_state(sim_.state(), scenario_); }

ActionMask SimEnv::valid_mask() const { return compute_mask(sim_, scenario_, actions_); }

bool SimEnv::done() const { return sim_.done(); }

SimAction SimEnv::decode(int action_index) const {
    return decode_action(sim_, scenario_, actions_.at(static_cast<std::size_t>(action_index)));
}

SimEnv::Outcome SimEnv::step(int action_index) {
    const StepMetrics before = last_metrics_;
    const Action& action = actions_.at(static_cast<std::size_t>(action_index));
    const SimAction sim_action = decode(action_index);
    StepResult result = sim_.step({sim_action});

    Outcome outcome;
    outcome.metrics = result.metrics;
    outcome.events = std::move(result.events);
    outcome.reward = compute_reward(before, result.metrics, action, reward_);
    outcome.terminal = sim_.done();
    outcome.next = observe();
    outcome.next_mask = valid_mask();
    last_metrics_ = result.metrics;
    return outcome;
}

RewardConfig with_scenario_norms(RewardConfig cfg, const Simulation& sim) {
    double norm = 0.0;
    for (const auto& pm : sim.state().pms) norm += pm.power_peak * sim.config().step_seconds;
    if (norm > 0.0) cfg.energy_norm = norm;
    return cfg;
}

double greedy_rollout(SimEnv& env, const QNetwork& qnet, double* total_energy) {
    env.reset();
    double total = 0.0;
    double energy = 0.0;
    while (!env.done()) {
        const int a = greedy_action(qnet, env.observe(), env.valid_mask());
        const SimEnv::Outcome outcome = env.step(a);
        total += outcome.reward;
        energy += outcome.metrics.energy_joules;
    }
    if (total_energy) *total_energy = energy;
    return total;
}

double random_rollout(SimEnv& env, Rng& rng, double* total_energy) {
    env.reset();
    double total = 0.0;
    double energy = 0.0;
    while (!env.done()) {
        const ActionMask mask = env.valid_mask();
        std::vector<int> valid;
        for (std::size_t i = 0; i < mask.size(); ++i)
            if (mask[i]) valid.push_back(static_cast<int>(i));
        if (valid.empty()) throw ConfigError("no valid action available");
        const int a = valid[static_cast<std::size_t>(
            rng.integer(static_cast<std::uint64_t>(valid.size())))];
        const SimEnv::Outcome outcome = env.step(a);
        total += outcome.reward;
        energy += outcome.metrics.energy_joules;
    }
    if (total_energy) *total_energy = energy;
    return total;
}

ToyMdp enumerate_mdp(const SimEnv& env, std::size_t max_pairs) {
    const Scenario& scenario = env.scenario();
    const ActionSpace& actions = env.actions();
    const std::size_t n_actions = actions.size();

    Simulation start = env.sim();
    start.reset();

    std::vector<Simulation> sims;
    std::map<std::string, int> ids;
    auto intern = [&](Simulation sim) {
        const std::string key = state_key(sim.state());
        auto it = ids.find(key);
        if (it != ids.end()) return it->second;
        const int id = static_cast<int>(sims.size());
        if ((sims.size() + 1) * n_actions > max_pairs)
            throw SizeError("environment exceeds the enumerable state-action budget");
        ids.emplace(key, id);
        sims.push_back(std::move(sim));
        return id;
    };

    ToyMdp mdp;
    mdp.start = intern(std::move(start));

    // Expanding states in id order makes the numbering deterministic.
    for (int id = 0; id < static_cast<int>(sims.size()); ++id) {
        const auto idu = static_cast<std::size_t>(id);
        mdp.next.emplace_back(n_actions, id);
        mdp.reward.emplace_back(n_actions, 0.0);
        mdp.valid.emplace_back(n_actions, 0);
        mdp.terminal.push_back(sims[idu].done() ? 1 : 0);
        if (mdp.terminal[idu]) continue;

        const ActionMask mask = compute_mask(sims[idu], scenario, actions);
        for (std::size_t a = 0; a < n_actions; ++a) {
            if (!mask[a]) continue;
            Simulation branch = sims[idu];
            const StepMetrics before = branch.metrics_snapshot();
            const SimAction sim_action = decode_action(branch, scenario, actions.at(a));
            const StepResult result = branch.step({sim_action});
            const double r = compute_reward(before, result.metrics, actions.at(a),
                                            env.reward_config());
            const int next_id = intern(std::move(branch));
            mdp.valid[idu][a] = 1;
            mdp.reward[idu][a] = r;
            mdp.next[idu][a] = next_id;
        }
    }

    mdp.n_states = static_cast<int>(sims.size());
    mdp.n_actions = static_cast<int>(n_actions);
    mdp.validate();
    return mdp;
}

} // namespace vmsim::dqn
