#include "vmsim/dqn.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "vmsim/energy.hpp"
#include "vmsim/env.hpp"
#include "vmsim/errors.hpp"

namespace vmsim::dqn {

void Scenario::validate() const {
    if (pm_order.empty()) throw ConfigError("scenario needs at least one PM");
    std::set<PmId> pm_ids(pm_order.begin(), pm_order.end());
    if (pm_ids.size() != pm_order.size()) throw ConfigError("scenario pm_order has duplicates");
    std::set<VmId> vm_ids(vm_order.begin(), vm_order.end());
    if (vm_ids.size() != vm_order.size()) throw ConfigError("scenario vm_order has duplicates");
    if (request_slots < 0) throw ConfigError("request_slots must be >= 0");
    if (max_pending < 1) throw ConfigError("max_pending must be >= 1");
    if (max_migrations < 1) throw ConfigError("max_migrations must be >= 1");
}

std::size_t Scenario::state_dim() const {
    std::size_t dim = 3 * pm_order.size() + 4 * vm_order.size() + 2;
    if (include_placement) dim += vm_order.size();
    return dim;
}

ActionSpace::ActionSpace(const Scenario& scenario) : scenario_(scenario) {
    scenario.validate();
    for (std::size_t v = 0; v < scenario.vm_order.size(); ++v) {
        for (std::size_t p = 0; p < scenario.pm_order.size(); ++p) {
            Action a;
            a.kind = Action::Kind::Migrate;
            a.vm = static_cast<int>(v);
            a.pm = static_cast<int>(p);
            actions_.push_back(a);
        }
    }
    for (int s = 0; s < scenario.request_slots; ++s) {
        for (std::size_t p = 0; p < scenario.pm_order.size(); ++p) {
            Action a;
            a.kind = Action::Kind::Place;
            a.slot = s;
            a.pm = static_cast<int>(p);
            actions_.push_back(a);
        }
    }
    actions_.push_back(Action{Action::Kind::Defer, -1, -1, -1});
    actions_.push_back(Action{Action::Kind::NoOp, -1, -1, -1});
}

const Action& ActionSpace::at(std::size_t index) const {
    if (index >= actions_.size()) throw InputError("action index out of range");
    return actions_[index];
}

std::string ActionSpace::descriptor(std::size_t index) const {
    const Action& a = at(index);
    switch (a.kind) {
    case Action::Kind::Migrate:
        return "migrate " + scenario_.vm_order[static_cast<std::size_t>(a.vm)] + " -> " +
               scenario_.pm_order[static_cast<std::size_t>(a.pm)];
    case Action::Kind::Place:
        return "place slot " + std::to_string(a.slot) + " -> " +
               scenario_.pm_order[static_cast<std::size_t>(a.pm)];
    case Action::Kind::Defer:
        return "defer";
    case Action::Kind::NoOp:
        return "noop";
    }
    return "?";
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::uint64_t seed)
    : capacity_(capacity), rng_(seed) {
    if (capacity_ < 1) throw ConfigError("replay capacity must be >= 1");
}

void ReplayBuffer::push(Transition t) {
    if (storage_.size() == capacity_) storage_.pop_front();
    storage_.push_back(std::move(t));
}

std::vector<Transition> ReplayBuffer::sample(std::size_t n) {
    if (storage_.empty()) throw InputError("cannot sample from an empty replay buffer");
    std::vector<Transition> batch;
    batch.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        batch.push_back(storage_[static_cast<std::size_t>(rng_.integer(
            static_cast<std::uint64_t>(storage_.size())))]);
    return batch;
}

Eigen::VectorXd QNetwork::q_values(const MdpStateVec& s) const {
    return mlp_forward(model, s);
}

void RewardConfig::validate() const {
    const double weights[] = {w_util, w_energy, w_balance, w_migration, w_soft};
    bool any = false;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w))
            throw ConfigError("reward weights must be finite and >= 0");
        any = any || w > 0.0;
    }
    if (!any) throw ConfigError("at least one reward weight must be > 0");
    if (!(shaping_bonus >= 0.0) || !std::isfinite(shaping_bonus))
        throw ConfigError("shaping_bonus must be finite and >= 0");
    if (!(energy_norm > 0.0)) throw ConfigError("energy_norm must be > 0");
    if (!(soft_norm > 0.0)) throw ConfigError("soft_norm must be > 0");
}

void AgentConfig::validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in [0, 1]");
    if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0) ||
        !(epsilon_end >= 0.0 && epsilon_end <= 1.0))
        throw ConfigError("epsilon bounds must be in [0, 1]");
    if (epsilon_end > epsilon_start) throw ConfigError("epsilon_end must be <= epsilon_start");
    if (epsilon_decay_steps < 1) throw ConfigError("epsilon_decay_steps must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (target_sync_every < 1) throw ConfigError("target_sync_every must be >= 1");
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
    if (replay_capacity < 1) throw ConfigError("replay_capacity must be >= 1");
    for (int d : hidden_dims)
        if (d < 1) throw ConfigError("hidden dims must be >= 1");
    if (!(init_scale > 0.0)) throw ConfigError("init_scale must be > 0");
    reward.validate();
}

MdpStateVec encode_state(const ClusterState& state, const Scenario& scenario) {
    scenario.validate();
    double max_cpu = 0.0;
    double max_mem = 0.0;
    for (const auto& pm_id : scenario.pm_order) {
        if (!state.has_pm(pm_id)) throw ConfigError("scenario PM " + pm_id + " not in state");
        const PhysicalMachine& p = state.pm(pm_id);
        max_cpu = std::max(max_cpu, p.cpu_capacity);
        max_mem = std::max(max_mem, p.mem_capacity);
    }

    MdpStateVec out(static_cast<Eigen::Index>(scenario.state_dim()));
    Eigen::Index k = 0;
    for (const auto& pm_id : scenario.pm_order) {
        const PhysicalMachine& p = state.pm(pm_id);
        const double cpu_free =
            p.cpu_capacity - state.cpu_used(pm_id) - state.cpu_reserved(pm_id);
        const double mem_free =
            p.mem_capacity - state.mem_used(pm_id) - state.mem_reserved(pm_id);
        const double util = std::clamp(state.cpu_used(pm_id) / p.cpu_capacity, 0.0, 1.0);
        out(k++) = cpu_free / p.cpu_capacity;
        out(k++) = mem_free / p.mem_capacity;
        out(k++) = p.power_peak > 0.0 ? linear_power(p, util) / p.power_peak : 0.0;
    }
    for (const auto& vm_id : scenario.vm_order) {
        if (state.has_vm(vm_id)) {
            const VirtualMachine& v = state.vm(vm_id);
            out(k++) = max_cpu > 0.0 ? v.cpu_demand / max_cpu : 0.0;
            out(k++) = max_mem > 0.0 ? v.mem_demand / max_mem : 0.0;
            out(k++) = v.storage_io / std::max(1e-12, state.max_storage_io);
            out(k++) = v.net_io / std::max(1e-12, state.max_net_io);
        } else {
            out(k++) = 0.0;
            out(k++) = 0.0;
            out(k++) = 0.0;
            out(k++) = 0.0;
        }
    }
    if (scenario.include_placement) {
        const double denom = std::max<std::size_t>(1, scenario.pm_order.size() - 1);
        for (const auto& vm_id : scenario.vm_order) {
            double feature = -1.0;
            if (state.has_vm(vm_id)) {
                const auto& placement = state.vm(vm_id).placement;
                if (placement) {
                    const auto it = std::find(scenario.pm_order.begin(),
                                              scenario.pm_order.end(), *placement);
                    if (it != scenario.pm_order.end())
                        feature = static_cast<double>(it - scenario.pm_order.begin()) / denom;
                }
            }
            out(k++) = feature;
        }
    }
    out(k++) = static_cast<double>(state.pending_requests.size()) / scenario.max_pending;
    out(k++) = static_cast<double>(state.migrations.size()) / scenario.max_migrations;

    for (Eigen::Index i = 0; i < out.size(); ++i) {
        if (!std::isfinite(out(i))) throw InputError("non-finite state feature");
        out(i) = std::clamp(out(i), -1.0, 1.0);
    }
    return out;
}

double compute_reward(const StepMetrics& before, const StepMetrics& after, const Action& action,
                      const RewardConfig& cfg) {
    const double energy_before = before.energy_joules / cfg.energy_norm;
    const double energy_after = after.energy_joules / cfg.energy_norm;
    const double migration = action.kind == Action::Kind::Migrate ? 1.0 : 0.0;
    const double soft = after.soft_penalty_total / cfg.soft_norm;
    return cfg.w_util * after.cpu_utilization - cfg.w_energy * energy_after -
           cfg.w_balance * after.util_stddev - cfg.w_migration * migration - cfg.w_soft * soft +
           cfg.shaping_bonus * (energy_before - energy_after);
}

int select_action(const QNetwork& qnet, const MdpStateVec& s, double epsilon,
                  const ActionMask& valid_mask, Rng& rng) {
    std::vector<int> valid;
    for (std::size_t i = 0; i < valid_mask.size(); ++i)
        if (valid_mask[i]) valid.push_back(static_cast<int>(i));
    if (valid.empty()) throw ConfigError("select_action needs at least one valid action");

    if (rng.uniform() < epsilon)
        return valid[static_cast<std::size_t>(
            rng.integer(static_cast<std::uint64_t>(valid.size())))];

    const Eigen::VectorXd q = qnet.q_values(s);
    if (q.size() != static_cast<Eigen::Index>(valid_mask.size()))
        throw ConfigError("Q output size does not match the action mask");
    int best = valid.front();
    for (int idx : valid)
        if (q(idx) > q(best)) best = idx;
    return best;
}

double td_target(double r, const MdpStateVec& s_next, bool terminal, const QNetwork& q_target,
                 double gamma, const ActionMask& valid_mask_next) {
    if (terminal || gamma == 0.0) return r;
    const Eigen::VectorXd q = q_target.q_values(s_next);
    bool any = false;
    double best = 0.0;
    for (std::size_t i = 0; i < valid_mask_next.size() &&
                            i < static_cast<std::size_t>(q.size());
         ++i) {
        if (!valid_mask_next[i]) continue;
        if (!any || q(static_cast<Eigen::Index>(i)) > best) {
            best = q(static_cast<Eigen::Index>(i));
            any = true;
        }
    }
    if (!any) return r;
    return r + gamma * best;
}

double train_step(QNetwork& qnet, const QNetwork& q_target, const std::vector<Transition>& batch,
                  const AgentConfig& cfg) {
    if (batch.empty()) throw InputError("train_step needs a non-empty batch");

    MlpGradients grads = MlpGradients::zeros_like(qnet.model);
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (const auto& t : batch) {
        MlpForwardCache cache;
        const Eigen::VectorXd q = mlp_forward_cached(qnet.model, t.s, cache);
        if (t.a < 0 || t.a >= q.size()) throw InputError("transition action index out of range");
        const double y = td_target(t.r, t.s_next, t.terminal, q_target, cfg.gamma, t.valid_next);
        const double diff = q(t.a) - y;
        loss += diff * diff * inv_n;

        Eigen::VectorXd dLdy = Eigen::VectorXd::Zero(q.size());
        dLdy(t.a) = 2.0 * diff * inv_n;
        mlp_backward(qnet.model, cache, dLdy, grads);
    }
    mlp_apply_gradients(qnet.model, grads, cfg.learning_rate);
    return loss;
}

void sync_target(const QNetwork& qnet, QNetwork& q_target) { q_target.model = qnet.model; }

double linear_epsilon(const AgentConfig& cfg, std::int64_t global_step) {
    if (global_step >= cfg.epsilon_decay_steps) return cfg.epsilon_end;
    if (global_step <= 0) return cfg.epsilon_start;
    const double t = static_cast<double>(global_step) /
                     static_cast<double>(cfg.epsilon_decay_steps);
    return cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * t;
}

DqnTrainResult run_training(SimEnv& env, const AgentConfig& cfg, int episodes) {
    cfg.validate();
    if (episodes < 0) throw ConfigError("episodes must be >= 0");

    env.reset();
    const std::size_t input_dim = static_cast<std::size_t>(env.observe().size());
    const std::size_t n_actions = env.actions().size();
    std::vector<int> dims;
    dims.push_back(static_cast<int>(input_dim));
    for (int d : cfg.hidden_dims) dims.push_back(d);
    dims.push_back(static_cast<int>(n_actions));

    DqnTrainResult result;
    result.qnet.model =
        init_mlp(dims, Activation::Tanh, derive_seed(cfg.seed, "init"), cfg.init_scale);
    QNetwork target = result.qnet;

    Rng agent_rng(derive_seed(cfg.seed, "agent"));
    ReplayBuffer buffer(cfg.replay_capacity, derive_seed(cfg.seed, "replay"));

    std::int64_t global_step = 0;
    for (int ep = 0; ep < episodes; ++ep) {
        env.reset();
        MdpStateVec s = env.observe();
        ActionMask mask = env.valid_mask();
        double ep_return = 0.0;
        while (!env.done()) {
            const double epsilon = linear_epsilon(cfg, global_step);
            const int a = select_action(result.qnet, s, epsilon, mask, agent_rng);
            SimEnv::Outcome outcome = env.step(a);
            ep_return += outcome.reward;

            Transition t;
            t.s = s;
            t.a = a;
            t.r = outcome.reward;
            t.s_next = outcome.next;
            t.terminal = outcome.terminal;
            t.valid_next = outcome.next_mask;
            buffer.push(std::move(t));

            if (buffer.size() >= static_cast<std::size_t>(cfg.batch_size)) {
                const auto batch = buffer.sample(static_cast<std::size_t>(cfg.batch_size));
                train_step(result.qnet, target, batch, cfg);
            }
            ++global_step;
            if (global_step % cfg.target_sync_every == 0) sync_target(result.qnet, target);

            s = std::move(outcome.next);
            mask = std::move(outcome.next_mask);
        }
        result.returns.push_back(ep_return);
    }
    return result;
}

void ToyMdp::validate() const {
    if (n_states < 1) throw InputError("MDP needs at least one state");
    if (n_actions < 1) throw InputError("MDP needs at least one action");
    if (start < 0 || start >= n_states) throw InputError("MDP start state out of range");
    auto check_shape = [&](std::size_t rows) {
        if (rows != static_cast<std::size_t>(n_states))
            throw InputError("MDP table row count does not match n_states");
    };
    check_shape(next.size());
    check_shape(reward.size());
    check_shape(valid.size());
    check_shape(terminal.size());
    for (int s = 0; s < n_states; ++s) {
        const auto su = static_cast<std::size_t>(s);
        if (next[su].size() != static_cast<std::size_t>(n_actions) ||
            reward[su].size() != static_cast<std::size_t>(n_actions) ||
            valid[su].size() != static_cast<std::size_t>(n_actions))
            throw InputError("MDP table column count does not match n_actions");
        bool any_valid = false;
        for (int a = 0; a < n_actions; ++a) {
            const auto au = static_cast<std::size_t>(a);
            if (!valid[su][au]) continue;
            any_valid = true;
            if (next[su][au] < 0 || next[su][au] >= n_states)
                throw InputError("MDP transition target out of range");
            if (!std::isfinite(reward[su][au])) throw InputError("MDP reward must be finite");
        }
        if (!terminal[su] && !any_valid)
            throw InputError("non-terminal MDP state without valid actions");
    }
}

std::size_t ToyMdp::state_action_pairs() const {
    return static_cast<std::size_t>(n_states) * static_cast<std::size_t>(n_actions);
}

ValueIterationResult value_iteration_oracle(const ToyMdp& mdp, double gamma) {
    mdp.validate();
    if (mdp.state_action_pairs() > 10000)
        throw SizeError("MDP exceeds 10,000 state-action pairs");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in [0, 1]");

    const int n = mdp.n_states;
    std::vector<double> values(static_cast<std::size_t>(n), 0.0);
    const std::int64_t max_sweeps = gamma >= 1.0 ? n + 2 : 1000000;

    bool converged = false;
    for (std::int64_t sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
        double residual = 0.0;
        for (int s = 0; s < n; ++s) {
            const auto su = static_cast<std::size_t>(s);
            if (mdp.terminal[su]) {
                values[su] = 0.0;
                continue;
            }
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < mdp.n_actions; ++a) {
                const auto au = static_cast<std::size_t>(a);
                if (!mdp.valid[su][au]) continue;
                const double q =
                    mdp.reward[su][au] + gamma * values[static_cast<std::size_t>(mdp.next[su][au])];
                best = std::max(best, q);
            }
            residual = std::max(residual, std::abs(best - values[su]));
            values[su] = best;
        }
        converged = residual < 1e-9;
    }
    if (!converged) throw Error("value iteration did not converge");

    ValueIterationResult result;
    result.values = values;
    result.policy.assign(static_cast<std::size_t>(n), -1);
    for (int s = 0; s < n; ++s) {
        const auto su = static_cast<std::size_t>(s);
        if (mdp.terminal[su]) continue;
        int best_a = -1;
        double best_q = 0.0;
        for (int a = 0; a < mdp.n_actions; ++a) {
            const auto au = static_cast<std::size_t>(a);
            if (!mdp.valid[su][au]) continue;
            const double q =
                mdp.reward[su][au] + gamma * values[static_cast<std::size_t>(mdp.next[su][au])];
            if (best_a < 0 || q > best_q) {
                best_a = a;
                best_q = q;
            }
        }
        result.policy[su] = best_a;
    }
    result.optimal_return = values[static_cast<std::size_t>(mdp.start)];
    return result;
}

} // namespace vmsim::dqn
