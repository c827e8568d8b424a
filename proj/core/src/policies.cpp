#include "vmsim/policies.hpp"

#include <algorithm>
#include <cmath>

#include "vmsim/errors.hpp"

namespace vmsim {

namespace {

std::vector<PmId> sorted_pm_ids(const ClusterState& state) {
    std::vector<PmId> ids;
    ids.reserve(state.pms.size());
    for (const auto& p : state.pms) ids.push_back(p.id);
    std::sort(ids.begin(), ids.end());
    return ids;
}

ClusterState with_request_vms(const ClusterState& state, const UserRequest& req) {
    ClusterState scratch = state;
    for (const auto& vm : req.vms) scratch.vms.push_back(vm);
    return scratch;
}

// Shared greedy scan. pick_best=false takes the first feasible PM in id
// order, pick_best=true the feasible PM with the least remaining cpu after
// placement.
std::optional<Assignment> greedy_place(const ClusterState& state, const UserRequest& req,
                                       bool pick_best) {
    const std::vector<PmId> pm_ids = sorted_pm_ids(state);
    const ClusterState scratch = with_request_vms(state, req);

    Assignment assignment;
    std::map<PmId, double> extra_cpu;
    for (const auto& vm : req.vms) {
        const PmId* chosen = nullptr;
        double chosen_remaining = 0.0;
        for (const auto& pm_id : pm_ids) {
            Assignment candidate = assignment;
            candidate[vm.id] = pm_id;
            if (!check_hard(scratch, candidate, req.hard)) continue;
            if (!pick_best) {
                chosen = &pm_id;
                break;
            }
            const PhysicalMachine& p = scratch.pm(pm_id);
            const double remaining = p.cpu_capacity - scratch.cpu_used(pm_id) -
                                     scratch.cpu_reserved(pm_id) - extra_cpu[pm_id] -
                                     vm.cpu_demand;
            if (!chosen || remaining < chosen_remaining - 1e-12) {
                chosen = &pm_id;
                chosen_remaining = remaining;
            }
        }
        if (!chosen) return std::nullopt;
        assignment[vm.id] = *chosen;
        extra_cpu[*chosen] += vm.cpu_demand;
    }

    if (!check_hard(scratch, assignment, req.hard)) return std::nullopt;
    return assignment;
}

} // namespace

std::optional<Assignment> first_fit(const ClusterState& state, const UserRequest& req) {
    return greedy_place(state, req, false);
}

std::optional<Assignment> best_fit(const ClusterState& state, const UserRequest& req) {
    return greedy_place(state, req, true);
}

void ThresholdConfig::validate() const {
    if (!(theta_lo >= 0.0 && theta_lo < theta_hi && theta_hi <= 1.0))
        throw ConfigError("thresholds must satisfy 0 <= theta_lo < theta_hi <= 1");
    if (cooldown < 0) throw ConfigError("cooldown must be >= 0");
}

std::vector<MigrationRequest> threshold_migrator(const ClusterState& state,
                                                 const ThresholdConfig& cfg) {
    cfg.validate();
    std::vector<MigrationRequest> proposals;
    const std::vector<PmId> pm_ids = sorted_pm_ids(state);

    // Loads already promised to a receiver earlier in this scan, so a batch
    // of proposals cannot jointly push one PM past theta_hi.
    std::map<PmId, double> promised_cpu;
    std::map<PmId, double> promised_mem;

    for (const auto& source_id : pm_ids) {
        const PhysicalMachine& source = state.pm(source_id);
        const double source_util = state.cpu_used(source_id) / source.cpu_capacity;
        if (source_util <= cfg.theta_hi) continue;

        const VirtualMachine* pick = nullptr;
        for (const auto& vm : state.vms) {
            if (!vm.placement || *vm.placement != source_id) continue;
            if (state.is_migrating(vm.id)) continue;
            if (vm.last_migration_step &&
                state.time - *vm.last_migration_step < cfg.cooldown)
                continue;
            if (!pick || vm.cpu_demand < pick->cpu_demand - 1e-12 ||
                (std::abs(vm.cpu_demand - pick->cpu_demand) <= 1e-12 && vm.id < pick->id))
                pick = &vm;
        }
        if (!pick) continue;

        const PmId* receiver = nullptr;
        double receiver_util = 0.0;
        for (const auto& target_id : pm_ids) {
            if (target_id == source_id) continue;
            const PhysicalMachine& target = state.pm(target_id);
            const double cpu_after = state.cpu_used(target_id) + state.cpu_reserved(target_id) +
                                     promised_cpu[target_id] + pick->cpu_demand;
            const double mem_after = state.mem_used(target_id) + state.mem_reserved(target_id) +
                                     promised_mem[target_id] + pick->mem_demand;
            if (cpu_after > cfg.theta_hi * target.cpu_capacity + 1e-9) continue;
            if (mem_after > target.mem_capacity + 1e-9) continue;
            const double util = state.cpu_used(target_id) / target.cpu_capacity;
            if (!receiver || util < receiver_util - 1e-12) {
                receiver = &target_id;
                receiver_util = util;
            }
        }
        if (!receiver) continue;

        promised_cpu[*receiver] += pick->cpu_demand;
        promised_mem[*receiver] += pick->mem_demand;
        proposals.push_back(MigrationRequest{pick->id, *receiver});
    }
    return proposals;
}

std::optional<Assignment> brute_force_placement(const ClusterState& state,
                                                const UserRequest& req) {
    if (req.vms.size() > 4 || state.pms.size() > 3)
        throw SizeError("brute_force_placement is limited to 4 VMs and 3 PMs");

    const std::vector<PmId> pm_ids = sorted_pm_ids(state);
    if (pm_ids.empty()) return std::nullopt;
    std::vector<VmId> vm_ids;
    for (const auto& vm : req.vms) vm_ids.push_back(vm.id);
    std::sort(vm_ids.begin(), vm_ids.end());

    const ClusterState scratch = with_request_vms(state, req);

    std::optional<Assignment> best;
    double best_penalty = 0.0;
    std::vector<std::size_t> digits(vm_ids.size(), 0);
    while (true) {
        Assignment assignment;
        for (std::size_t i = 0; i < vm_ids.size(); ++i)
            assignment[vm_ids[i]] = pm_ids[digits[i]];
        if (check_hard(scratch, assignment, req.hard)) {
            const double penalty = soft_penalty(scratch, assignment, req.soft, req.origin);
            if (!best || penalty < best_penalty - 1e-12) {
                best = assignment;
                best_penalty = penalty;
            }
        }
        // Odometer with the first VM as the most significant digit: the
        // first minimum found is the lexicographically smallest assignment.
        std::size_t i = vm_ids.size();
        while (i > 0) {
            --i;
            if (++digits[i] < pm_ids.size()) break;
            digits[i] = 0;
            if (i == 0) return best;
        }
        if (vm_ids.empty()) return best;
    }
}

} // namespace vmsim
