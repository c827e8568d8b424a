#include "vmsim/domain.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

namespace vmsim {

namespace {

constexpr double kClampTol = 1e-9;

double clamp01(double v) {
    if (v < 0.0 && v > -kClampTol) return 0.0;
    if (v > 1.0 && v < 1.0 + kClampTol) return 1.0;
    return std::clamp(v, 0.0, 1.0);
}

// Host of `id` under the assignment, falling back to the current placement.
std::optional<PmId> effective_host(const ClusterState& state, const Assignment& assignment,
                                   const VmId& id) {
    if (auto it = assignment.find(id); it != assignment.end()) return it->second;
    return state.vm(id).placement;
}

} // namespace

FeatureVector featurize(const ClusterState& state, const VmId& vm_id, const PmId& pm_id,
                        const PowerModel& power) {
    const VirtualMachine& v = state.vm(vm_id);
    const PhysicalMachine& p = state.pm(pm_id);
    const PhysicalMachine& basis = v.placement ? state.pm(*v.placement) : p;

    FeatureVector f;
    f.vm_cpu = clamp01(v.cpu_demand / basis.cpu_capacity);
    f.vm_mem = clamp01(v.mem_demand / basis.mem_capacity);
    f.vm_storage_io = clamp01(v.storage_io / std::max(1e-12, state.max_storage_io));
    f.vm_net_io = clamp01(v.net_io / std::max(1e-12, state.max_net_io));
    f.pm_cpu_remaining = clamp01(1.0 - state.cpu_used(pm_id) / p.cpu_capacity);
    f.pm_mem_remaining = clamp01(1.0 - state.mem_used(pm_id) / p.mem_capacity);

    const double util = clamp01(state.cpu_used(pm_id) / p.cpu_capacity);
    const double watts =
        pm_power(p, util, state.placed_vm_count(pm_id), state.inbound_migration_count(pm_id),
                 state.net_io_on(pm_id) / std::max(1e-12, state.max_net_io), power);
    f.pm_power = p.power_peak > 0.0 ? clamp01(watts / p.power_peak) : 0.0;
    return f;
}

bool check_hard(const ClusterState& state, const Assignment& assignment,
                const std::vector<HardConstraint>& constraints) {
    // Capacity after applying the assignment; in-flight reservations count.
    for (const auto& p : state.pms) {
        double cpu = state.cpu_reserved(p.id);
        double mem = state.mem_reserved(p.id);
        for (const auto& v : state.vms) {
            const auto host = effective_host(state, assignment, v.id);
            if (host == p.id) {
                cpu += v.cpu_demand;
                mem += v.mem_demand;
            }
        }
        if (cpu > p.cpu_capacity + kClampTol) return false;
        if (mem > p.mem_capacity + kClampTol) return false;
    }

    for (const auto& hc : constraints) {
        std::set<int> domains;
        for (const auto& v : state.vms) {
            if (v.group != hc.group) continue;
            const auto host = effective_host(state, assignment, v.id);
            if (!host) continue;
            if (!domains.insert(state.pm(*host).fault_domain).second) return false;
        }
    }
    return true;
}

double soft_penalty(const ClusterState& state, const Assignment& assignment,
                    const std::vector<SoftConstraint>& constraints, const Point2D& origin) {
    double total = 0.0;
    for (const auto& sc : constraints) {
        if (sc.weight == 0.0) continue;
        switch (sc.kind) {
        case SoftConstraint::Kind::Proximity:
            for (const auto& [vm_id, pm_id] : assignment)
                total += sc.weight * euclidean(state.pm(pm_id).location, origin);
            break;
        case SoftConstraint::Kind::CoLocation: {
            std::vector<PmId> hosts;
            for (const auto& v : state.vms) {
                if (v.group != sc.group) continue;
                if (auto host = effective_host(state, assignment, v.id)) hosts.push_back(*host);
            }
            for (std::size_t i = 0; i < hosts.size(); ++i)
                for (std::size_t j = i + 1; j < hosts.size(); ++j)
                    total += sc.weight *
                             euclidean(state.pm(hosts[i]).location, state.pm(hosts[j]).location);
            break;
        }
        }
    }
    return total;
}

} // namespace vmsim
