#include "vmsim/types.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace vmsim {

namespace {

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

} // namespace

double euclidean(const Point2D& a, const Point2D& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

void PhysicalMachine::validate() const {
    if (id.empty()) throw InputError("PM id must be non-empty");
    if (!(std::isfinite(cpu_capacity) && cpu_capacity > 0.0))
        throw InputError("PM " + id + ": cpu_capacity must be positive");
    if (!(std::isfinite(mem_capacity) && mem_capacity > 0.0))
        throw InputError("PM " + id + ": mem_capacity must be positive");
    if (!finite_nonneg(power_idle)) throw InputError("PM " + id + ": power_idle must be >= 0");
    if (!(std::isfinite(power_peak) && power_peak >= power_idle))
        throw InputError("PM " + id + ": power_peak must be >= power_idle");
    if (!std::isfinite(location.x) || !std::isfinite(location.y))
        throw InputError("PM " + id + ": location must be finite");
}

void VirtualMachine::validate() const {
    if (id.empty()) throw InputError("VM id must be non-empty");
    if (!finite_nonneg(cpu_demand)) throw InputError("VM " + id + ": cpu_demand must be >= 0");
    if (!finite_nonneg(mem_demand)) throw InputError("VM " + id + ": mem_demand must be >= 0");
    if (!finite_nonneg(storage_io)) throw InputError("VM " + id + ": storage_io must be >= 0");
    if (!finite_nonneg(net_io)) throw InputError("VM " + id + ": net_io must be >= 0");
    if (!finite_nonneg(mem_footprint))
        throw InputError("VM " + id + ": mem_footprint must be >= 0");
    if (group && group->empty()) throw InputError("VM " + id + ": group name must be non-empty");
}

void SoftConstraint::validate() const {
    if (!finite_nonneg(weight)) throw InputError("soft constraint weight must be >= 0");
    if (kind == Kind::CoLocation && group.empty())
        throw InputError("co-location constraint needs a group");
}

void UserRequest::validate() const {
    if (id.empty()) throw InputError("request id must be non-empty");
    if (vms.empty()) throw InputError("request " + id + ": needs at least one VM");
    if (arrival_time < 0) throw InputError("request " + id + ": arrival_time must be >= 0");
    if (duration < 1) throw InputError("request " + id + ": duration must be >= 1");
    std::set<VmId> seen;
    for (const auto& vm : vms) {
        vm.validate();
        if (!seen.insert(vm.id).second)
            throw InputError("request " + id + ": duplicate VM id " + vm.id);
        if (vm.placement)
            throw InputError("request " + id + ": VM " + vm.id + " must arrive unplaced");
    }
    for (const auto& sc : soft) sc.validate();
    for (const auto& hc : hard) {
        if (hc.group.empty()) throw InputError("request " + id + ": hard constraint needs a group");
    }
}

const PhysicalMachine& ClusterState::pm(const PmId& id) const {
    for (const auto& p : pms)
        if (p.id == id) return p;
    throw IdError("unknown PM " + id);
}

const VirtualMachine& ClusterState::vm(const VmId& id) const {
    for (const auto& v : vms)
        if (v.id == id) return v;
    throw IdError("unknown VM " + id);
}

VirtualMachine& ClusterState::vm_mut(const VmId& id) {
    for (auto& v : vms)
        if (v.id == id) return v;
    throw IdError("unknown VM " + id);
}

bool ClusterState::has_pm(const PmId& id) const {
    return std::any_of(pms.begin(), pms.end(), [&](const auto& p) { return p.id == id; });
}

bool ClusterState::has_vm(const VmId& id) const {
    return std::any_of(vms.begin(), vms.end(), [&](const auto& v) { return v.id == id; });
}

double ClusterState::cpu_used(const PmId& p) const {
    double total = 0.0;
    for (const auto& v : vms)
        if (v.placement == p) total += v.cpu_demand;
    return total;
}

double ClusterState::mem_used(const PmId& p) const {
    double total = 0.0;
    for (const auto& v : vms)
        if (v.placement == p) total += v.mem_demand;
    return total;
}

double ClusterState::cpu_reserved(const PmId& p) const {
    double total = 0.0;
    for (const auto& job : migrations)
        if (job.target == p) total += vm(job.vm).cpu_demand;
    return total;
}

double ClusterState::mem_reserved(const PmId& p) const {
    double total = 0.0;
    for (const auto& job : migrations)
        if (job.target == p) total += vm(job.vm).mem_demand;
    return total;
}

double ClusterState::net_io_on(const PmId& p) const {
    double total = 0.0;
    for (const auto& v : vms)
        if (v.placement == p) total += v.net_io;
    return total;
}

int ClusterState::placed_vm_count(const PmId& p) const {
    int n = 0;
    for (const auto& v : vms)
        if (v.placement == p) ++n;
    return n;
}

int ClusterState::inbound_migration_count(const PmId& p) const {
    int n = 0;
    for (const auto& job : migrations)
        if (job.target == p) ++n;
    return n;
}

bool ClusterState::is_migrating(const VmId& v) const {
    return std::any_of(migrations.begin(), migrations.end(),
                       [&](const auto& j) { return j.vm == v; });
}

bool capacity_invariant_holds(const ClusterState& state, double tol) {
    for (const auto& p : state.pms) {
        if (state.cpu_used(p.id) + state.cpu_reserved(p.id) > p.cpu_capacity + tol) return false;
        if (state.mem_used(p.id) + state.mem_reserved(p.id) > p.mem_capacity + tol) return false;
    }
    return true;
}

} // namespace vmsim
