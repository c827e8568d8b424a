#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vmsim/errors.hpp"

namespace vmsim {

using VmId = std::string;
using PmId = std::string;
using Step = std::int64_t;

struct Point2D {
    double x = 0.0;
    double y = 0.0;
};

double euclidean(const Point2D& a, const Point2D& b);

struct PhysicalMachine {
    PmId id;
    double cpu_capacity = 1.0;   // normalized CPU units, 1.0 = one core-equivalent
    double mem_capacity = 1024;  // MiB
    double power_idle = 100.0;   // watts
    double power_peak = 200.0;   // watts
    int fault_domain = 0;
    Point2D location;

    void validate() const;
};

struct VirtualMachine {
    VmId id;
    double cpu_demand = 0.0;   // time-varying, driven by trace
    double mem_demand = 0.0;   // MiB
    double storage_io = 0.0;   // units/step
    double net_io = 0.0;       // units/step
    double mem_footprint = 0.0;  // MiB copied during migration
    std::optional<PmId> placement;
    std::optional<std::string> group;  // anti-affinity group

    // Kernel bookkeeping: step at which this VM last started a migration.
    // Policies read it to honor per-VM cooldowns and stay pure.
    std::optional<Step> last_migration_step;

    void validate() const;
};

// The seven per-decision features of a (VM, PM) pair, normalized.
struct FeatureVector {
    double vm_cpu = 0.0;            // [0,1]
    double vm_mem = 0.0;            // [0,1]
    double vm_storage_io = 0.0;     // normalized rate
    double vm_net_io = 0.0;         // normalized rate
    double pm_cpu_remaining = 0.0;  // [0,1]
    double pm_mem_remaining = 0.0;  // [0,1]
    double pm_power = 0.0;          // watts / power_peak
};

struct HardConstraint {
    // AntiAffinity: every VM of the group must sit in a distinct fault domain.
    std::string group;
};

struct SoftConstraint {
    enum class Kind { Proximity, CoLocation };
    Kind kind = Kind::Proximity;
    double weight = 0.0;
    std::string group;  // CoLocation only

    void validate() const;
};

struct UserRequest {
    std::string id;
    Step arrival_time = 0;
    std::vector<VirtualMachine> vms;
    Step duration = 1;
    std::vector<HardConstraint> hard;
    std::vector<SoftConstraint> soft;
    Point2D origin;

    void validate() const;
};

enum class MigrationPhase { Preparation, Transfer, Switchover, Done };

struct MigrationJob {
    VmId vm;
    PmId source;
    PmId target;
    MigrationPhase phase = MigrationPhase::Preparation;
    double bytes_remaining = 0.0;  // MiB
    Step started_at = 0;
    Step preparation_steps_remaining = 0;
    Step downtime_steps_remaining = 0;
};

// A request currently running in the cluster.
struct AdmittedRequest {
    UserRequest request;
    std::vector<VmId> vm_ids;
    Step completes_at = 0;  // arrival_time + duration
};

struct ClusterState {
    Step time = 0;
    std::vector<PhysicalMachine> pms;
    std::vector<VirtualMachine> vms;
    std::vector<MigrationJob> migrations;       // in-flight only
    std::deque<UserRequest> pending_requests;   // FIFO deferred queue
    std::vector<AdmittedRequest> admitted;

    // Per-trace normalization constants for the I/O feature rates.
    double max_storage_io = 1.0;
    double max_net_io = 1.0;

    const PhysicalMachine& pm(const PmId& id) const;
    const VirtualMachine& vm(const VmId& id) const;
    VirtualMachine& vm_mut(const VmId& id);
    bool has_pm(const PmId& id) const;
    bool has_vm(const VmId& id) const;

    // Demand of all VMs placed on p.
    double cpu_used(const PmId& p) const;
    double mem_used(const PmId& p) const;
    // Demand reserved on p by inbound (not yet completed) migrations.
    double cpu_reserved(const PmId& p) const;
    double mem_reserved(const PmId& p) const;
    // Aggregate net_io of VMs placed on p.
    double net_io_on(const PmId& p) const;
    int placed_vm_count(const PmId& p) const;
    int inbound_migration_count(const PmId& p) const;

    bool is_migrating(const VmId& v) const;
};

// True iff every PM satisfies placed + reserved <= capacity for cpu and mem,
// within `tol`.
bool capacity_invariant_holds(const ClusterState& state, double tol = 1e-9);

} // namespace vmsim
