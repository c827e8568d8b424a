#pragma once

#include "vmsim/mlp.hpp"
#include "vmsim/types.hpp"

namespace vmsim {

// Power model used by the simulator and by featurization.
struct PowerModel {
    enum class Kind { Linear, Mlp };
    Kind kind = Kind::Linear;
    MlpModel mlp;  // used when kind == Mlp; input (util, vm_count/cpu_cap, net_io_norm)
    // When set, a PM hosting no VMs and receiving no migration draws 0 W
    // instead of idle power.
    bool powered_off_when_empty = false;
};

// Energy-proportional baseline: idle + (peak - idle) * utilization.
double linear_power(const PhysicalMachine& pm, double utilization);

// Power draw of one PM under the chosen model. `utilization` is placed cpu
// demand / capacity, `vm_count` the number of placed VMs, `inbound` the
// number of in-flight migrations targeting the PM (a receiving PM is never
// powered off).
double pm_power(const PhysicalMachine& pm, double utilization, int vm_count,
                int inbound, double net_io_norm, const PowerModel& model);

// Sum of per-PM power over the cluster. Per-PM utilization is the placed cpu
// demand divided by capacity.
double cluster_power(const ClusterState& state, const PowerModel& model);

} // namespace vmsim
