#pragma once

#include <map>

#include "vmsim/energy.hpp"
#include "vmsim/types.hpp"

namespace vmsim {

using Assignment = std::map<VmId, PmId>;

// The seven per-decision features for (vm, pm). vm_cpu/vm_mem are fractions
// of the hosting PM's capacity when the VM is placed, else of the candidate.
// Values marginally outside [0,1] from floating-point error are clamped.
FeatureVector featurize(const ClusterState& state, const VmId& vm, const PmId& pm,
                        const PowerModel& power = PowerModel{});

// True iff every anti-affinity group touched by `assignment` occupies
// pairwise-distinct fault domains and no PM exceeds cpu/mem capacity after
// applying the assignment (entries override current placements; in-flight
// reservations still count).
bool check_hard(const ClusterState& state, const Assignment& assignment,
                const std::vector<HardConstraint>& constraints);

// Weighted penalty of the soft constraints under `assignment`:
// Proximity: weight * distance(host location, request origin), summed over
// assigned VMs. CoLocation: weight * sum of pairwise distances among the
// group members' hosts.
double soft_penalty(const ClusterState& state, const Assignment& assignment,
                    const std::vector<SoftConstraint>& constraints,
                    const Point2D& origin);

} // namespace vmsim
