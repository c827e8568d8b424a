#pragma once

#include <optional>
#include <vector>

#include "vmsim/domain.hpp"
#include "vmsim/types.hpp"

namespace vmsim {

// Places the request's VMs on the first PMs (ascending id) where the joint
// assignment satisfies hard constraints. nullopt when no feasible assignment
// is found by the greedy scan.
std::optional<Assignment> first_fit(const ClusterState& state, const UserRequest& req);

// Like first_fit but each VM goes to the feasible PM with the least
// post-placement remaining cpu (ties: lowest PM id).
std::optional<Assignment> best_fit(const ClusterState& state, const UserRequest& req);

struct ThresholdConfig {
    double theta_hi = 0.8;   // source PM utilization that triggers migration
    double theta_lo = 0.5;   // underload mark, kept below theta_hi
    Step cooldown = 10;      // steps a migrated VM is exempt from re-selection

    void validate() const;
};

struct MigrationRequest {
    VmId vm;
    PmId target;
};

// Scans PMs in id order; each PM above theta_hi proposes moving its
// smallest-cpu VM (not in cooldown, not mid-migration) to the least-utilized
// PM that stays at or below theta_hi after receiving it. One migration per
// source per step; deterministic ordering by PM id then VM id.
std::vector<MigrationRequest> threshold_migrator(const ClusterState& state,
                                                 const ThresholdConfig& cfg);

// Exhaustive search over all |PMs|^|VMs| assignments of the request's VMs.
// Feasible assignments are ranked by soft penalty, ties broken by the
// lexicographically smallest (vm_id, pm_id) sequence. nullopt if infeasible.
// Guarded to tiny instances: throws SizeError beyond 4 VMs or 3 PMs.
std::optional<Assignment> brute_force_placement(const ClusterState& state,
                                                const UserRequest& req);

} // namespace vmsim
