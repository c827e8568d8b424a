#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "vmsim/domain.hpp"
#include "vmsim/energy.hpp"
#include "vmsim/trace.hpp"
#include "vmsim/types.hpp"

namespace vmsim {

struct SimConfig {
    double step_seconds = 1.0;
    double migration_bandwidth = 1024.0;  // MiB per step
    Step preparation_steps = 1;
    Step switchover_steps = 1;
    std::uint64_t seed = 0;
    Step horizon = 100;

    void validate() const;
};

enum class SimEventKind {
    RequestArrived,
    RequestAdmitted,
    RequestDeferred,
    MigrationStarted,
    MigrationPhaseChanged,
    MigrationCompleted,
    RequestCompleted,
    ActionRejected,
};

const char* to_string(SimEventKind kind);

struct SimEvent {
    Step time = 0;
    SimEventKind kind = SimEventKind::RequestArrived;
    std::string request;  // request id, when applicable
    VmId vm;
    PmId pm;              // target / placement PM, when applicable
    std::string detail;   // phase names, rejection reasons
};

struct StepMetrics {
    Step time = 0;
    double total_power = 0.0;      // watts
    double energy_joules = 0.0;    // total_power * step_seconds
    double cpu_utilization = 0.0;  // mean over powered-on PMs
    double util_stddev = 0.0;      // population stddev over the same PMs
    int migrations_active = 0;
    int downtime_steps = 0;        // VM-steps unavailable this step
    int deferred_requests = 0;     // pending queue length after the step
    double soft_penalty_total = 0.0;
};

enum class MigrationReject {
    VmUnknown,
    VmUnplaced,
    TargetUnknown,
    TargetIsSource,
    InsufficientCapacity,
    AlreadyMigrating,
};

const char* to_string(MigrationReject reason);

enum class AdmitReject {
    ConstraintViolation,
    DuplicateVmId,
    UnknownPm,
    IncompleteAssignment,
};

const char* to_string(AdmitReject reason);

// Validates and starts a migration: the job is appended to state.migrations
// in Preparation (degenerate configs skip ahead: no preparation steps ->
// Transfer, and a zero footprint as well -> Switchover) and the VM's demand
// is reserved on the target for the whole flight (double-booking).
std::variant<MigrationJob, MigrationReject> start_migration(ClusterState& state, const VmId& vm,
                                                            const PmId& target,
                                                            const SimConfig& cfg);

// Preflight of start_migration's checks without mutating state.
std::optional<MigrationReject> can_start_migration(const ClusterState& state, const VmId& vm,
                                                   const PmId& target);

struct AdvanceResult {
    std::vector<SimEvent> events;
    int downtime_steps = 0;  // jobs that spent this step in Switchover
};

// Advances every in-flight job by one step. Completion flips the VM's
// placement to the target and releases the reservation.
AdvanceResult advance_migrations(ClusterState& state, const SimConfig& cfg);

// Applies an admission decision: placement -> VMs instantiated and placed
// (completion scheduled at arrival_time + duration), nullopt -> request
// appended to the FIFO pending queue. A placement violating hard constraints
// or naming unknown ids is rejected without mutating state.
std::variant<SimEvent, AdmitReject> admit_request(ClusterState& state, const UserRequest& req,
                                                  const std::optional<Assignment>& placement);

// One decision submitted to step(). Place/Defer target the k-th request due
// this step (deferred queue first, then new arrivals).
struct SimAction {
    enum class Kind { Place, Migrate, Defer, NoOp };
    Kind kind = Kind::NoOp;
    std::size_t request_slot = 0;  // Place / Defer
    Assignment placement;          // Place
    VmId vm;                       // Migrate
    PmId target;                   // Migrate

    static SimAction place(std::size_t slot, Assignment assignment);
    static SimAction migrate(VmId vm, PmId target);
    static SimAction defer(std::size_t slot = 0);
    static SimAction noop();
};

struct StepResult {
    StepMetrics metrics;
    std::vector<SimEvent> events;
};

// Deterministic discrete-time simulation. Owns the cluster state, the trace
// driving demand and arrivals, and the migration lifecycle.
class Simulation {
public:
    struct Options {
        bool initial_first_fit = false;   // default round-robin pre-placement
        double proximity_weight = 0.0;    // attached to trace-driven requests
    };

    Simulation(std::vector<PhysicalMachine> pms, WorkloadTrace trace, SimConfig cfg,
               PowerModel power, Options options);
    Simulation(std::vector<PhysicalMachine> pms, WorkloadTrace trace, SimConfig cfg,
               PowerModel power = PowerModel{});

    // Returns to the initial state: standing VMs (trace VMs present at time
    // 0) pre-placed round-robin or first-fit, clock at 0.
    void reset();

    const ClusterState& state() const { return state_; }
    const SimConfig& config() const { return cfg_; }
    const PowerModel& power_model() const { return power_; }
    const WorkloadTrace& trace() const { return trace_; }

    bool done() const { return state_.time >= cfg_.horizon; }

    // Requests a policy may act on at the current step: the deferred queue
    // (FIFO order) followed by this step's new arrivals.
    std::vector<UserRequest> due_requests() const;

    // Advances one step:
    //   (1) trace-driven demand updates  (2) arrivals + admission decisions
    //   (3) migration starts             (4) migration phase advance
    //   (5) request completions          (6) metrics                (7) clock
    // Invalid actions are rejected and reported as events, never applied.
    // Due requests not addressed by any Place action are auto-deferred.
    StepResult step(const std::vector<SimAction>& actions);

    // Metrics of the current configuration without advancing the clock.
    StepMetrics metrics_snapshot() const;

private:
    void apply_demand_updates();
    void process_admissions(const std::vector<SimAction>& actions, std::vector<SimEvent>& events);
    void start_migrations(const std::vector<SimAction>& actions, std::vector<SimEvent>& events);
    void complete_requests(std::vector<SimEvent>& events);
    StepMetrics compute_metrics(int downtime_steps) const;
    double soft_penalty_now() const;

    std::vector<PhysicalMachine> initial_pms_;
    ClusterState state_;
    WorkloadTrace trace_;
    SimConfig cfg_;
    PowerModel power_;
    Options options_;
    std::size_t next_record_ = 0;   // cursor into trace_.records
    std::size_t next_arrival_ = 0;  // cursor into trace_.arrivals
};

// Closed-form migration duration in steps for footprint F, bandwidth B,
// preparation P and switchover S: P + ceil(F/B) + S.
Step migration_duration_steps(double footprint, double bandwidth, Step preparation,
                              Step switchover);

} // namespace vmsim
