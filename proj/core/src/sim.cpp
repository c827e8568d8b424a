#include "vmsim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace vmsim {

namespace {

const char* phase_name(MigrationPhase phase) {
    switch (phase) {
    case MigrationPhase::Preparation: return "Preparation";
    case MigrationPhase::Transfer: return "Transfer";
    case MigrationPhase::Switchover: return "Switchover";
    case MigrationPhase::Done: return "Done";
    }
    return "?";
}

SimEvent make_event(Step time, SimEventKind kind) {
    SimEvent e;
    e.time = time;
    e.kind = kind;
    return e;
}

} // namespace

void SimConfig::validate() const {
    if (!(step_seconds > 0.0)) throw ConfigError("step_seconds must be > 0");
    if (!(migration_bandwidth > 0.0)) throw ConfigError("migration_bandwidth must be > 0");
    if (preparation_steps < 0) throw ConfigError("preparation_steps must be >= 0");
    if (switchover_steps < 1) throw ConfigError("switchover_steps must be >= 1");
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
}

const char* to_string(SimEventKind kind) {
    switch (kind) {
    case SimEventKind::RequestArrived: return "RequestArrived";
    case SimEventKind::RequestAdmitted: return "RequestAdmitted";
    case SimEventKind::RequestDeferred: return "RequestDeferred";
    case SimEventKind::MigrationStarted: return "MigrationStarted";
    case SimEventKind::MigrationPhaseChanged: return "MigrationPhaseChanged";
    case SimEventKind::MigrationCompleted: return "MigrationCompleted";
    case SimEventKind::RequestCompleted: return "RequestCompleted";
    case SimEventKind::ActionRejected: return "ActionRejected";
    }
    return "?";
}

const char* to_string(MigrationReject reason) {
    switch (reason) {
    case MigrationReject::VmUnknown: return "vm unknown";
    case MigrationReject::VmUnplaced: return "vm unplaced";
    case MigrationReject::TargetUnknown: return "target unknown";
    case MigrationReject::TargetIsSource: return "target is source";
    case MigrationReject::InsufficientCapacity: return "insufficient target capacity";
    case MigrationReject::AlreadyMigrating: return "already migrating";
    }
    return "?";
}

const char* to_string(AdmitReject reason) {
    switch (reason) {
    case AdmitReject::ConstraintViolation: return "hard constraint violation";
    case AdmitReject::DuplicateVmId: return "duplicate vm id";
    case AdmitReject::UnknownPm: return "unknown pm";
    case AdmitReject::IncompleteAssignment: return "assignment does not cover the request";
    }
    return "?";
}

std::optional<MigrationReject> can_start_migration(const ClusterState& state, const VmId& vm,
                                                   const PmId& target) {
    if (!state.has_vm(vm)) return MigrationReject::VmUnknown;
    const VirtualMachine& v = state.vm(vm);
    if (!v.placement) return MigrationReject::VmUnplaced;
    if (!state.has_pm(target)) return MigrationReject::TargetUnknown;
    if (*v.placement == target) return MigrationReject::TargetIsSource;
    if (state.is_migrating(vm)) return MigrationReject::AlreadyMigrating;
    const PhysicalMachine& t = state.pm(target);
    if (state.cpu_used(target) + state.cpu_reserved(target) + v.cpu_demand >
        t.cpu_capacity + 1e-9)
        return MigrationReject::InsufficientCapacity;
    if (state.mem_used(target) + state.mem_reserved(target) + v.mem_demand >
        t.mem_capacity + 1e-9)
        return MigrationReject::InsufficientCapacity;
    return std::nullopt;
}

std::variant<MigrationJob, MigrationReject> start_migration(ClusterState& state, const VmId& vm,
                                                            const PmId& target,
                                                            const SimConfig& cfg) {
    if (auto reject = can_start_migration(state, vm, target)) return *reject;

    VirtualMachine& v = state.vm_mut(vm);
    MigrationJob job;
    job.vm = vm;
    job.source = *v.placement;
    job.target = target;
    job.bytes_remaining = v.mem_footprint;
    job.started_at = state.time;
    job.preparation_steps_remaining = cfg.preparation_steps;
    job.downtime_steps_remaining = cfg.switchover_steps;
    if (cfg.preparation_steps > 0)
        job.phase = MigrationPhase::Preparation;
    else if (job.bytes_remaining > 0.0)
        job.phase = MigrationPhase::Transfer;
    else
        job.phase = MigrationPhase::Switchover;

    v.last_migration_step = state.time;
    state.migrations.push_back(job);
    return job;
}

AdvanceResult advance_migrations(ClusterState& state, const SimConfig& cfg) {
    AdvanceResult result;
    std::vector<std::size_t> completed;
    for (std::size_t idx = 0; idx < state.migrations.size(); ++idx) {
        MigrationJob& job = state.migrations[idx];
        switch (job.phase) {
        case MigrationPhase::Preparation: {
            job.preparation_steps_remaining -= 1;
            if (job.preparation_steps_remaining <= 0) {
                job.phase = job.bytes_remaining > 0.0 ? MigrationPhase::Transfer
                                                      : MigrationPhase::Switchover;
                SimEvent e = make_event(state.time, SimEventKind::MigrationPhaseChanged);
                e.vm = job.vm;
                e.pm = job.target;
                e.detail = phase_name(job.phase);
                result.events.push_back(std::move(e));
            }
            break;
        }
        case MigrationPhase::Transfer: {
            job.bytes_remaining = std::max(0.0, job.bytes_remaining - cfg.migration_bandwidth);
            if (job.bytes_remaining <= 0.0) {
                job.phase = MigrationPhase::Switchover;
                SimEvent e = make_event(state.time, SimEventKind::MigrationPhaseChanged);
                e.vm = job.vm;
                e.pm = job.target;
                e.detail = phase_name(job.phase);
                result.events.push_back(std::move(e));
            }
            break;
        }
        case MigrationPhase::Switchover: {
            result.downtime_steps += 1;
            job.downtime_steps_remaining -= 1;
            if (job.downtime_steps_remaining <= 0) {
                job.phase = MigrationPhase::Done;
                state.vm_mut(job.vm).placement = job.target;
                SimEvent e = make_event(state.time, SimEventKind::MigrationCompleted);
                e.vm = job.vm;
                e.pm = job.target;
                result.events.push_back(std::move(e));
                completed.push_back(idx);
            }
            break;
        }
        case MigrationPhase::Done:
            completed.push_back(idx);
            break;
        }
    }
    for (auto it = completed.rbegin(); it != completed.rend(); ++it)
        state.migrations.erase(state.migrations.begin() + static_cast<std::ptrdiff_t>(*it));
    return result;
}

std::variant<SimEvent, AdmitReject> admit_request(ClusterState& state, const UserRequest& req,
                                                  const std::optional<Assignment>& placement) {
    if (!placement) {
        state.pending_requests.push_back(req);
        SimEvent e = make_event(state.time, SimEventKind::RequestDeferred);
        e.request = req.id;
        return e;
    }

    if (placement->size() != req.vms.size()) return AdmitReject::IncompleteAssignment;
    for (const auto& vm : req.vms) {
        if (!placement->count(vm.id)) return AdmitReject::IncompleteAssignment;
        if (state.has_vm(vm.id)) return AdmitReject::DuplicateVmId;
    }
    for (const auto& [vm_id, pm_id] : *placement)
        if (!state.has_pm(pm_id)) return AdmitReject::UnknownPm;

    ClusterState scratch = state;
    for (const auto& vm : req.vms) scratch.vms.push_back(vm);
    if (!check_hard(scratch, *placement, req.hard)) return AdmitReject::ConstraintViolation;

    AdmittedRequest ar;
    ar.request = req;
    ar.completes_at = req.arrival_time + req.duration;
    for (const auto& vm : req.vms) {
        VirtualMachine placed = vm;
        placed.placement = placement->at(vm.id);
        state.vms.push_back(std::move(placed));
        ar.vm_ids.push_back(vm.id);
    }
    state.admitted.push_back(std::move(ar));

    SimEvent e = make_event(state.time, SimEventKind::RequestAdmitted);
    e.request = req.id;
    return e;
}

SimAction SimAction::place(std::size_t slot, Assignment assignment) {
    SimAction a;
    a.kind = Kind::Place;
    a.request_slot = slot;
    a.placement = std::move(assignment);
    return a;
}

SimAction SimAction::migrate(VmId vm, PmId target) {
    SimAction a;
    a.kind = Kind::Migrate;
    a.vm = std::move(vm);
    a.target = std::move(target);
    return a;
}

SimAction SimAction::defer(std::size_t slot) {
    SimAction a;
    a.kind = Kind::Defer;
    a.request_slot = slot;
    return a;
}

SimAction SimAction::noop() { return SimAction{}; }

Step migration_duration_steps(double footprint, double bandwidth, Step preparation,
                              Step switchover) {
    if (!(bandwidth > 0.0)) throw InputError("bandwidth must be > 0");
    if (footprint < 0.0) throw InputError("footprint must be >= 0");
    const Step transfer = static_cast<Step>(std::ceil(footprint / bandwidth));
    return preparation + transfer + switchover;
}

Simulation::Simulation(std::vector<PhysicalMachine> pms, WorkloadTrace trace, SimConfig cfg,
                       PowerModel power, Options options)
    : initial_pms_(std::move(pms)),
      trace_(std::move(trace)),
      cfg_(cfg),
      power_(std::move(power)),
      options_(options) {
    cfg_.validate();
    trace_.validate();
    if (initial_pms_.empty()) throw ConfigError("simulation needs at least one PM");
    std::set<PmId> ids;
    for (const auto& p : initial_pms_) {
        p.validate();
        if (!ids.insert(p.id).second) throw ConfigError("duplicate PM id " + p.id);
    }
    reset();
}

Simulation::Simulation(std::vector<PhysicalMachine> pms, WorkloadTrace trace, SimConfig cfg,
                       PowerModel power)
    : Simulation(std::move(pms), std::move(trace), cfg, std::move(power), Options{}) {}

void Simulation::reset() {
    state_ = ClusterState{};
    state_.pms = initial_pms_;
    state_.max_storage_io = trace_.meta.max_storage_io;
    state_.max_net_io = trace_.meta.max_net_io;
    next_record_ = 0;
    next_arrival_ = 0;

    // Standing VMs: one per distinct vm_id in the demand records, in
    // first-appearance order. Migration footprint = first-seen mem.
    std::set<VmId> seen;
    for (const auto& r : trace_.records) {
        if (!seen.insert(r.vm_id).second) continue;
        VirtualMachine vm;
        vm.id = r.vm_id;
        vm.mem_footprint = r.mem;
        state_.vms.push_back(std::move(vm));
    }
    for (const auto& r : trace_.records) {
        if (r.time > 0) break;
        VirtualMachine& vm = state_.vm_mut(r.vm_id);
        vm.cpu_demand = r.cpu;
        vm.mem_demand = r.mem;
        vm.storage_io = r.storage_io;
        vm.net_io = r.net_io;
    }

    if (options_.initial_first_fit) {
        for (auto& vm : state_.vms) {
            bool placed = false;
            for (const auto& p : state_.pms) {
                if (state_.cpu_used(p.id) + vm.cpu_demand <= p.cpu_capacity + 1e-9 &&
                    state_.mem_used(p.id) + vm.mem_demand <= p.mem_capacity + 1e-9) {
                    vm.placement = p.id;
                    placed = true;
                    break;
                }
            }
            if (!placed)
                throw ConfigError("initial first-fit placement failed for VM " + vm.id);
        }
    } else {
        std::size_t k = 0;
        for (auto& vm : state_.vms) {
            vm.placement = state_.pms[k % state_.pms.size()].id;
            ++k;
        }
    }
    if (!capacity_invariant_holds(state_))
        throw ConfigError("initial placement violates capacity");
}

std::vector<UserRequest> Simulation::due_requests() const {
    std::vector<UserRequest> due(state_.pending_requests.begin(), state_.pending_requests.end());
    for (std::size_t i = next_arrival_; i < trace_.arrivals.size(); ++i) {
        if (trace_.arrivals[i].arrival_time != state_.time) break;
        due.push_back(to_request(trace_.arrivals[i], options_.proximity_weight));
    }
    return due;
}

void Simulation::apply_demand_updates() {
    while (next_record_ < trace_.records.size() &&
           trace_.records[next_record_].time <= state_.time) {
        const TraceRecord& r = trace_.records[next_record_];
        if (r.time == state_.time && state_.has_vm(r.vm_id)) {
            VirtualMachine& vm = state_.vm_mut(r.vm_id);
            vm.cpu_demand = r.cpu;
            vm.mem_demand = r.mem;
            vm.storage_io = r.storage_io;
            vm.net_io = r.net_io;
        }
        ++next_record_;
    }

    // Proportional throttling: when raw demand (placements plus inbound
    // reservations) would exceed a PM, every VM touching that PM is scaled
    // down by the PM's worst ratio, keeping the capacity invariant under any
    // trace.
    std::map<PmId, double> scale;
    for (const auto& p : state_.pms) {
        const double cpu = state_.cpu_used(p.id) + state_.cpu_reserved(p.id);
        const double mem = state_.mem_used(p.id) + state_.mem_reserved(p.id);
        double s = 1.0;
        if (cpu > p.cpu_capacity) s = std::min(s, p.cpu_capacity / cpu);
        if (mem > p.mem_capacity) s = std::min(s, p.mem_capacity / mem);
        scale[p.id] = s;
    }
    std::map<VmId, double> vm_scale;
    for (const auto& v : state_.vms) {
        if (!v.placement) continue;
        double s = scale[*v.placement];
        for (const auto& job : state_.migrations)
            if (job.vm == v.id) s = std::min(s, scale[job.target]);
        if (s < 1.0) vm_scale[v.id] = s;
    }
    for (auto& [vm_id, s] : vm_scale) {
        VirtualMachine& vm = state_.vm_mut(vm_id);
        vm.cpu_demand *= s;
        vm.mem_demand *= s;
    }
}

void Simulation::process_admissions(const std::vector<SimAction>& actions,
                                    std::vector<SimEvent>& events) {
    std::vector<UserRequest> due(state_.pending_requests.begin(), state_.pending_requests.end());
    state_.pending_requests.clear();
    while (next_arrival_ < trace_.arrivals.size() &&
           trace_.arrivals[next_arrival_].arrival_time == state_.time) {
        UserRequest req = to_request(trace_.arrivals[next_arrival_], options_.proximity_weight);
        SimEvent e = make_event(state_.time, SimEventKind::RequestArrived);
        e.request = req.id;
        events.push_back(std::move(e));
        due.push_back(std::move(req));
        ++next_arrival_;
    }

    std::vector<bool> decided(due.size(), false);
    for (const auto& action : actions) {
        if (action.kind != SimAction::Kind::Place && action.kind != SimAction::Kind::Defer)
            continue;
        const std::size_t slot = action.request_slot;
        if (slot >= due.size() || decided[slot]) {
            SimEvent e = make_event(state_.time, SimEventKind::ActionRejected);
            e.detail = slot >= due.size() ? "no due request in slot " + std::to_string(slot)
                                          : "slot already decided";
            events.push_back(std::move(e));
            continue;
        }
        if (action.kind == SimAction::Kind::Defer) {
            decided[slot] = true;
            auto result = admit_request(state_, due[slot], std::nullopt);
            events.push_back(std::get<SimEvent>(result));
            continue;
        }
        auto result = admit_request(state_, due[slot], action.placement);
        if (std::holds_alternative<SimEvent>(result)) {
            decided[slot] = true;
            events.push_back(std::get<SimEvent>(result));
        } else {
            SimEvent e = make_event(state_.time, SimEventKind::ActionRejected);
            e.request = due[slot].id;
            e.detail = to_string(std::get<AdmitReject>(result));
            events.push_back(std::move(e));
        }
    }

    for (std::size_t slot = 0; slot < due.size(); ++slot) {
        if (decided[slot]) continue;
        auto result = admit_request(state_, due[slot], std::nullopt);
        events.push_back(std::get<SimEvent>(result));
    }
}

void Simulation::start_migrations(const std::vector<SimAction>& actions,
                                  std::vector<SimEvent>& events) {
    for (const auto& action : actions) {
        if (action.kind != SimAction::Kind::Migrate) continue;
        auto result = vmsim::start_migration(state_, action.vm, action.target, cfg_);
        if (std::holds_alternative<MigrationJob>(result)) {
            const auto& job = std::get<MigrationJob>(result);
            SimEvent e = make_event(state_.time, SimEventKind::MigrationStarted);
            e.vm = job.vm;
            e.pm = job.target;
            e.detail = phase_name(job.phase);
            events.push_back(std::move(e));
        } else {
            SimEvent e = make_event(state_.time, SimEventKind::ActionRejected);
            e.vm = action.vm;
            e.pm = action.target;
            e.detail = to_string(std::get<MigrationReject>(result));
            events.push_back(std::move(e));
        }
    }
}

void Simulation::complete_requests(std::vector<SimEvent>& events) {
    for (std::size_t i = 0; i < state_.admitted.size();) {
        if (state_.admitted[i].completes_at > state_.time) {
            ++i;
            continue;
        }
        const AdmittedRequest ar = state_.admitted[i];
        state_.admitted.erase(state_.admitted.begin() + static_cast<std::ptrdiff_t>(i));
        for (const auto& vm_id : ar.vm_ids) {
            for (std::size_t j = 0; j < state_.migrations.size();) {
                if (state_.migrations[j].vm == vm_id) {
                    SimEvent e = make_event(state_.time, SimEventKind::MigrationPhaseChanged);
                    e.vm = vm_id;
                    e.pm = state_.migrations[j].target;
                    e.detail = "Aborted";
                    events.push_back(std::move(e));
                    state_.migrations.erase(state_.migrations.begin() +
                                            static_cast<std::ptrdiff_t>(j));
                } else {
                    ++j;
                }
            }
            for (std::size_t j = 0; j < state_.vms.size(); ++j) {
                if (state_.vms[j].id == vm_id) {
                    state_.vms.erase(state_.vms.begin() + static_cast<std::ptrdiff_t>(j));
                    break;
                }
            }
        }
        SimEvent e = make_event(state_.time, SimEventKind::RequestCompleted);
        e.request = ar.request.id;
        events.push_back(std::move(e));
    }
}

double Simulation::soft_penalty_now() const {
    double total = 0.0;
    for (const auto& ar : state_.admitted) {
        if (ar.request.soft.empty()) continue;
        Assignment assignment;
        for (const auto& vm_id : ar.vm_ids) {
            const auto& placement = state_.vm(vm_id).placement;
            if (placement) assignment[vm_id] = *placement;
        }
        total += soft_penalty(state_, assignment, ar.request.soft, ar.request.origin);
    }
    return total;
}

StepMetrics Simulation::compute_metrics(int downtime_steps) const {
    StepMetrics m;
    m.time = state_.time;
    m.total_power = cluster_power(state_, power_);
    m.energy_joules = m.total_power * cfg_.step_seconds;

    std::vector<double> utils;
    for (const auto& p : state_.pms) {
        if (power_.powered_off_when_empty && state_.placed_vm_count(p.id) == 0 &&
            state_.inbound_migration_count(p.id) == 0)
            continue;
        utils.push_back(std::clamp(state_.cpu_used(p.id) / p.cpu_capacity, 0.0, 1.0));
    }
    if (!utils.empty()) {
        double mean = 0.0;
        for (double u : utils) mean += u;
        mean /= static_cast<double>(utils.size());
        double var = 0.0;
        for (double u : utils) var += (u - mean) * (u - mean);
        var /= static_cast<double>(utils.size());
        m.cpu_utilization = mean;
        m.util_stddev = std::sqrt(var);
    }

    m.downtime_steps = downtime_steps;
    m.deferred_requests = static_cast<int>(state_.pending_requests.size());
    m.soft_penalty_total = soft_penalty_now();
    return m;
}

StepMetrics Simulation::metrics_snapshot() const {
    StepMetrics m = compute_metrics(0);
    m.migrations_active = static_cast<int>(state_.migrations.size());
    return m;
}

StepResult Simulation::step(const std::vector<SimAction>& actions) {
    StepResult result;
    apply_demand_updates();
    process_admissions(actions, result.events);
    start_migrations(actions, result.events);
    const int migrations_active = static_cast<int>(state_.migrations.size());
    AdvanceResult advance = advance_migrations(state_, cfg_);
    for (auto& e : advance.events) result.events.push_back(std::move(e));
    complete_requests(result.events);
    result.metrics = compute_metrics(advance.downtime_steps);
    result.metrics.migrations_active = migrations_active;
    state_.time += 1;
    return result;
}

} // namespace vmsim
