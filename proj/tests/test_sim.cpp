#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <variant>
#include <vector>

#include "vmsim/rng.hpp"
#include "vmsim/sim.hpp"
#include "vmsim/trace.hpp"
#include "vmsim/types.hpp"

using namespace vmsim;

namespace {

PhysicalMachine make_pm(PmId id, double cpu = 1.0, double mem = 1024.0) {
    PhysicalMachine p;
    p.id = std::move(id);
    p.cpu_capacity = cpu;
    p.mem_capacity = mem;
    return p;
}

TraceRecord rec(Step t, VmId vm, double cpu, double mem = 256.0) {
    TraceRecord r;
    r.time = t;
    r.vm_id = std::move(vm);
    r.cpu = cpu;
    r.mem = mem;
    return r;
}

WorkloadTrace standing_vms(std::vector<TraceRecord> records) {
    WorkloadTrace t;
    t.records = std::move(records);
    return t;
}

// Two VMs, round-robin onto pm0/pm1, constant demand.
Simulation two_vm_sim(SimConfig cfg, double cpu = 0.3, double mem = 256.0) {
    return Simulation({make_pm("pm0"), make_pm("pm1")},
                      standing_vms({rec(0, "v0", cpu, mem), rec(0, "v1", cpu, mem)}), cfg);
}

bool has_event(const std::vector<SimEvent>& events, SimEventKind kind) {
    return std::any_of(events.begin(), events.end(),
                       [&](const SimEvent& e) { return e.kind == kind; });
}

const SimEvent& find_event(const std::vector<SimEvent>& events, SimEventKind kind) {
    for (const auto& e : events)
        if (e.kind == kind) return e;
    throw std::runtime_error("event not found");
}

} // namespace

TEST_CASE("migration_duration_steps closed form") {
    CHECK(migration_duration_steps(1024.0, 1024.0, 1, 1) == 3);
    CHECK(migration_duration_steps(0.0, 512.0, 0, 1) == 1);
    CHECK(migration_duration_steps(2048.5, 1024.0, 2, 3) == 2 + 3 + 3);
    CHECK_THROWS_AS((void)migration_duration_steps(10.0, 0.0, 1, 1), InputError);
    CHECK_THROWS_AS((void)migration_duration_steps(-1.0, 1.0, 1, 1), InputError);
}

TEST_CASE("start_migration rejections") {
    SimConfig cfg;
    Simulation sim = two_vm_sim(cfg);
    ClusterState state = sim.state();

    CHECK(can_start_migration(state, "nope", "pm1") == MigrationReject::VmUnknown);
    CHECK(can_start_migration(state, "v0", "nope") == MigrationReject::TargetUnknown);
    CHECK(can_start_migration(state, "v0", "pm0") == MigrationReject::TargetIsSource);
    CHECK(can_start_migration(state, "v0", "pm1") == std::nullopt);

    SUBCASE("unplaced VM") {
        state.vm_mut("v0").placement.reset();
        CHECK(can_start_migration(state, "v0", "pm1") == MigrationReject::VmUnplaced);
    }

    SUBCASE("target with no spare memory") {
        state.vm_mut("v1").mem_demand = 1024.0;
        CHECK(can_start_migration(state, "v0", "pm1") == MigrationReject::InsufficientCapacity);
    }

    SUBCASE("target with no spare cpu") {
        state.vm_mut("v1").cpu_demand = 0.8;
        CHECK(can_start_migration(state, "v0", "pm1") == MigrationReject::InsufficientCapacity);
    }

    SUBCASE("already migrating") {
        REQUIRE(std::holds_alternative<MigrationJob>(start_migration(state, "v0", "pm1", cfg)));
        CHECK(can_start_migration(state, "v0", "pm1") == MigrationReject::AlreadyMigrating);
        // Migrating back to the current host reads as target-is-source first.
        CHECK(can_start_migration(state, "v0", "pm0") == MigrationReject::TargetIsSource);
    }

    SUBCASE("reservations double-book the target") {
        // v0 in flight toward pm1 reserves 0.3 there; v1 at 0.5 makes a
        // second 0.3 migration overflow 1.0.
        state.vm_mut("v1").cpu_demand = 0.5;
        VirtualMachine extra;
        extra.id = "v2";
        extra.cpu_demand = 0.3;
        extra.mem_demand = 64.0;
        extra.placement = "pm0";
        state.vms.push_back(extra);
        REQUIRE(std::holds_alternative<MigrationJob>(start_migration(state, "v0", "pm1", cfg)));
        CHECK(can_start_migration(state, "v2", "pm1") == MigrationReject::InsufficientCapacity);
    }
}

TEST_CASE("start_migration fast-forwards degenerate phases and stamps the VM") {
    Simulation sim = two_vm_sim(SimConfig{});
    ClusterState state = sim.state();
    state.time = 5;

    SUBCASE("no preparation goes straight to Transfer") {
        SimConfig cfg;
        cfg.preparation_steps = 0;
        const auto result = start_migration(state, "v0", "pm1", cfg);
        REQUIRE(std::holds_alternative<MigrationJob>(result));
        CHECK(std::get<MigrationJob>(result).phase == MigrationPhase::Transfer);
        CHECK(state.vm("v0").last_migration_step == 5);
    }

    SUBCASE("no preparation and no footprint goes straight to Switchover") {
        SimConfig cfg;
        cfg.preparation_steps = 0;
        state.vm_mut("v0").mem_footprint = 0.0;
        const auto result = start_migration(state, "v0", "pm1", cfg);
        REQUIRE(std::holds_alternative<MigrationJob>(result));
        CHECK(std::get<MigrationJob>(result).phase == MigrationPhase::Switchover);
    }
}

TEST_CASE("advance_migrations: transfer drains at bandwidth per step") {
    SimConfig cfg;
    cfg.migration_bandwidth = 512.0;
    Simulation sim = two_vm_sim(cfg, 0.3, 512.0);
    ClusterState state = sim.state();
    state.vm_mut("v0").mem_footprint = 512.0;
    cfg.preparation_steps = 0;
    REQUIRE(std::holds_alternative<MigrationJob>(start_migration(state, "v0", "pm1", cfg)));
    REQUIRE(state.migrations[0].phase == MigrationPhase::Transfer);

    const AdvanceResult r = advance_migrations(state, cfg);
    CHECK(state.migrations[0].phase == MigrationPhase::Switchover);
    CHECK(state.migrations[0].bytes_remaining == 0.0);
    CHECK(r.downtime_steps == 0);
    CHECK(has_event(r.events, SimEventKind::MigrationPhaseChanged));
}

TEST_CASE("migration lifecycle hand-trace: P=1, F=1024, B=1024, S=1") {
    SimConfig cfg;
    cfg.preparation_steps = 1;
    cfg.switchover_steps = 1;
    cfg.migration_bandwidth = 1024.0;
    cfg.horizon = 10;
    // Footprint tracks the first-seen memory demand, so give the PMs room
    // for two 1024 MB tenants.
    Simulation sim({make_pm("pm0", 1.0, 4096.0), make_pm("pm1", 1.0, 4096.0)},
                   standing_vms({rec(0, "v0", 0.3, 1024.0), rec(0, "v1", 0.3, 1024.0)}), cfg);

    // Step 0: the job is created in Preparation, then advanced to Transfer.
    StepResult s0 = sim.step({SimAction::migrate("v0", "pm1")});
    CHECK(find_event(s0.events, SimEventKind::MigrationStarted).detail == "Preparation");
    CHECK(find_event(s0.events, SimEventKind::MigrationPhaseChanged).detail == "Transfer");
    CHECK(s0.metrics.migrations_active == 1);
    CHECK(s0.metrics.downtime_steps == 0);
    CHECK(sim.state().cpu_reserved("pm1") == doctest::Approx(0.3));

    // Step 1: the whole footprint moves in one step -> Switchover.
    StepResult s1 = sim.step({});
    CHECK(find_event(s1.events, SimEventKind::MigrationPhaseChanged).detail == "Switchover");
    CHECK(s1.metrics.downtime_steps == 0);
    CHECK(sim.state().vm("v0").placement == "pm0");

    // Step 2: switchover completes, placement flips, downtime recorded.
    StepResult s2 = sim.step({});
    CHECK(has_event(s2.events, SimEventKind::MigrationCompleted));
    CHECK(s2.metrics.downtime_steps == 1);
    CHECK(sim.state().vm("v0").placement == "pm1");
    CHECK(sim.state().migrations.empty());
    CHECK(sim.state().cpu_reserved("pm1") == 0.0);

    // Exactly one downtime step in the whole run.
    StepResult s3 = sim.step({});
    CHECK(s3.metrics.downtime_steps == 0);
}

TEST_CASE("stepped lifecycle matches the closed-form duration on random draws") {
    Rng rng(1234);
    for (int it = 0; it < 100; ++it) {
        SimConfig cfg;
        cfg.preparation_steps = static_cast<Step>(rng.integer(4));
        cfg.switchover_steps = 1 + static_cast<Step>(rng.integer(3));
        cfg.migration_bandwidth = rng.uniform(64.0, 2048.0);
        cfg.horizon = 100;
        const double footprint = rng.uniform() < 0.1 ? 0.0 : rng.uniform(1.0, 4096.0);

        Simulation sim = two_vm_sim(cfg);
        ClusterState state = sim.state();
        state.vm_mut("v0").mem_footprint = footprint;
        REQUIRE(std::holds_alternative<MigrationJob>(
            start_migration(state, "v0", "pm1", cfg)));

        Step steps = 0;
        int downtime = 0;
        while (!state.migrations.empty()) {
            const AdvanceResult r = advance_migrations(state, cfg);
            downtime += r.downtime_steps;
            ++steps;
            REQUIRE(steps < 1000);
        }
        CHECK(steps == migration_duration_steps(footprint, cfg.migration_bandwidth,
                                                cfg.preparation_steps, cfg.switchover_steps));
        CHECK(downtime == cfg.switchover_steps);
        CHECK(state.vm("v0").placement == "pm1");
    }
}

TEST_CASE("admit_request outcomes") {
    Simulation sim = two_vm_sim(SimConfig{});
    ClusterState state = sim.state();

    UserRequest req;
    req.id = "r1";
    req.arrival_time = 3;
    req.duration = 5;
    VirtualMachine vm;
    vm.id = "r1.0";
    vm.cpu_demand = 0.4;
    vm.mem_demand = 128.0;
    req.vms.push_back(vm);

    SUBCASE("place onto a feasible PM") {
        const auto result = admit_request(state, req, Assignment{{"r1.0", "pm1"}});
        REQUIRE(std::holds_alternative<SimEvent>(result));
        CHECK(std::get<SimEvent>(result).kind == SimEventKind::RequestAdmitted);
        CHECK(state.vm("r1.0").placement == "pm1");
        REQUIRE(state.admitted.size() == 1);
        CHECK(state.admitted[0].completes_at == 8);  // arrival 3 + duration 5
    }

    SUBCASE("defer grows the FIFO queue") {
        const auto result = admit_request(state, req, std::nullopt);
        REQUIRE(std::holds_alternative<SimEvent>(result));
        CHECK(std::get<SimEvent>(result).kind == SimEventKind::RequestDeferred);
        CHECK(state.pending_requests.size() == 1);
        CHECK(state.vms.size() == 2);
    }

    SUBCASE("anti-affinity pair forced into one fault domain is rejected") {
        UserRequest pair;
        pair.id = "r2";
        pair.duration = 1;
        for (int i = 0; i < 2; ++i) {
            VirtualMachine v;
            v.id = "r2." + std::to_string(i);
            v.cpu_demand = 0.1;
            v.group = "r2";
            pair.vms.push_back(v);
        }
        pair.hard.push_back(HardConstraint{"r2"});
        // Both PMs are in fault domain 0 by construction.
        const auto result =
            admit_request(state, pair, Assignment{{"r2.0", "pm0"}, {"r2.1", "pm1"}});
        REQUIRE(std::holds_alternative<AdmitReject>(result));
        CHECK(std::get<AdmitReject>(result) == AdmitReject::ConstraintViolation);
        CHECK(state.vms.size() == 2);
        CHECK(state.admitted.empty());
    }

    SUBCASE("capacity violation is rejected without mutating state") {
        req.vms[0].cpu_demand = 0.9;  // pm0 already holds 0.3
        const auto result = admit_request(state, req, Assignment{{"r1.0", "pm0"}});
        REQUIRE(std::holds_alternative<AdmitReject>(result));
        CHECK(std::get<AdmitReject>(result) == AdmitReject::ConstraintViolation);
        CHECK_FALSE(state.has_vm("r1.0"));
    }

    SUBCASE("duplicate VM id") {
        req.vms[0].id = "v0";
        const auto result = admit_request(state, req, Assignment{{"v0", "pm1"}});
        REQUIRE(std::holds_alternative<AdmitReject>(result));
        CHECK(std::get<AdmitReject>(result) == AdmitReject::DuplicateVmId);
    }

    SUBCASE("unknown PM") {
        const auto result = admit_request(state, req, Assignment{{"r1.0", "pmX"}});
        REQUIRE(std::holds_alternative<AdmitReject>(result));
        CHECK(std::get<AdmitReject>(result) == AdmitReject::UnknownPm);
    }

    SUBCASE("incomplete assignment") {
        const auto result = admit_request(state, req, Assignment{});
        REQUIRE(std::holds_alternative<AdmitReject>(result));
        CHECK(std::get<AdmitReject>(result) == AdmitReject::IncompleteAssignment);
    }
}

TEST_CASE("empty cluster: one step draws idle power and nothing else") {
    SimConfig cfg;
    cfg.horizon = 5;
    Simulation sim({make_pm("pm0"), make_pm("pm1")}, WorkloadTrace{}, cfg);
    const StepResult r = sim.step({});
    CHECK(r.metrics.total_power == 200.0);  // 2 x 100 W idle
    CHECK(r.metrics.energy_joules == 200.0);
    CHECK(r.metrics.migrations_active == 0);
    CHECK(r.metrics.cpu_utilization == 0.0);
    CHECK(r.metrics.downtime_steps == 0);
    CHECK(r.events.empty());
    CHECK(sim.state().time == 1);
}

TEST_CASE("arrivals become due requests; undecided requests auto-defer FIFO") {
    WorkloadTrace trace = standing_vms({rec(0, "v0", 0.2)});
    ArrivalRecord a1;
    a1.arrival_time = 1;
    a1.request_id = "r1";
    a1.vm_count = 1;
    a1.cpu = 0.2;
    a1.mem = 64.0;
    a1.duration = 10;
    ArrivalRecord a2 = a1;
    a2.request_id = "r2";
    trace.arrivals = {a1, a2};

    SimConfig cfg;
    cfg.horizon = 20;
    Simulation sim({make_pm("pm0"), make_pm("pm1")}, trace, cfg);

    // Step 0: nothing due yet.
    CHECK(sim.due_requests().empty());
    sim.step({});

    // Step 1: both arrivals are due; leave them undecided.
    const auto due = sim.due_requests();
    REQUIRE(due.size() == 2);
    CHECK(due[0].id == "r1");
    CHECK(due[1].id == "r2");
    const StepResult r1 = sim.step({});
    CHECK(r1.metrics.deferred_requests == 2);
    int arrived = 0, deferred = 0;
    for (const auto& e : r1.events) {
        arrived += e.kind == SimEventKind::RequestArrived;
        deferred += e.kind == SimEventKind::RequestDeferred;
    }
    CHECK(arrived == 2);
    CHECK(deferred == 2);

    // Step 2: the deferred queue comes back FIFO; place slot 0 (r1), defer r2.
    const auto due2 = sim.due_requests();
    REQUIRE(due2.size() == 2);
    CHECK(due2[0].id == "r1");
    const StepResult r2 =
        sim.step({SimAction::place(0, Assignment{{"r1.0", "pm1"}}), SimAction::defer(1)});
    CHECK(has_event(r2.events, SimEventKind::RequestAdmitted));
    CHECK(r2.metrics.deferred_requests == 1);
    CHECK(sim.state().vm("r1.0").placement == "pm1");

    // r2 stays at the queue head until someone places it.
    CHECK(sim.due_requests()[0].id == "r2");
}

TEST_CASE("invalid admission actions are rejected as events") {
    WorkloadTrace trace = standing_vms({rec(0, "v0", 0.2)});
    ArrivalRecord a;
    a.arrival_time = 0;
    a.request_id = "r1";
    a.vm_count = 1;
    a.cpu = 0.95;  // cannot fit next to v0 on pm0
    a.mem = 64.0;
    a.duration = 5;
    trace.arrivals = {a};

    SimConfig cfg;
    cfg.horizon = 10;
    Simulation sim({make_pm("pm0")}, trace, cfg);

    const StepResult r = sim.step({
        SimAction::place(5, Assignment{}),                      // no such slot
        SimAction::place(0, Assignment{{"r1.0", "pm0"}}),       // infeasible
        SimAction::defer(0),                                    // second decision works
        SimAction::defer(0),                                    // already decided
    });
    int rejected = 0;
    for (const auto& e : r.events) rejected += e.kind == SimEventKind::ActionRejected;
    CHECK(rejected == 3);
    CHECK(r.metrics.deferred_requests == 1);
}

TEST_CASE("request completion removes VMs and aborts their migrations") {
    WorkloadTrace trace = standing_vms({rec(0, "v0", 0.1)});
    ArrivalRecord a;
    a.arrival_time = 0;
    a.request_id = "r1";
    a.vm_count = 1;
    a.cpu = 0.3;
    a.mem = 512.0;
    a.duration = 2;  // completes at step 2
    trace.arrivals = {a};

    SimConfig cfg;
    cfg.horizon = 10;
    cfg.preparation_steps = 2;  // keep the migration in flight at completion
    cfg.migration_bandwidth = 64.0;
    Simulation sim({make_pm("pm0"), make_pm("pm1")}, trace, cfg);

    sim.step({SimAction::place(0, Assignment{{"r1.0", "pm0"}})});
    REQUIRE(sim.state().has_vm("r1.0"));

    sim.step({SimAction::migrate("r1.0", "pm1")});
    REQUIRE(sim.state().is_migrating("r1.0"));

    // Step 2: completes_at = 2; the in-flight job is aborted.
    const StepResult r = sim.step({});
    CHECK(has_event(r.events, SimEventKind::RequestCompleted));
    const bool aborted = std::any_of(r.events.begin(), r.events.end(), [](const SimEvent& e) {
        return e.kind == SimEventKind::MigrationPhaseChanged && e.detail == "Aborted";
    });
    CHECK(aborted);
    CHECK_FALSE(sim.state().has_vm("r1.0"));
    CHECK(sim.state().migrations.empty());
    CHECK(sim.state().cpu_reserved("pm1") == 0.0);
}

TEST_CASE("oversubscribed PM throttles its VMs proportionally") {
    // Demands at t=1 sum to 1.4 on a 1.0-capacity PM.
    WorkloadTrace trace = standing_vms({rec(0, "v0", 0.2, 100.0), rec(0, "v1", 0.2, 100.0),
                                        rec(1, "v0", 0.8, 100.0), rec(1, "v1", 0.6, 100.0)});
    SimConfig cfg;
    cfg.horizon = 10;
    Simulation sim({make_pm("pm0")}, trace, cfg);

    sim.step({});  // t=0
    sim.step({});  // t=1 applies the new demand, then throttles

    const double s = 1.0 / 1.4;
    CHECK(sim.state().vm("v0").cpu_demand == doctest::Approx(0.8 * s).epsilon(1e-12));
    CHECK(sim.state().vm("v1").cpu_demand == doctest::Approx(0.6 * s).epsilon(1e-12));
    // Memory is scaled by the same worst-case factor.
    CHECK(sim.state().vm("v0").mem_demand == doctest::Approx(100.0 * s).epsilon(1e-12));
    CHECK(capacity_invariant_holds(sim.state()));
}

TEST_CASE("demand gaps hold the previous value") {
    WorkloadTrace trace =
        standing_vms({rec(0, "v0", 0.4), rec(2, "v0", 0.7)});
    SimConfig cfg;
    cfg.horizon = 5;
    Simulation sim({make_pm("pm0")}, trace, cfg);

    sim.step({});
    CHECK(sim.state().vm("v0").cpu_demand == 0.4);
    sim.step({});
    CHECK(sim.state().vm("v0").cpu_demand == 0.4);  // no record at t=1
    sim.step({});
    CHECK(sim.state().vm("v0").cpu_demand == 0.7);
}

TEST_CASE("soft penalty of admitted requests shows up in the metrics") {
    WorkloadTrace trace;
    ArrivalRecord a;
    a.arrival_time = 0;
    a.request_id = "r1";
    a.vm_count = 1;
    a.cpu = 0.2;
    a.mem = 64.0;
    a.duration = 5;
    a.origin = {0.0, 0.0};
    trace.arrivals = {a};

    std::vector<PhysicalMachine> pms{make_pm("pm0")};
    pms[0].location = {3.0, 4.0};

    SimConfig cfg;
    cfg.horizon = 10;
    Simulation::Options opts;
    opts.proximity_weight = 2.0;
    Simulation sim(pms, trace, cfg, PowerModel{}, opts);

    const auto due = sim.due_requests();
    REQUIRE(due.size() == 1);
    REQUIRE(due[0].soft.size() == 1);

    const StepResult r = sim.step({SimAction::place(0, Assignment{{"r1.0", "pm0"}})});
    CHECK(r.metrics.soft_penalty_total == doctest::Approx(2.0 * 5.0).epsilon(1e-12));
}

TEST_CASE("energy accounting: energy equals power times step_seconds") {
    SimConfig cfg;
    cfg.step_seconds = 300.0;
    cfg.horizon = 5;
    Simulation sim = two_vm_sim(cfg);
    const StepResult r = sim.step({});
    CHECK(r.metrics.energy_joules ==
          doctest::Approx(r.metrics.total_power * 300.0).epsilon(1e-15));
}

TEST_CASE("utilization statistics are mean and population stddev") {
    WorkloadTrace trace = standing_vms({rec(0, "v0", 0.8), rec(0, "v1", 0.2)});
    SimConfig cfg;
    cfg.horizon = 5;
    Simulation sim({make_pm("pm0"), make_pm("pm1")}, trace, cfg);
    // round-robin: v0 -> pm0 (0.8), v1 -> pm1 (0.2)
    const StepResult r = sim.step({});
    CHECK(r.metrics.cpu_utilization == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.metrics.util_stddev == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("reset restores the exact initial state") {
    SimConfig cfg;
    cfg.horizon = 10;
    Simulation sim = two_vm_sim(cfg);
    const ClusterState initial = sim.state();

    sim.step({SimAction::migrate("v0", "pm1")});
    sim.step({});
    REQUIRE(sim.state().time == 2);

    sim.reset();
    CHECK(sim.state().time == 0);
    CHECK(sim.state().vm("v0").placement == initial.vm("v0").placement);
    CHECK(sim.state().migrations.empty());
    CHECK_FALSE(sim.state().vm("v0").last_migration_step.has_value());

    // Identical step sequences after reset produce identical metrics.
    const StepResult a = sim.step({SimAction::migrate("v0", "pm1")});
    sim.reset();
    const StepResult b = sim.step({SimAction::migrate("v0", "pm1")});
    CHECK(a.metrics.total_power == b.metrics.total_power);
    CHECK(a.events.size() == b.events.size());
}

TEST_CASE("done() flips at the horizon") {
    SimConfig cfg;
    cfg.horizon = 2;
    Simulation sim = two_vm_sim(cfg);
    CHECK_FALSE(sim.done());
    sim.step({});
    CHECK_FALSE(sim.done());
    sim.step({});
    CHECK(sim.done());
}

TEST_CASE("initial placement options") {
    WorkloadTrace trace = standing_vms({rec(0, "a", 0.3), rec(0, "b", 0.3), rec(0, "c", 0.3)});
    SimConfig cfg;
    cfg.horizon = 5;

    Simulation rr({make_pm("pm0"), make_pm("pm1")}, trace, cfg);
    CHECK(rr.state().vm("a").placement == "pm0");
    CHECK(rr.state().vm("b").placement == "pm1");
    CHECK(rr.state().vm("c").placement == "pm0");

    Simulation::Options opts;
    opts.initial_first_fit = true;
    Simulation ff({make_pm("pm0"), make_pm("pm1")}, trace, cfg, PowerModel{}, opts);
    CHECK(ff.state().vm("a").placement == "pm0");
    CHECK(ff.state().vm("b").placement == "pm0");
    CHECK(ff.state().vm("c").placement == "pm0");

    // Demands that cannot fit anywhere fail fast.
    WorkloadTrace heavy = standing_vms({rec(0, "a", 0.9), rec(0, "b", 0.9)});
    CHECK_THROWS_AS(Simulation({make_pm("pm0")}, heavy, cfg), ConfigError);
    CHECK_THROWS_AS(Simulation({make_pm("pm0")}, heavy, cfg, PowerModel{}, opts), ConfigError);
}

TEST_CASE("config validation") {
    SimConfig cfg;
    cfg.step_seconds = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = SimConfig{};
    cfg.migration_bandwidth = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = SimConfig{};
    cfg.switchover_steps = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = SimConfig{};
    cfg.horizon = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    CHECK_THROWS_AS(Simulation({}, WorkloadTrace{}, SimConfig{}), ConfigError);
    CHECK_THROWS_AS(Simulation({make_pm("pm0"), make_pm("pm0")}, WorkloadTrace{}, SimConfig{}),
                    ConfigError);
}

TEST_CASE("randomized-action fuzz preserves the core invariants") {
    SynthConfig synth;
    synth.num_vms = 8;
    synth.horizon = 300;
    synth.arrival_rate = 0.15;
    synth.base = 0.25;
    synth.amplitude = 0.2;
    synth.seed = 77;
    const WorkloadTrace trace = generate_synthetic(synth);

    SimConfig cfg;
    cfg.horizon = 300;
    cfg.preparation_steps = 1;
    cfg.migration_bandwidth = 200.0;
    std::vector<PhysicalMachine> pms;
    for (int i = 0; i < 4; ++i) pms.push_back(make_pm("pm" + std::to_string(i), 1.0, 1024.0));
    Simulation sim(pms, trace, cfg);

    Rng rng(8);
    double energy_sum = 0.0;
    double power_dt_sum = 0.0;
    int migrations_completed = 0;
    int downtime_total = 0;

    while (!sim.done()) {
        std::vector<SimAction> actions;
        const auto due = sim.due_requests();
        // Random decisions: sometimes place somewhere random, sometimes defer.
        for (std::size_t slot = 0; slot < due.size(); ++slot) {
            const double pick = rng.uniform();
            if (pick < 0.4) {
                Assignment a;
                for (const auto& vm : due[slot].vms)
                    a[vm.id] = "pm" + std::to_string(rng.integer(4));
                actions.push_back(SimAction::place(slot, std::move(a)));
            } else if (pick < 0.7) {
                actions.push_back(SimAction::defer(slot));
            }
        }
        // Random migration attempts, valid or not.
        if (rng.uniform() < 0.5 && !sim.state().vms.empty()) {
            const auto& vm = sim.state().vms[rng.integer(sim.state().vms.size())];
            actions.push_back(
                SimAction::migrate(vm.id, "pm" + std::to_string(rng.integer(4))));
        }

        const StepResult r = sim.step(actions);
        REQUIRE(capacity_invariant_holds(sim.state()));
        energy_sum += r.metrics.energy_joules;
        power_dt_sum += r.metrics.total_power * cfg.step_seconds;
        downtime_total += r.metrics.downtime_steps;
        for (const auto& e : r.events)
            migrations_completed += e.kind == SimEventKind::MigrationCompleted;
    }

    CHECK(std::abs(energy_sum - power_dt_sum) <= 1e-9 * std::max(1.0, std::abs(power_dt_sum)));
    // Every completed migration spent exactly switchover_steps in downtime;
    // in-flight jobs at the horizon may add a partial tail.
    CHECK(downtime_total >= migrations_completed * cfg.switchover_steps);
    CHECK(migrations_completed > 10);  // the fuzz actually exercised migrations
}
