#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <optional>
#include <set>

#include "vmsim/domain.hpp"
#include "vmsim/energy.hpp"
#include "vmsim/rng.hpp"
#include "vmsim/types.hpp"

using namespace vmsim;

namespace {

PhysicalMachine make_pm(PmId id, double cpu, double mem, int domain = 0, double x = 0.0,
                        double y = 0.0) {
    PhysicalMachine p;
    p.id = std::move(id);
    p.cpu_capacity = cpu;
    p.mem_capacity = mem;
    p.fault_domain = domain;
    p.location = {x, y};
    return p;
}

VirtualMachine make_vm(VmId id, double cpu, double mem, std::optional<PmId> host = std::nullopt) {
    VirtualMachine v;
    v.id = std::move(id);
    v.cpu_demand = cpu;
    v.mem_demand = mem;
    v.mem_footprint = mem;
    v.placement = std::move(host);
    return v;
}

// Naive re-statement of the check_hard contract, written independently:
// assignment entries override placements, reservations still count, and every
// anti-affinity group must occupy pairwise distinct fault domains.
bool naive_check_hard(const ClusterState& state, const Assignment& assignment,
                      const std::vector<HardConstraint>& constraints) {
    auto host_of = [&](const VirtualMachine& v) -> std::optional<PmId> {
        auto it = assignment.find(v.id);
        if (it != assignment.end()) return it->second;
        return v.placement;
    };

    for (const auto& p : state.pms) {
        double cpu = 0.0;
        double mem = 0.0;
        for (const auto& job : state.migrations) {
            if (job.target != p.id) continue;
            cpu += state.vm(job.vm).cpu_demand;
            mem += state.vm(job.vm).mem_demand;
        }
        for (const auto& v : state.vms) {
            if (host_of(v) == p.id) {
                cpu += v.cpu_demand;
                mem += v.mem_demand;
            }
        }
        if (cpu > p.cpu_capacity + 1e-9 || mem > p.mem_capacity + 1e-9) return false;
    }

    for (const auto& hc : constraints) {
        std::set<int> seen;
        for (const auto& v : state.vms) {
            if (v.group != hc.group) continue;
            const auto host = host_of(v);
            if (!host) continue;
            const int domain = state.pm(*host).fault_domain;
            if (seen.count(domain)) return false;
            seen.insert(domain);
        }
    }
    return true;
}

} // namespace

TEST_CASE("featurize computes the documented seven features") {
    ClusterState state;
    state.pms = {make_pm("pm0", 2.0, 2048.0), make_pm("pm1", 4.0, 4096.0)};
    state.pms[0].power_idle = 100.0;
    state.pms[0].power_peak = 300.0;
    state.vms = {make_vm("a", 0.5, 512.0, "pm0"), make_vm("b", 0.3, 256.0, "pm0")};
    state.vms[0].storage_io = 2.0;
    state.vms[0].net_io = 3.0;
    state.max_storage_io = 4.0;
    state.max_net_io = 6.0;

    const FeatureVector f = featurize(state, "a", "pm0");
    CHECK(f.vm_cpu == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(f.vm_mem == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(f.vm_storage_io == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(f.vm_net_io == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(f.pm_cpu_remaining == doctest::Approx((2.0 - 0.8) / 2.0).epsilon(1e-12));
    CHECK(f.pm_mem_remaining == doctest::Approx((2048.0 - 768.0) / 2048.0).epsilon(1e-12));
    // linear power at util 0.4: 100 + 200 * 0.4 = 180 W, peak 300 W.
    CHECK(f.pm_power == doctest::Approx(180.0 / 300.0).epsilon(1e-12));
}

TEST_CASE("featurize: fully packed PM has zero cpu remaining") {
    ClusterState state;
    state.pms = {make_pm("pm0", 1.0, 1024.0)};
    state.vms = {make_vm("a", 0.6, 100.0, "pm0"), make_vm("b", 0.4, 100.0, "pm0")};
    CHECK(featurize(state, "a", "pm0").pm_cpu_remaining == 0.0);
}

TEST_CASE("featurize: unplaced VM is normalized by the candidate PM") {
    ClusterState state;
    state.pms = {make_pm("pm0", 2.0, 2048.0), make_pm("pm1", 4.0, 4096.0)};
    state.vms = {make_vm("a", 1.0, 1024.0)};
    CHECK(featurize(state, "a", "pm0").vm_cpu == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(featurize(state, "a", "pm1").vm_cpu == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("featurize rejects unknown ids") {
    ClusterState state;
    state.pms = {make_pm("pm0", 1.0, 1024.0)};
    state.vms = {make_vm("a", 0.5, 100.0)};
    CHECK_THROWS_AS((void)featurize(state, "nope", "pm0"), IdError);
    CHECK_THROWS_AS((void)featurize(state, "a", "nope"), IdError);
}

TEST_CASE("check_hard: anti-affinity over fault domains") {
    ClusterState state;
    state.pms = {make_pm("pm0", 4.0, 4096.0, 0), make_pm("pm1", 4.0, 4096.0, 1),
                 make_pm("pm2", 4.0, 4096.0, 0)};
    state.vms = {make_vm("v1", 0.5, 256.0), make_vm("v2", 0.5, 256.0)};
    state.vms[0].group = "g";
    state.vms[1].group = "g";
    const std::vector<HardConstraint> hard{{"g"}};

    CHECK(check_hard(state, {{"v1", "pm0"}, {"v2", "pm1"}}, hard));
    CHECK_FALSE(check_hard(state, {{"v1", "pm0"}, {"v2", "pm0"}}, hard));
    // Distinct PMs in the same fault domain still violate the constraint.
    CHECK_FALSE(check_hard(state, {{"v1", "pm0"}, {"v2", "pm2"}}, hard));
}

TEST_CASE("check_hard: capacity violations") {
    ClusterState state;
    state.pms = {make_pm("pm0", 1.0, 512.0)};
    state.vms = {make_vm("v1", 0.7, 256.0), make_vm("v2", 0.7, 128.0)};

    CHECK(check_hard(state, {{"v1", "pm0"}}, {}));
    CHECK_FALSE(check_hard(state, {{"v1", "pm0"}, {"v2", "pm0"}}, {}));

    SUBCASE("memory is checked too") {
        state.vms[1].cpu_demand = 0.1;
        state.vms[1].mem_demand = 400.0;
        CHECK_FALSE(check_hard(state, {{"v1", "pm0"}, {"v2", "pm0"}}, {}));
    }
}

TEST_CASE("check_hard: in-flight reservations shrink the headroom") {
    ClusterState state;
    state.pms = {make_pm("pm0", 1.0, 1024.0), make_pm("pm1", 1.0, 1024.0)};
    state.vms = {make_vm("m", 0.6, 512.0, "pm0"), make_vm("v", 0.6, 128.0)};

    CHECK(check_hard(state, {{"v", "pm1"}}, {}));

    MigrationJob job;
    job.vm = "m";
    job.source = "pm0";
    job.target = "pm1";
    state.migrations.push_back(job);
    CHECK_FALSE(check_hard(state, {{"v", "pm1"}}, {}));
}

TEST_CASE("check_hard: assignment overrides the current placement") {
    ClusterState state;
    state.pms = {make_pm("pm0", 1.0, 1024.0), make_pm("pm1", 1.0, 1024.0)};
    state.vms = {make_vm("v1", 0.8, 256.0, "pm0"), make_vm("v2", 0.8, 256.0)};

    // pm0 is nearly full, but the assignment moves v1 away first.
    CHECK_FALSE(check_hard(state, {{"v2", "pm0"}}, {}));
    CHECK(check_hard(state, {{"v1", "pm1"}, {"v2", "pm0"}}, {}));
}

TEST_CASE("check_hard agrees with a naive re-statement on random instances") {
    Rng rng(2024);
    int violations_seen = 0;
    for (int it = 0; it < 400; ++it) {
        ClusterState state;
        const int n_pms = 2 + static_cast<int>(rng.integer(2));
        for (int p = 0; p < n_pms; ++p) {
            state.pms.push_back(make_pm("pm" + std::to_string(p), rng.uniform(0.5, 2.0),
                                        rng.uniform(256.0, 1024.0),
                                        static_cast<int>(rng.integer(2))));
        }
        const int n_vms = 1 + static_cast<int>(rng.integer(4));
        for (int v = 0; v < n_vms; ++v) {
            VirtualMachine vm = make_vm("v" + std::to_string(v), rng.uniform(0.0, 1.0),
                                        rng.uniform(0.0, 512.0));
            if (rng.uniform() < 0.5)
                vm.placement = "pm" + std::to_string(rng.integer(n_pms));
            if (rng.uniform() < 0.4) vm.group = "g";
            state.vms.push_back(vm);
        }
        if (!state.vms.empty() && rng.uniform() < 0.3) {
            const auto& v = state.vms[rng.integer(state.vms.size())];
            if (v.placement) {
                MigrationJob job;
                job.vm = v.id;
                job.source = *v.placement;
                job.target = "pm" + std::to_string(rng.integer(n_pms));
                state.migrations.push_back(job);
            }
        }

        Assignment assignment;
        for (const auto& v : state.vms)
            if (rng.uniform() < 0.6)
                assignment[v.id] = "pm" + std::to_string(rng.integer(n_pms));

        const std::vector<HardConstraint> hard{{"g"}};
        const bool got = check_hard(state, assignment, hard);
        const bool want = naive_check_hard(state, assignment, hard);
        REQUIRE(got == want);
        if (!want) ++violations_seen;
    }
    // The generator must actually exercise both outcomes.
    CHECK(violations_seen > 50);
    CHECK(violations_seen < 350);
}

TEST_CASE("soft_penalty: zero weights cost nothing") {
    ClusterState state;
    state.pms = {make_pm("pm0", 1.0, 1024.0, 0, 3.0, 4.0)};
    state.vms = {make_vm("v", 0.5, 128.0)};
    SoftConstraint sc;
    sc.kind = SoftConstraint::Kind::Proximity;
    sc.weight = 0.0;
    CHECK(soft_penalty(state, {{"v", "pm0"}}, {sc}, {0.0, 0.0}) == 0.0);
}

TEST_CASE("soft_penalty: proximity is weight times distance, summed") {
    ClusterState state;
    state.pms = {make_pm("pm0", 1.0, 1024.0, 0, 3.0, 4.0),
                 make_pm("pm1", 1.0, 1024.0, 0, 0.0, 1.0)};
    state.vms = {make_vm("v1", 0.2, 64.0), make_vm("v2", 0.2, 64.0)};
    SoftConstraint sc;
    sc.kind = SoftConstraint::Kind::Proximity;
    sc.weight = 2.0;

    // distances from the origin: pm0 at 5, pm1 at 1.
    const double got = soft_penalty(state, {{"v1", "pm0"}, {"v2", "pm1"}}, {sc}, {0.0, 0.0});
    CHECK(got == doctest::Approx(2.0 * (5.0 + 1.0)).epsilon(1e-12));
}

TEST_CASE("soft_penalty: co-location sums pairwise host distances of the group") {
    ClusterState state;
    state.pms = {make_pm("pm0", 4.0, 4096.0, 0, 0.0, 0.0), make_pm("pm1", 4.0, 4096.0, 0, 6.0, 8.0)};
    state.vms = {make_vm("a", 0.1, 16.0), make_vm("b", 0.1, 16.0), make_vm("c", 0.1, 16.0)};
    for (auto& v : state.vms) v.group = "grp";
    SoftConstraint sc;
    sc.kind = SoftConstraint::Kind::CoLocation;
    sc.group = "grp";
    sc.weight = 0.5;

    // a,b on pm0 and c on pm1: pairs (a,b)=0, (a,c)=10, (b,c)=10.
    const double got =
        soft_penalty(state, {{"a", "pm0"}, {"b", "pm0"}, {"c", "pm1"}}, {sc}, {0.0, 0.0});
    CHECK(got == doctest::Approx(0.5 * 20.0).epsilon(1e-12));

    // All together: no pair is separated.
    CHECK(soft_penalty(state, {{"a", "pm0"}, {"b", "pm0"}, {"c", "pm0"}}, {sc}, {0.0, 0.0}) ==
          0.0);
}

TEST_CASE("capacity_invariant_holds tracks placed plus reserved demand") {
    ClusterState state;
    state.pms = {make_pm("pm0", 1.0, 1024.0), make_pm("pm1", 1.0, 1024.0)};
    state.vms = {make_vm("a", 0.9, 512.0, "pm0"), make_vm("b", 0.5, 512.0, "pm1")};
    CHECK(capacity_invariant_holds(state));

    MigrationJob job;
    job.vm = "b";
    job.source = "pm1";
    job.target = "pm0";  // 0.9 placed + 0.5 reserved > 1.0
    state.migrations.push_back(job);
    CHECK_FALSE(capacity_invariant_holds(state));
}

TEST_CASE("ClusterState accessors") {
    ClusterState state;
    state.pms = {make_pm("pm0", 1.0, 1024.0)};
    state.vms = {make_vm("a", 0.25, 100.0, "pm0"), make_vm("b", 0.5, 200.0, "pm0")};
    state.vms[1].net_io = 7.0;

    CHECK(state.cpu_used("pm0") == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(state.mem_used("pm0") == doctest::Approx(300.0).epsilon(1e-12));
    CHECK(state.net_io_on("pm0") == doctest::Approx(7.0).epsilon(1e-12));
    CHECK(state.placed_vm_count("pm0") == 2);
    CHECK(state.cpu_reserved("pm0") == 0.0);
    CHECK_FALSE(state.is_migrating("a"));

    MigrationJob job;
    job.vm = "a";
    job.source = "pm0";
    job.target = "pm0";
    state.migrations.push_back(job);
    CHECK(state.is_migrating("a"));
    CHECK(state.inbound_migration_count("pm0") == 1);

    CHECK_THROWS_AS((void)state.vm("zz"), IdError);
    CHECK_THROWS_AS((void)state.pm("zz"), IdError);
}

TEST_CASE("euclidean distance") {
    CHECK(euclidean({0.0, 0.0}, {3.0, 4.0}) == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(euclidean({1.0, 1.0}, {1.0, 1.0}) == 0.0);
}
