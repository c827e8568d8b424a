#include "vmsim/energy.hpp"

#include <algorithm>
#include <cmath>

namespace vmsim {

double linear_power(const PhysicalMachine& pm, double utilization) {
    if (!std::isfinite(utilization) || utilization < 0.0 || utilization > 1.0)
        throw InputError("utilization must be in [0,1]");
    return pm.power_idle + (pm.power_peak - pm.power_idle) * utilization;
}

double pm_power(const PhysicalMachine& pm, double utilization, int vm_count, int inbound,
                double net_io_norm, const PowerModel& model) {
    if (model.powered_off_when_empty && vm_count == 0 && inbound == 0) return 0.0;
    switch (model.kind) {
    case PowerModel::Kind::Linear:
        return linear_power(pm, utilization);
    case PowerModel::Kind::Mlp: {
        Eigen::VectorXd x(3);
        x << utilization, static_cast<double>(vm_count) / pm.cpu_capacity, net_io_norm;
        const Eigen::VectorXd y = mlp_forward(model.mlp, x);
        return std::max(0.0, y(0));
    }
    }
    return 0.0;
}

double cluster_power(const ClusterState& state, const PowerModel& model) {
    double total = 0.0;
    for (const auto& p : state.pms) {
        const double util = std::clamp(state.cpu_used(p.id) / p.cpu_capacity, 0.0, 1.0);
        total += pm_power(p, util, state.placed_vm_count(p.id), state.inbound_migration_count(p.id),
                          state.net_io_on(p.id) / std::max(1e-12, state.max_net_io), model);
    }
    return total;
}

} // namespace vmsim
