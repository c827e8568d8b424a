#include <benchmark/benchmark.h>

#include <Eigen/Dense>
#include <vector>

#include "vmsim/dqn.hpp"
#include "vmsim/env.hpp"
#include "vmsim/lstm.hpp"
#include "vmsim/mlp.hpp"
#include "vmsim/rng.hpp"
#include "vmsim/sim.hpp"
#include "vmsim/trace.hpp"
#include "vmsim/types.hpp"

namespace {

using namespace vmsim;

void bm_lstm_step(benchmark::State& state) {
    const auto hidden = static_cast<int>(state.range(0));
    const LstmModel model = init_lstm(1, hidden, 1, 7);
    LstmState s = zero_state(model);
    Eigen::VectorXd x(1);
    x << 0.5;
    for (auto _ : state) {
        s = lstm_step(model, s, x);
        benchmark::DoNotOptimize(s.h.data());
    }
}
BENCHMARK(bm_lstm_step)->Arg(8)->Arg(32)->Arg(128);

void bm_mlp_forward(benchmark::State& state) {
    const auto width = static_cast<int>(state.range(0));
    const MlpModel model = init_mlp({width, width, width, 4}, Activation::Tanh, 7);
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(width, 0.25);
    for (auto _ : state) {
        Eigen::VectorXd y = mlp_forward(model, x);
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(bm_mlp_forward)->Arg(16)->Arg(64)->Arg(256);

Simulation make_sim(int pms, int vms, int horizon) {
    SynthConfig synth;
    synth.num_vms = vms;
    synth.horizon = horizon + 1;
    synth.arrival_rate = 0.0;
    synth.seed = 11;
    const WorkloadTrace trace = generate_synthetic(synth);

    std::vector<PhysicalMachine> machines;
    for (int i = 0; i < pms; ++i) {
        PhysicalMachine pm;
        pm.id = "pm-" + std::to_string(i);
        pm.cpu_capacity = 8.0;
        pm.mem_capacity = 64.0;
        machines.push_back(pm);
    }

    SimConfig cfg;
    cfg.horizon = horizon;
    return Simulation(machines, trace, cfg);
}

void bm_simulation_step(benchmark::State& state) {
    const auto vms = static_cast<int>(state.range(0));
    Simulation base = make_sim(8, vms, 1 << 20);
    for (auto _ : state) {
        StepResult r = base.step({});
        benchmark::DoNotOptimize(r.metrics.total_power);
    }
}
BENCHMARK(bm_simulation_step)->Arg(16)->Arg(64)->Arg(256);

void bm_dqn_train_step(benchmark::State& state) {
    const auto obs = static_cast<int>(state.range(0));
    const int actions = 32;
    dqn::QNetwork net{init_mlp({obs, 64, 64, actions}, Activation::Tanh, 3)};
    dqn::QNetwork target = net;
    dqn::ReplayBuffer buffer(1024, 5);

    Rng rng(9);
    for (int i = 0; i < 512; ++i) {
        dqn::Transition tr;
        tr.s = Eigen::VectorXd::NullaryExpr(obs, [&](Eigen::Index) { return rng.uniform(); });
        tr.a = static_cast<int>(rng.integer(actions));
        tr.r = rng.uniform(-1.0, 1.0);
        tr.s_next = tr.s;
        tr.terminal = false;
        tr.valid_next.assign(static_cast<std::size_t>(actions), 1);
        buffer.push(tr);
    }

    dqn::AgentConfig cfg;
    for (auto _ : state) {
        const auto batch = buffer.sample(32);
        const double loss = dqn::train_step(net, target, batch, cfg);
        benchmark::DoNotOptimize(loss);
    }
}
BENCHMARK(bm_dqn_train_step)->Arg(16)->Arg(64);

} // namespace

BENCHMARK_MAIN();
