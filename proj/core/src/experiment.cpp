#include "vmsim/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "vmsim/errors.hpp"
#include "vmsim/model_io.hpp"
#include "vmsim/policies.hpp"

namespace vmsim {

namespace {

constexpr int kForecastHidden = 8;

// Named sub-stream of the top-level seed, perturbed by the block's own seed
// when one is set (block seeds default to 0).
std::uint64_t block_seed(std::uint64_t top, const char* name, std::uint64_t block) {
    return derive_seed(top, name) ^ block;
}

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

std::vector<VmId> trace_vm_ids(const WorkloadTrace& trace) {
    std::vector<VmId> ids;
    std::set<VmId> seen;
    for (const auto& r : trace.records)
        if (seen.insert(r.vm_id).second) ids.push_back(r.vm_id);
    return ids;
}

void write_forecast_sidecar(const ExperimentConfig& cfg, const WorkloadTrace& trace,
                            const std::filesystem::path& out_dir) {
    TrainConfig tc = *cfg.forecaster;
    tc.seed = block_seed(cfg.seed, "init", tc.seed);

    std::ofstream out = open_out(out_dir / "forecast.ndjson");
    const Step horizon = trace.last_time() + 1;
    for (const auto& vm : trace_vm_ids(trace)) {
        const std::vector<double> series = cpu_series(trace, vm, horizon);
        const std::vector<SeriesSample> samples = make_one_step_series(series);
        std::string line = "{\"vm_id\":\"" + json_escape(vm) + "\"";
        if (samples.size() < static_cast<std::size_t>(tc.bptt_window)) {
            line += ",\"trained\":false}";
            out << line << "\n";
            continue;
        }
        const LstmModel init =
            init_lstm(1, kForecastHidden, 1, derive_seed(tc.seed, vm), tc.init_scale);
        const LstmTrainResult trained = train_lstm(init, samples, tc);
        std::string file_id = vm;
        for (char& c : file_id)
            if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.') c = '_';
        const std::string model_file = "forecaster_" + file_id + ".json";
        save_lstm(trained.model, out_dir / model_file);
        line += ",\"trained\":true";
        line += ",\"model\":\"" + json_escape(model_file) + "\"";
        line += ",\"one_step_mse\":" + format_double(lstm_one_step_mse(trained.model, samples));
        line += ",\"persistence_mse\":" + format_double(persistence_mse(series));
        if (!trained.loss_curve.empty())
            line += ",\"final_train_loss\":" + format_double(trained.loss_curve.back());
        line += "}";
        out << line << "\n";
    }
    if (!out) throw Error("write failed for " + (out_dir / "forecast.ndjson").string());
}

} // namespace

WorkloadTrace build_trace(const ExperimentConfig& cfg) {
    cfg.scenario.validate();
    if (cfg.scenario.trace) return load_trace(*cfg.scenario.trace);
    SynthConfig synth = *cfg.scenario.synth;
    synth.seed = block_seed(cfg.seed, "trace", synth.seed);
    return generate_synthetic(synth);
}

Simulation build_simulation(const ExperimentConfig& cfg) {
    cfg.validate();
    PowerModel power;
    power.powered_off_when_empty = cfg.scenario.powered_off_when_empty;
    if (cfg.scenario.power_mlp) {
        power.kind = PowerModel::Kind::Mlp;
        power.mlp = load_mlp(*cfg.scenario.power_mlp);
    }
    Simulation::Options options;
    options.initial_first_fit = cfg.scenario.initial_placement == "first_fit";
    options.proximity_weight = cfg.scenario.proximity_weight;
    return Simulation(cfg.scenario.pms, build_trace(cfg), cfg.sim, std::move(power), options);
}

dqn::Scenario build_scenario(const ExperimentConfig& cfg, const Simulation& sim) {
    dqn::Scenario scenario;
    for (const auto& pm : cfg.scenario.pms) scenario.pm_order.push_back(pm.id);
    for (const auto& vm : sim.state().vms) scenario.vm_order.push_back(vm.id);
    scenario.request_slots = cfg.scenario.request_slots;
    scenario.max_pending = cfg.scenario.max_pending;
    scenario.max_migrations = cfg.scenario.max_migrations;
    scenario.include_placement = cfg.scenario.include_placement;
    scenario.validate();
    return scenario;
}

dqn::SimEnv build_env(const ExperimentConfig& cfg) {
    Simulation sim = build_simulation(cfg);
    dqn::Scenario scenario = build_scenario(cfg, sim);
    dqn::RewardConfig reward = dqn::with_scenario_norms(cfg.agent.reward, sim);
    return dqn::SimEnv(std::move(sim), std::move(scenario), reward);
}

RunArtifacts run_simulate(const ExperimentConfig& cfg,
                          std::optional<std::filesystem::path> out_override) {
    cfg.validate();
    const std::filesystem::path out = out_override.value_or(cfg.output);

    RunArtifacts artifacts;
    std::optional<double> episode_return;

    if (cfg.policy == PolicyKind::Dqn || cfg.policy == PolicyKind::Random) {
        dqn::SimEnv env = build_env(cfg);
        dqn::QNetwork net;
        if (cfg.policy == PolicyKind::Dqn) {
            if (!cfg.policy_file) throw ConfigError("dqn policy needs a policy_file");
            SavedPolicy policy = load_policy(*cfg.policy_file);
            if (policy.net.model.output_dim() != static_cast<int>(env.actions().size()))
                throw ConfigError("policy file action count does not match the scenario");
            if (policy.net.model.input_dim() != static_cast<int>(env.observe().size()))
                throw ConfigError("policy file input size does not match the scenario");
            net = std::move(policy.net);
        }

        Rng rng(block_seed(cfg.seed, "sim", cfg.sim.seed));
        Rng greedy_rng(0);  // epsilon = 0 path never consults it for choice
        env.reset();
        double ep_return = 0.0;
        while (!env.done()) {
            const dqn::ActionMask mask = env.valid_mask();
            int a = 0;
            if (cfg.policy == PolicyKind::Dqn) {
                a = dqn::select_action(net, env.observe(), 0.0, mask, greedy_rng);
            } else {
                std::vector<int> valid;
                for (std::size_t i = 0; i < mask.size(); ++i)
                    if (mask[i]) valid.push_back(static_cast<int>(i));
                if (valid.empty()) throw ConfigError("no valid action available");
                a = valid[static_cast<std::size_t>(
                    rng.integer(static_cast<std::uint64_t>(valid.size())))];
            }
            dqn::SimEnv::Outcome outcome = env.step(a);
            ep_return += outcome.reward;
            artifacts.metrics.push_back(outcome.metrics);
            for (auto& e : outcome.events) artifacts.events.push_back(std::move(e));
        }
        episode_return = ep_return;
    } else {
        Simulation sim = build_simulation(cfg);
        while (!sim.done()) {
            std::vector<SimAction> actions;
            if (cfg.policy == PolicyKind::Threshold) {
                for (const auto& m : threshold_migrator(sim.state(), cfg.threshold))
                    actions.push_back(SimAction::migrate(m.vm, m.target));
            }
            const std::vector<UserRequest> due = sim.due_requests();
            for (std::size_t slot = 0; slot < due.size(); ++slot) {
                auto fit = cfg.policy == PolicyKind::BestFit ? best_fit(sim.state(), due[slot])
                                                             : first_fit(sim.state(), due[slot]);
                if (fit) actions.push_back(SimAction::place(slot, std::move(*fit)));
            }
            StepResult result = sim.step(actions);
            artifacts.metrics.push_back(result.metrics);
            for (auto& e : result.events) artifacts.events.push_back(std::move(e));
        }
    }

    ensure_dir(out);
    write_report(artifacts.metrics, artifacts.events, out, episode_return);
    artifacts.summary = summarize(artifacts.metrics, artifacts.events, episode_return);
    if (cfg.forecaster) write_forecast_sidecar(cfg, build_trace(cfg), out);
    return artifacts;
}

TrainOutput run_train(const ExperimentConfig& cfg,
                      std::optional<std::filesystem::path> out_override) {
    cfg.validate();
    const std::filesystem::path out = out_override.value_or(cfg.output);

    dqn::SimEnv env = build_env(cfg);
    dqn::AgentConfig agent = cfg.agent;
    agent.seed = block_seed(cfg.seed, "agent", agent.seed);
    agent.reward = env.reward_config();

    TrainOutput output;
    output.result = dqn::run_training(env, agent, cfg.episodes);

    ensure_dir(out);
    output.policy_path = out / "policy.json";
    output.curve_path = out / "returns.ndjson";

    std::vector<std::string> descriptors;
    for (std::size_t i = 0; i < env.actions().size(); ++i)
        descriptors.push_back(env.actions().descriptor(i));
    save_policy(output.result.qnet, descriptors, output.policy_path);

    std::ofstream curve = open_out(output.curve_path);
    for (std::size_t i = 0; i < output.result.returns.size(); ++i)
        curve << "{\"episode\":" << i
              << ",\"return\":" << format_double(output.result.returns[i]) << "}\n";
    if (!curve) throw Error("write failed for " + output.curve_path.string());
    return output;
}

EvalOutput run_evaluate(const ExperimentConfig& cfg, const std::filesystem::path& policy_file,
                        std::optional<std::filesystem::path> out_override) {
    cfg.validate();
    const std::filesystem::path out = out_override.value_or(cfg.output);
    const SavedPolicy policy = load_policy(policy_file);

    EvalOutput result;
    for (int i = 0; i < cfg.eval_seeds; ++i) {
        ExperimentConfig run_cfg = cfg;
        run_cfg.seed = cfg.seed + static_cast<std::uint64_t>(i);
        dqn::SimEnv env = build_env(run_cfg);
        if (policy.net.model.output_dim() != static_cast<int>(env.actions().size()))
            throw ConfigError("policy file action count does not match the scenario");
        if (policy.net.model.input_dim() != static_cast<int>(env.observe().size()))
            throw ConfigError("policy file input size does not match the scenario");

        EvalSeedResult r;
        r.seed = run_cfg.seed;
        r.policy_return = dqn::greedy_rollout(env, policy.net, &r.policy_energy);
        Rng rng(block_seed(run_cfg.seed, "sim", run_cfg.sim.seed));
        r.random_return = dqn::random_rollout(env, rng, &r.random_energy);
        result.per_seed.push_back(r);
    }

    const double n = static_cast<double>(result.per_seed.size());
    for (const auto& r : result.per_seed) {
        result.mean_return += r.policy_return / n;
        result.mean_energy += r.policy_energy / n;
    }
    for (const auto& r : result.per_seed) {
        result.std_return += (r.policy_return - result.mean_return) *
                             (r.policy_return - result.mean_return) / n;
        result.std_energy += (r.policy_energy - result.mean_energy) *
                             (r.policy_energy - result.mean_energy) / n;
    }
    result.std_return = std::sqrt(result.std_return);
    result.std_energy = std::sqrt(result.std_energy);

    ensure_dir(out);
    result.report_path = out / "evaluation.json";
    std::ofstream file = open_out(result.report_path);
    file << "{\n  \"seeds\": [";
    for (std::size_t i = 0; i < result.per_seed.size(); ++i) {
        const auto& r = result.per_seed[i];
        if (i) file << ",";
        file << "\n    {\"seed\": " << r.seed
             << ", \"policy_return\": " << format_double(r.policy_return)
             << ", \"policy_energy\": " << format_double(r.policy_energy)
             << ", \"random_return\": " << format_double(r.random_return)
             << ", \"random_energy\": " << format_double(r.random_energy) << "}";
    }
    file << "\n  ],\n";
    file << "  \"mean_return\": " << format_double(result.mean_return) << ",\n";
    file << "  \"std_return\": " << format_double(result.std_return) << ",\n";
    file << "  \"mean_energy\": " << format_double(result.mean_energy) << ",\n";
    file << "  \"std_energy\": " << format_double(result.std_energy) << "\n";
    file << "}\n";
    if (!file) throw Error("write failed for " + result.report_path.string());
    return result;
}

void run_forecast(const std::filesystem::path& model_file, const std::filesystem::path& trace_file,
                  int horizon, const std::filesystem::path& out) {
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    const LstmModel model = load_lstm(model_file);
    if (model.input_dim != 1 || model.output_dim != 1)
        throw ConfigError("forecast needs a scalar (1-in, 1-out) model");
    const WorkloadTrace trace = load_trace(trace_file);

    std::ofstream file = open_out(out);
    const Step history_end = trace.last_time() + 1;
    for (const auto& vm : trace_vm_ids(trace)) {
        const std::vector<double> series = cpu_series(trace, vm, history_end);
        std::vector<Eigen::VectorXd> history;
        history.reserve(series.size());
        for (double v : series) history.push_back(Eigen::VectorXd::Constant(1, v));
        const std::vector<Eigen::VectorXd> predictions = forecast(model, history, horizon);
        for (std::size_t k = 0; k < predictions.size(); ++k)
            file << "{\"vm_id\":\"" << json_escape(vm)
                 << "\",\"step\":" << history_end + static_cast<Step>(k)
                 << ",\"prediction\":" << format_double(predictions[k](0)) << "}\n";
    }
    if (!file) throw Error("write failed for " + out.string());
}

GradCheckResult run_gradcheck(std::uint64_t seed, int cases) {
    if (cases < 1) throw ConfigError("gradient check needs at least one case");
    Rng rng(seed);
    GradCheckResult result;
    for (int c = 0; c < cases; ++c) {
        const int input = 1 + static_cast<int>(rng.integer(3));
        const int hidden = 1 + static_cast<int>(rng.integer(4));
        const int output = 1 + static_cast<int>(rng.integer(2));
        const int length = 2 + static_cast<int>(rng.integer(9));

        const LstmModel lstm = init_lstm(input, hidden, output, rng.raw(), 0.5);
        std::vector<SeriesSample> sequence;
        for (int t = 0; t < length; ++t) {
            Eigen::VectorXd x(input), target(output);
            for (int i = 0; i < input; ++i) x(i) = rng.uniform(-1.0, 1.0);
            for (int i = 0; i < output; ++i) target(i) = rng.uniform(-1.0, 1.0);
            sequence.emplace_back(std::move(x), std::move(target));
        }
        result.lstm_max = std::max(result.lstm_max, lstm_gradient_check(lstm, sequence));

        const MlpModel mlp =
            init_mlp({input, hidden, output}, Activation::Tanh, rng.raw(), 0.5);
        std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> batch;
        const int batch_size = 1 + static_cast<int>(rng.integer(8));
        for (int b = 0; b < batch_size; ++b) {
            Eigen::VectorXd x(input), target(output);
            for (int i = 0; i < input; ++i) x(i) = rng.uniform(-1.0, 1.0);
            for (int i = 0; i < output; ++i) target(i) = rng.uniform(-1.0, 1.0);
            batch.emplace_back(std::move(x), std::move(target));
        }
        result.mlp_max = std::max(result.mlp_max, mlp_gradient_check(mlp, batch));
    }
    return result;
}

void run_gentrace(const SynthConfig& cfg, const std::filesystem::path& out) {
    cfg.validate();
    write_trace(generate_synthetic(cfg), out);
}

} // namespace vmsim
