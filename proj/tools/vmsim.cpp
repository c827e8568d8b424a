#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "vmsim/config.hpp"
#include "vmsim/errors.hpp"
#include "vmsim/experiment.hpp"

namespace {

constexpr double kGradCheckThreshold = 1e-4;
constexpr int kGradCheckCases = 20;

std::optional<std::filesystem::path> optional_path(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return std::filesystem::path(s);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic datacenter simulator with learned placement policies"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_path;
    std::string policy_file;
    std::string model_file;
    std::string trace_file;
    std::uint64_t seed = 0;
    std::int64_t horizon = 0;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* config = cmd->add_option("--config", config_path, "experiment config (JSON)");
        if (needs_config) config->required();
        cmd->add_option("--out", out_path, "output location (overrides the config)");
        return std::pair{cmd->add_option("--seed", seed, "override the top-level seed"),
                         cmd->add_option("--horizon", horizon, "override sim.horizon")};
    };

    auto* cmd_simulate = app.add_subcommand("simulate", "run one episode under the configured policy");
    auto [sim_seed, sim_horizon] = add_common(cmd_simulate, true);

    auto* cmd_train = app.add_subcommand("train", "train the agent, save policy and return curve");
    auto [train_seed, train_horizon] = add_common(cmd_train, true);

    auto* cmd_evaluate = app.add_subcommand("evaluate", "frozen-policy rollouts over several seeds");
    auto [eval_seed, eval_horizon] = add_common(cmd_evaluate, true);
    cmd_evaluate->add_option("--policy-file", policy_file, "trained policy (JSON)")->required();

    auto* cmd_forecast = app.add_subcommand("forecast", "roll a saved model over a trace");
    cmd_forecast->add_option("model", model_file, "forecaster model (JSON)")->required();
    cmd_forecast->add_option("trace", trace_file, "demand trace (CSV)")->required();
    std::int64_t forecast_horizon = 24;
    cmd_forecast->add_option("--horizon", forecast_horizon, "steps to predict");
    std::string forecast_out = "forecast.ndjson";
    cmd_forecast->add_option("--out", forecast_out, "output file (NDJSON)");

    auto* cmd_gradcheck = app.add_subcommand("gradcheck",
                                             "compare analytic gradients with finite differences");
    cmd_gradcheck->add_option("--seed", seed, "randomization seed");

    auto* cmd_gentrace = app.add_subcommand("gentrace", "write a synthetic demand trace");
    cmd_gentrace->add_option("--config", config_path, "synthetic trace parameters (JSON)")
        ->required();
    std::string gentrace_out = "trace.csv";
    cmd_gentrace->add_option("--out", gentrace_out, "output file (CSV)");
    auto* gentrace_seed = cmd_gentrace->add_option("--seed", seed, "override the trace seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (cmd_simulate->parsed() || cmd_train->parsed() || cmd_evaluate->parsed()) {
            vmsim::ExperimentConfig cfg = vmsim::load_experiment_config(config_path);
            const auto [seed_opt, horizon_opt] = cmd_simulate->parsed()
                                                     ? std::pair{sim_seed, sim_horizon}
                                                 : cmd_train->parsed()
                                                     ? std::pair{train_seed, train_horizon}
                                                     : std::pair{eval_seed, eval_horizon};
            if (seed_opt->count()) cfg.seed = seed;
            if (horizon_opt->count()) {
                cfg.sim.horizon = horizon;
                cfg.sim.validate();
            }

            if (cmd_simulate->parsed()) {
                const vmsim::RunArtifacts artifacts =
                    vmsim::run_simulate(cfg, optional_path(out_path));
                std::cout << "report written to "
                          << optional_path(out_path).value_or(cfg.output).string() << "\n";
                std::cout << "total energy: " << artifacts.summary.total_energy_joules
                          << " J, mean utilization: " << artifacts.summary.mean_utilization
                          << "\n";
            } else if (cmd_train->parsed()) {
                const vmsim::TrainOutput output = vmsim::run_train(cfg, optional_path(out_path));
                std::cout << "policy written to " << output.policy_path.string() << "\n";
                std::cout << "return curve written to " << output.curve_path.string() << "\n";
                if (!output.result.returns.empty())
                    std::cout << "final episode return: " << output.result.returns.back() << "\n";
            } else {
                const vmsim::EvalOutput output =
                    vmsim::run_evaluate(cfg, policy_file, optional_path(out_path));
                std::cout << "evaluation written to " << output.report_path.string() << "\n";
                std::cout << "mean return: " << output.mean_return
                          << " (std " << output.std_return << "), mean energy: "
                          << output.mean_energy << " J\n";
            }
            return 0;
        }

        if (cmd_forecast->parsed()) {
            if (forecast_horizon < 1) throw vmsim::ConfigError("--horizon must be >= 1");
            vmsim::run_forecast(model_file, trace_file, static_cast<int>(forecast_horizon),
                                forecast_out);
            std::cout << "forecast written to " << forecast_out << "\n";
            return 0;
        }

        if (cmd_gradcheck->parsed()) {
            const vmsim::GradCheckResult result = vmsim::run_gradcheck(seed, kGradCheckCases);
            std::cout << "max relative error over " << kGradCheckCases
                      << " cases: lstm=" << result.lstm_max << " mlp=" << result.mlp_max << "\n";
            if (result.lstm_max >= kGradCheckThreshold || result.mlp_max >= kGradCheckThreshold) {
                std::cerr << "gradient check failed: threshold " << kGradCheckThreshold << "\n";
                return 4;
            }
            return 0;
        }

        if (cmd_gentrace->parsed()) {
            vmsim::SynthConfig synth = vmsim::load_synth_config(config_path);
            if (gentrace_seed->count()) synth.seed = seed;
            vmsim::run_gentrace(synth, gentrace_out);
            std::cout << "trace written to " << gentrace_out << "\n";
            return 0;
        }
    } catch (const vmsim::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const vmsim::ParseError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const vmsim::InputError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
