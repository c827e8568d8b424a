#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "vmsim/model_io.hpp"
#include "vmsim/trace.hpp"

using namespace vmsim;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string output;  // stdout and stderr combined
};

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("vmsim_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    fs::path file(const std::string& name) const { return path / name; }
};

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

CliResult run_cli(const TempDir& dir, const std::string& args) {
    const fs::path log = dir.file("cli_output.log");
    const std::string command = "cd '" + dir.path.string() + "' && '" + VMSIM_CLI_PATH + "' " +
                                args + " > '" + log.string() + "' 2>&1";
    const int status = std::system(command.c_str());
    CliResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.output = read_file(log);
    return result;
}

bool same_bytes(const fs::path& a, const fs::path& b) { return read_file(a) == read_file(b); }

// Small first-fit scenario over a synthetic workload with a few arrivals.
std::string simulate_config(const std::string& output) {
    return std::string(R"({
  "scenario": {
    "pms": [
      {"id": "pm0", "cpu_capacity": 1.0, "mem_capacity": 1024},
      {"id": "pm1", "cpu_capacity": 1.0, "mem_capacity": 1024}
    ],
    "synth": {"num_vms": 3, "horizon": 40, "arrival_rate": 0.15, "seed": 5},
    "initial_placement": "first_fit"
  },
  "sim": {"horizon": 30},
  "policy": "first_fit",
  "output": ")") +
           output + "\",\n  \"seed\": 11\n}\n";
}

std::string train_config(const std::string& output) {
    return std::string(R"({
  "scenario": {
    "pms": [
      {"id": "pm0", "power_idle": 100, "power_peak": 200},
      {"id": "pm1", "power_idle": 100, "power_peak": 200}
    ],
    "synth": {"num_vms": 2, "horizon": 10, "base": 0.2, "amplitude": 0.0, "noise_sigma": 0.0,
              "arrival_rate": 0.0, "seed": 2},
    "request_slots": 0,
    "powered_off_when_empty": true
  },
  "sim": {"horizon": 6},
  "policy": "dqn",
  "agent": {"batch_size": 4, "replay_capacity": 64, "hidden_dims": [8],
            "epsilon_decay_steps": 30, "learning_rate": 0.01,
            "reward": {"w_util": 1.0, "w_energy": 1.0, "w_migration": 0.05}},
  "episodes": 4,
  "eval_seeds": 2,
  "output": ")") +
           output + "\",\n  \"seed\": 9\n}\n";
}

} // namespace

TEST_CASE("help and argument errors") {
    TempDir dir;
    CHECK(run_cli(dir, "--help").exit_code == 0);
    const CliResult help = run_cli(dir, "--help");
    CHECK(help.output.find("simulate") != std::string::npos);
    CHECK(help.output.find("gentrace") != std::string::npos);

    CHECK(run_cli(dir, "").exit_code == 2);           // a subcommand is required
    CHECK(run_cli(dir, "simulate").exit_code == 2);   // --config is required
    CHECK(run_cli(dir, "frobnicate").exit_code == 2); // unknown subcommand
}

TEST_CASE("simulate: report layout and deterministic reruns") {
    TempDir dir;
    write_file(dir.file("exp.json"), simulate_config("run_a"));
    const CliResult first = run_cli(dir, "simulate --config exp.json");
    CHECK(first.exit_code == 0);
    REQUIRE(fs::exists(dir.file("run_a/metrics.ndjson")));
    REQUIRE(fs::exists(dir.file("run_a/events.ndjson")));
    REQUIRE(fs::exists(dir.file("run_a/summary.json")));

    // 30 sim steps, one metrics line each.
    const auto metrics = read_metrics_ndjson(dir.file("run_a/metrics.ndjson"));
    CHECK(metrics.size() == 30);

    CHECK(run_cli(dir, "simulate --config exp.json --out run_b").exit_code == 0);
    CHECK(same_bytes(dir.file("run_a/metrics.ndjson"), dir.file("run_b/metrics.ndjson")));
    CHECK(same_bytes(dir.file("run_a/events.ndjson"), dir.file("run_b/events.ndjson")));
    CHECK(same_bytes(dir.file("run_a/summary.json"), dir.file("run_b/summary.json")));

    // A different seed changes the workload and with it the report.
    CHECK(run_cli(dir, "simulate --config exp.json --out run_c --seed 99").exit_code == 0);
    CHECK_FALSE(same_bytes(dir.file("run_a/metrics.ndjson"), dir.file("run_c/metrics.ndjson")));

    // --horizon overrides the config.
    CHECK(run_cli(dir, "simulate --config exp.json --out run_d --horizon 7").exit_code == 0);
    CHECK(read_metrics_ndjson(dir.file("run_d/metrics.ndjson")).size() == 7);
}

TEST_CASE("simulate: config and data errors use distinct exit codes") {
    TempDir dir;

    SUBCASE("missing config file") {
        const CliResult r = run_cli(dir, "simulate --config nope.json");
        CHECK(r.exit_code == 2);
        CHECK(r.output.find("config error") != std::string::npos);
    }

    SUBCASE("unknown key") {
        std::string cfg = simulate_config("out");
        cfg.insert(cfg.find("\"seed\""), "\"typo_key\": 1,\n  ");
        write_file(dir.file("exp.json"), cfg);
        const CliResult r = run_cli(dir, "simulate --config exp.json");
        CHECK(r.exit_code == 2);
        CHECK(r.output.find("typo_key") != std::string::npos);
    }

    SUBCASE("both trace and synth") {
        std::string cfg = simulate_config("out");
        cfg.insert(cfg.find("\"synth\""), "\"trace\": \"t.csv\",\n    ");
        write_file(dir.file("exp.json"), cfg);
        CHECK(run_cli(dir, "simulate --config exp.json").exit_code == 2);
    }

    SUBCASE("missing trace file") {
        std::string cfg = simulate_config("out");
        const auto pos = cfg.find("\"synth\": {");
        const auto end = cfg.find("},", pos);
        cfg.replace(pos, end + 1 - pos, "\"trace\": \"missing.csv\"");
        write_file(dir.file("exp.json"), cfg);
        const CliResult r = run_cli(dir, "simulate --config exp.json");
        CHECK(r.exit_code == 3);
        CHECK(r.output.find("data error") != std::string::npos);
    }

    SUBCASE("corrupt trace file") {
        std::string cfg = simulate_config("out");
        const auto pos = cfg.find("\"synth\": {");
        const auto end = cfg.find("},", pos);
        cfg.replace(pos, end + 1 - pos, "\"trace\": \"bad.csv\"");
        write_file(dir.file("exp.json"), cfg);
        write_file(dir.file("bad.csv"),
                   "time,vm_id,cpu,mem,storage_io,net_io\n0,a,2.5,64,0,0\n");
        const CliResult r = run_cli(dir, "simulate --config exp.json");
        CHECK(r.exit_code == 3);
        CHECK(r.output.find("bad.csv") != std::string::npos);
    }
}

TEST_CASE("gentrace: deterministic per seed") {
    TempDir dir;
    write_file(dir.file("synth.json"),
               R"({"num_vms": 2, "horizon": 20, "noise_sigma": 0.05, "arrival_rate": 0.2, "seed": 4})");
    CHECK(run_cli(dir, "gentrace --config synth.json --out a.csv").exit_code == 0);
    CHECK(run_cli(dir, "gentrace --config synth.json --out b.csv").exit_code == 0);
    CHECK(same_bytes(dir.file("a.csv"), dir.file("b.csv")));

    CHECK(run_cli(dir, "gentrace --config synth.json --out c.csv --seed 77").exit_code == 0);
    CHECK_FALSE(same_bytes(dir.file("a.csv"), dir.file("c.csv")));

    const WorkloadTrace trace = load_trace(dir.file("a.csv"));
    CHECK(trace.records.size() == 2u * 20u);
    CHECK_NOTHROW(trace.validate());
}

TEST_CASE("forecast: one prediction per VM per horizon step") {
    TempDir dir;
    write_file(dir.file("synth.json"), R"({"num_vms": 3, "horizon": 30, "seed": 8})");
    REQUIRE(run_cli(dir, "gentrace --config synth.json --out t.csv").exit_code == 0);
    save_lstm(init_lstm(1, 4, 1, 21, 0.3), dir.file("model.json"));

    const CliResult r = run_cli(dir, "forecast model.json t.csv --horizon 1 --out fc.ndjson");
    CHECK(r.exit_code == 0);
    std::istringstream lines(read_file(dir.file("fc.ndjson")));
    int count = 0;
    std::string line;
    while (std::getline(lines, line))
        if (!line.empty()) ++count;
    CHECK(count == 3);  // one line per VM at horizon 1

    CHECK(run_cli(dir, "forecast model.json t.csv --horizon 5 --out fc5.ndjson").exit_code == 0);
    std::istringstream lines5(read_file(dir.file("fc5.ndjson")));
    count = 0;
    while (std::getline(lines5, line))
        if (!line.empty()) ++count;
    CHECK(count == 15);

    CHECK(run_cli(dir, "forecast model.json t.csv --horizon 0").exit_code == 2);
    CHECK(run_cli(dir, "forecast missing.json t.csv").exit_code == 3);
}

TEST_CASE("gradcheck: reports the max errors and exits clean") {
    TempDir dir;
    const CliResult r = run_cli(dir, "gradcheck --seed 5");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("max relative error") != std::string::npos);
    CHECK(r.output.find("lstm=") != std::string::npos);
    CHECK(r.output.find("mlp=") != std::string::npos);
}

TEST_CASE("train and evaluate round-trip through a saved policy") {
    TempDir dir;
    write_file(dir.file("exp.json"), train_config("train_a"));
    const CliResult train = run_cli(dir, "train --config exp.json");
    CHECK(train.exit_code == 0);
    REQUIRE(fs::exists(dir.file("train_a/policy.json")));
    REQUIRE(fs::exists(dir.file("train_a/returns.ndjson")));

    const SavedPolicy policy = load_policy(dir.file("train_a/policy.json"));
    CHECK(policy.actions.size() == 2u * 2u + 2u);  // 2 VMs x 2 PMs + Defer + NoOp

    // Reruns are byte-identical.
    CHECK(run_cli(dir, "train --config exp.json --out train_b").exit_code == 0);
    CHECK(same_bytes(dir.file("train_a/policy.json"), dir.file("train_b/policy.json")));
    CHECK(same_bytes(dir.file("train_a/returns.ndjson"), dir.file("train_b/returns.ndjson")));

    const CliResult eval =
        run_cli(dir, "evaluate --config exp.json --policy-file train_a/policy.json --out ev");
    CHECK(eval.exit_code == 0);
    CHECK(fs::exists(dir.file("ev/evaluation.json")));

    CHECK(run_cli(dir, "evaluate --config exp.json --policy-file nope.json").exit_code == 3);
}
