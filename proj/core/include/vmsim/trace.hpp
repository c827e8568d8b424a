#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vmsim/types.hpp"

namespace vmsim {

struct SimEvent;
struct StepMetrics;

// One row of the demand trace: absolute levels for vm_id from `time` onward.
// Gaps hold the previous value (zero-order hold).
struct TraceRecord {
    Step time = 0;
    VmId vm_id;
    double cpu = 0.0;
    double mem = 0.0;
    double storage_io = 0.0;
    double net_io = 0.0;
};

// One row of the arrivals file. vm_count VMs, each with the given demands;
// duration in steps; anti_affinity spreads the request's VMs across fault
// domains.
struct ArrivalRecord {
    Step arrival_time = 0;
    std::string request_id;
    int vm_count = 1;
    double cpu = 0.0;
    double mem = 0.0;
    Step duration = 0;
    Point2D origin{0.0, 0.0};
    bool anti_affinity = false;
};

struct TraceMeta {
    double step_seconds = 1.0;
    // Normalization constants for the I/O feature rates; max over the
    // records, floored at 1.
    double max_storage_io = 1.0;
    double max_net_io = 1.0;
};

struct WorkloadTrace {
    TraceMeta meta;
    std::vector<TraceRecord> records;     // sorted by (time, vm_id)
    std::vector<ArrivalRecord> arrivals;  // sorted by (arrival_time, request_id)

    void validate() const;
    Step last_time() const;
};

// Expands an arrival row into a request: vm_count VMs named
// "<request_id>.N", an anti-affinity constraint when flagged, and a
// proximity constraint when proximity_weight > 0.
UserRequest to_request(const ArrivalRecord& a, double proximity_weight);

// Synthetic workload: per-VM sinusoid with per-VM phase plus gaussian noise,
// clamped to [0,1]; Poisson(arrival_rate) single-VM requests per step.
struct SynthConfig {
    int num_vms = 4;
    Step horizon = 100;
    double base = 0.3;
    double amplitude = 0.15;
    Step period = 24;
    double noise_sigma = 0.02;
    double arrival_rate = 0.0;  // requests per step
    std::uint64_t seed = 0;

    // Fixed traits of generated VMs and arrivals.
    double mem = 256.0;
    Step arrival_duration = 10;
    double arrival_cpu = 0.2;
    double arrival_mem = 128.0;

    void validate() const;
};

// Parses CSV with exact header "time,vm_id,cpu,mem,storage_io,net_io" and,
// when present, the sibling "<stem>.arrivals.csv" with header
// "arrival_time,request_id,vm_count,cpu,mem,duration,origin_x,origin_y,anti_affinity".
// Violations raise ParseError naming file and line.
WorkloadTrace load_trace(const std::filesystem::path& path);

WorkloadTrace generate_synthetic(const SynthConfig& cfg);

// Writes the trace (and arrivals when non-empty) in the load_trace format.
// Numbers use the shortest round-trip decimal form, so load(write(t))
// round-trips exactly.
void write_trace(const WorkloadTrace& trace, const std::filesystem::path& path);

std::string format_double(double v);

// Escapes quotes, backslashes, and control characters for JSON string
// literals.
std::string json_escape(const std::string& s);

struct RunSummary {
    double total_energy_joules = 0.0;
    double mean_utilization = 0.0;
    std::int64_t total_downtime_steps = 0;
    std::int64_t migrations_completed = 0;
    std::int64_t requests_admitted = 0;
    std::int64_t requests_deferred = 0;  // distinct requests ever deferred
    double mean_soft_penalty = 0.0;
    std::optional<double> episode_return;
};

RunSummary summarize(const std::vector<StepMetrics>& metrics, const std::vector<SimEvent>& events,
                     std::optional<double> episode_return = std::nullopt);

// Writes metrics.ndjson (one object per step, keys = StepMetrics fields),
// events.ndjson, and summary.json into `dir`, creating it if needed.
void write_report(const std::vector<StepMetrics>& metrics, const std::vector<SimEvent>& events,
                  const std::filesystem::path& dir,
                  std::optional<double> episode_return = std::nullopt);

// Re-parses a metrics.ndjson stream (round-trip checks, report tooling).
std::vector<StepMetrics> read_metrics_ndjson(const std::filesystem::path& path);

// Per-step cpu values of one VM over [0, horizon), applying the zero-order
// hold between records.
std::vector<double> cpu_series(const WorkloadTrace& trace, const VmId& vm, Step horizon);

} // namespace vmsim
