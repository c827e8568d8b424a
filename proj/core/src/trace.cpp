#include "vmsim/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "vmsim/rng.hpp"
#include "vmsim/sim.hpp"

namespace vmsim {

namespace {

constexpr const char* kTraceHeader = "time,vm_id,cpu,mem,storage_io,net_io";
constexpr const char* kArrivalsHeader =
    "arrival_time,request_id,vm_count,cpu,mem,duration,origin_x,origin_y,anti_affinity";

[[noreturn]] void parse_fail(const std::filesystem::path& file, std::size_t line,
                             const std::string& message) {
    throw ParseError(file.string() + ":" + std::to_string(line) + ": " + message);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s, const std::filesystem::path& file, std::size_t line,
                    const char* column) {
    double v = 0.0;
    const char* begin = s.data();
    const char* end = begin + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc{} || ptr != end || !std::isfinite(v))
        parse_fail(file, line, std::string("malformed number in column ") + column + ": '" + s + "'");
    return v;
}

std::int64_t parse_int(const std::string& s, const std::filesystem::path& file, std::size_t line,
                       const char* column) {
    std::int64_t v = 0;
    const char* begin = s.data();
    const char* end = begin + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc{} || ptr != end)
        parse_fail(file, line, std::string("malformed integer in column ") + column + ": '" + s + "'");
    return v;
}

bool parse_bool(const std::string& s, const std::filesystem::path& file, std::size_t line,
                const char* column) {
    if (s == "0" || s == "false") return false;
    if (s == "1" || s == "true") return true;
    parse_fail(file, line, std::string("malformed boolean in column ") + column + ": '" + s + "'");
}

std::filesystem::path arrivals_path(const std::filesystem::path& trace_path) {
    std::filesystem::path p = trace_path;
    p.replace_extension();
    p += ".arrivals.csv";
    return p;
}

std::string metrics_line(const StepMetrics& m) {
    std::string line = "{\"time\":" + std::to_string(m.time);
    line += ",\"total_power\":" + format_double(m.total_power);
    line += ",\"energy_joules\":" + format_double(m.energy_joules);
    line += ",\"cpu_utilization\":" + format_double(m.cpu_utilization);
    line += ",\"util_stddev\":" + format_double(m.util_stddev);
    line += ",\"migrations_active\":" + std::to_string(m.migrations_active);
    line += ",\"downtime_steps\":" + std::to_string(m.downtime_steps);
    line += ",\"deferred_requests\":" + std::to_string(m.deferred_requests);
    line += ",\"soft_penalty_total\":" + format_double(m.soft_penalty_total);
    line += "}";
    return line;
}

std::string event_line(const SimEvent& e) {
    std::string line = "{\"time\":" + std::to_string(e.time);
    line += ",\"kind\":\"" + std::string(to_string(e.kind)) + "\"";
    if (!e.request.empty()) line += ",\"request\":\"" + json_escape(e.request) + "\"";
    if (!e.vm.empty()) line += ",\"vm\":\"" + json_escape(e.vm) + "\"";
    if (!e.pm.empty()) line += ",\"pm\":\"" + json_escape(e.pm) + "\"";
    if (!e.detail.empty()) line += ",\"detail\":\"" + json_escape(e.detail) + "\"";
    line += "}";
    return line;
}

} // namespace

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw Error("number formatting failed");
    return std::string(buf, ptr);
}

std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        case '\t': out += "\\t"; break;
        default:
            if (static_cast<unsigned char>(c) < 0x20) {
                char buf[8];
                std::snprintf(buf, sizeof buf, "\\u%04x", c);
                out += buf;
            } else {
                out += c;
            }
        }
    }
    return out;
}

void WorkloadTrace::validate() const {
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.time < 0) throw ParseError("trace record time must be >= 0");
        if (r.vm_id.empty()) throw ParseError("trace record vm_id must be non-empty");
        if (r.cpu < 0.0 || r.cpu > 1.0) throw ParseError("trace cpu out of [0,1]");
        if (r.mem < 0.0 || r.storage_io < 0.0 || r.net_io < 0.0)
            throw ParseError("trace demands must be >= 0");
        if (i > 0) {
            const auto& prev = records[i - 1];
            if (std::tie(prev.time, prev.vm_id) >= std::tie(r.time, r.vm_id))
                throw ParseError("trace records not sorted by (time, vm_id)");
        }
    }
    for (std::size_t i = 0; i < arrivals.size(); ++i) {
        const auto& a = arrivals[i];
        if (a.arrival_time < 0) throw ParseError("arrival_time must be >= 0");
        if (a.request_id.empty()) throw ParseError("request_id must be non-empty");
        if (a.vm_count < 1) throw ParseError("vm_count must be >= 1");
        if (a.duration < 1) throw ParseError("arrival duration must be >= 1");
        if (a.cpu < 0.0 || a.cpu > 1.0) throw ParseError("arrival cpu out of [0,1]");
        if (a.mem < 0.0) throw ParseError("arrival mem must be >= 0");
        if (i > 0) {
            const auto& prev = arrivals[i - 1];
            if (std::tie(prev.arrival_time, prev.request_id) >=
                std::tie(a.arrival_time, a.request_id))
                throw ParseError("arrivals not sorted by (arrival_time, request_id)");
        }
    }
}

Step WorkloadTrace::last_time() const {
    Step last = 0;
    if (!records.empty()) last = std::max(last, records.back().time);
    if (!arrivals.empty()) last = std::max(last, arrivals.back().arrival_time);
    return last;
}

UserRequest to_request(const ArrivalRecord& a, double proximity_weight) {
    UserRequest req;
    req.id = a.request_id;
    req.arrival_time = a.arrival_time;
    req.duration = a.duration;
    req.origin = a.origin;
    for (int i = 0; i < a.vm_count; ++i) {
        VirtualMachine vm;
        vm.id = a.request_id + "." + std::to_string(i);
        vm.cpu_demand = a.cpu;
        vm.mem_demand = a.mem;
        vm.mem_footprint = a.mem;
        if (a.anti_affinity) vm.group = a.request_id;
        req.vms.push_back(std::move(vm));
    }
    if (a.anti_affinity) req.hard.push_back(HardConstraint{a.request_id});
    if (proximity_weight > 0.0)
        req.soft.push_back(SoftConstraint{SoftConstraint::Kind::Proximity, proximity_weight, ""});
    req.validate();
    return req;
}

void SynthConfig::validate() const {
    if (num_vms < 0) throw ConfigError("synth num_vms must be >= 0");
    if (horizon < 1) throw ConfigError("synth horizon must be >= 1");
    if (period < 1) throw ConfigError("synth period must be >= 1");
    if (!std::isfinite(base) || !std::isfinite(amplitude))
        throw ConfigError("synth base/amplitude must be finite");
    if (noise_sigma < 0.0) throw ConfigError("synth noise_sigma must be >= 0");
    if (arrival_rate < 0.0) throw ConfigError("synth arrival_rate must be >= 0");
    if (mem < 0.0 || arrival_cpu < 0.0 || arrival_cpu > 1.0 || arrival_mem < 0.0)
        throw ConfigError("synth demand fields out of range");
    if (arrival_duration < 1) throw ConfigError("synth arrival_duration must be >= 1");
}

WorkloadTrace load_trace(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open trace file " + path.string());

    WorkloadTrace trace;
    std::string line;
    std::size_t lineno = 0;

    if (!std::getline(in, line)) parse_fail(path, 1, "empty file, expected header");
    ++lineno;
    if (line != kTraceHeader)
        parse_fail(path, lineno, std::string("expected header '") + kTraceHeader + "'");

    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto fields = split_csv(line);
        if (fields.size() != 6) parse_fail(path, lineno, "expected 6 columns");
        TraceRecord r;
        r.time = parse_int(fields[0], path, lineno, "time");
        r.vm_id = fields[1];
        r.cpu = parse_double(fields[2], path, lineno, "cpu");
        r.mem = parse_double(fields[3], path, lineno, "mem");
        r.storage_io = parse_double(fields[4], path, lineno, "storage_io");
        r.net_io = parse_double(fields[5], path, lineno, "net_io");
        if (r.time < 0) parse_fail(path, lineno, "time must be >= 0");
        if (r.vm_id.empty()) parse_fail(path, lineno, "vm_id must be non-empty");
        if (r.cpu < 0.0 || r.cpu > 1.0) parse_fail(path, lineno, "cpu out of [0,1]");
        if (r.mem < 0.0 || r.storage_io < 0.0 || r.net_io < 0.0)
            parse_fail(path, lineno, "demand columns must be >= 0");
        if (!trace.records.empty()) {
            const auto& prev = trace.records.back();
            if (std::tie(prev.time, prev.vm_id) >= std::tie(r.time, r.vm_id))
                parse_fail(path, lineno, "rows not sorted by (time, vm_id)");
        }
        trace.records.push_back(std::move(r));
    }

    const auto apath = arrivals_path(path);
    if (std::filesystem::exists(apath)) {
        std::ifstream ain(apath);
        if (!ain) throw ParseError("cannot open arrivals file " + apath.string());
        lineno = 0;
        if (!std::getline(ain, line)) parse_fail(apath, 1, "empty file, expected header");
        ++lineno;
        if (line != kArrivalsHeader)
            parse_fail(apath, lineno, std::string("expected header '") + kArrivalsHeader + "'");
        while (std::getline(ain, line)) {
            ++lineno;
            if (line.empty()) continue;
            const auto fields = split_csv(line);
            if (fields.size() != 9) parse_fail(apath, lineno, "expected 9 columns");
            ArrivalRecord a;
            a.arrival_time = parse_int(fields[0], apath, lineno, "arrival_time");
            a.request_id = fields[1];
            a.vm_count = static_cast<int>(parse_int(fields[2], apath, lineno, "vm_count"));
            a.cpu = parse_double(fields[3], apath, lineno, "cpu");
            a.mem = parse_double(fields[4], apath, lineno, "mem");
            a.duration = parse_int(fields[5], apath, lineno, "duration");
            a.origin.x = parse_double(fields[6], apath, lineno, "origin_x");
            a.origin.y = parse_double(fields[7], apath, lineno, "origin_y");
            a.anti_affinity = parse_bool(fields[8], apath, lineno, "anti_affinity");
            if (a.arrival_time < 0) parse_fail(apath, lineno, "arrival_time must be >= 0");
            if (a.request_id.empty()) parse_fail(apath, lineno, "request_id must be non-empty");
            if (a.vm_count < 1) parse_fail(apath, lineno, "vm_count must be >= 1");
            if (a.duration < 1) parse_fail(apath, lineno, "duration must be >= 1");
            if (a.cpu < 0.0 || a.cpu > 1.0) parse_fail(apath, lineno, "cpu out of [0,1]");
            if (a.mem < 0.0) parse_fail(apath, lineno, "mem must be >= 0");
            if (!trace.arrivals.empty()) {
                const auto& prev = trace.arrivals.back();
                if (std::tie(prev.arrival_time, prev.request_id) >=
                    std::tie(a.arrival_time, a.request_id))
                    parse_fail(apath, lineno, "rows not sorted by (arrival_time, request_id)");
            }
            trace.arrivals.push_back(std::move(a));
        }
    }

    for (const auto& r : trace.records) {
        trace.meta.max_storage_io = std::max(trace.meta.max_storage_io, r.storage_io);
        trace.meta.max_net_io = std::max(trace.meta.max_net_io, r.net_io);
    }
    return trace;
}

WorkloadTrace generate_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);

    std::vector<VmId> vm_ids;
    std::vector<Step> phases;
    for (int i = 0; i < cfg.num_vms; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "vm%02d", i);
        vm_ids.emplace_back(buf);
        phases.push_back(static_cast<Step>(rng.integer(static_cast<std::uint64_t>(cfg.period))));
    }

    WorkloadTrace trace;
    constexpr double kTwoPi = 2.0 * 3.14159265358979323846;
    for (Step t = 0; t < cfg.horizon; ++t) {
        for (int i = 0; i < cfg.num_vms; ++i) {
            // Integer phase keeps the angle argument bit-identical across
            // periods, so noise-free traces are exactly periodic.
            const Step wrapped = (t + phases[static_cast<std::size_t>(i)]) % cfg.period;
            double cpu = cfg.base +
                         cfg.amplitude * std::sin(kTwoPi * static_cast<double>(wrapped) /
                                                  static_cast<double>(cfg.period));
            if (cfg.noise_sigma > 0.0) cpu += rng.gaussian(0.0, cfg.noise_sigma);
            cpu = std::clamp(cpu, 0.0, 1.0);
            TraceRecord r;
            r.time = t;
            r.vm_id = vm_ids[static_cast<std::size_t>(i)];
            r.cpu = cpu;
            r.mem = cfg.mem;
            r.storage_io = 0.5 * cpu;
            r.net_io = cpu;
            trace.records.push_back(std::move(r));
        }
        if (cfg.arrival_rate > 0.0) {
            const int k = rng.poisson(cfg.arrival_rate);
            for (int j = 0; j < k; ++j) {
                char buf[32];
                std::snprintf(buf, sizeof buf, "r%lld_%02d", static_cast<long long>(t), j);
                ArrivalRecord a;
                a.arrival_time = t;
                a.request_id = buf;
                a.vm_count = 1;
                a.cpu = cfg.arrival_cpu;
                a.mem = cfg.arrival_mem;
                a.duration = cfg.arrival_duration;
                a.origin.x = rng.uniform(0.0, 10.0);
                a.origin.y = rng.uniform(0.0, 10.0);
                a.anti_affinity = false;
                trace.arrivals.push_back(std::move(a));
            }
        }
    }

    for (const auto& r : trace.records) {
        trace.meta.max_storage_io = std::max(trace.meta.max_storage_io, r.storage_io);
        trace.meta.max_net_io = std::max(trace.meta.max_net_io, r.net_io);
    }
    trace.validate();
    return trace;
}

void write_trace(const WorkloadTrace& trace, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write trace file " + path.string());
    out << kTraceHeader << "\n";
    for (const auto& r : trace.records) {
        out << r.time << ',' << r.vm_id << ',' << format_double(r.cpu) << ','
            << format_double(r.mem) << ',' << format_double(r.storage_io) << ','
            << format_double(r.net_io) << "\n";
    }
    if (!out) throw Error("write failed for " + path.string());

    if (!trace.arrivals.empty()) {
        const auto apath = arrivals_path(path);
        std::ofstream aout(apath);
        if (!aout) throw Error("cannot write arrivals file " + apath.string());
        aout << kArrivalsHeader << "\n";
        for (const auto& a : trace.arrivals) {
            aout << a.arrival_time << ',' << a.request_id << ',' << a.vm_count << ','
                 << format_double(a.cpu) << ',' << format_double(a.mem) << ',' << a.duration << ','
                 << format_double(a.origin.x) << ',' << format_double(a.origin.y) << ','
                 << (a.anti_affinity ? 1 : 0) << "\n";
        }
        if (!aout) throw Error("write failed for " + apath.string());
    }
}

RunSummary summarize(const std::vector<StepMetrics>& metrics, const std::vector<SimEvent>& events,
                     std::optional<double> episode_return) {
    RunSummary s;
    s.episode_return = episode_return;
    for (const auto& m : metrics) {
        s.total_energy_joules += m.energy_joules;
        s.mean_utilization += m.cpu_utilization;
        s.total_downtime_steps += m.downtime_steps;
        s.mean_soft_penalty += m.soft_penalty_total;
    }
    if (!metrics.empty()) {
        s.mean_utilization /= static_cast<double>(metrics.size());
        s.mean_soft_penalty /= static_cast<double>(metrics.size());
    }
    std::set<std::string> deferred_ids;
    for (const auto& e : events) {
        switch (e.kind) {
        case SimEventKind::MigrationCompleted: ++s.migrations_completed; break;
        case SimEventKind::RequestAdmitted: ++s.requests_admitted; break;
        case SimEventKind::RequestDeferred: deferred_ids.insert(e.request); break;
        default: break;
        }
    }
    s.requests_deferred = static_cast<std::int64_t>(deferred_ids.size());
    return s;
}

void write_report(const std::vector<StepMetrics>& metrics, const std::vector<SimEvent>& events,
                  const std::filesystem::path& dir, std::optional<double> episode_return) {
    std::filesystem::create_directories(dir);

    {
        std::ofstream out(dir / "metrics.ndjson");
        if (!out) throw Error("cannot write " + (dir / "metrics.ndjson").string());
        for (const auto& m : metrics) out << metrics_line(m) << "\n";
        if (!out) throw Error("write failed for " + (dir / "metrics.ndjson").string());
    }
    {
        std::ofstream out(dir / "events.ndjson");
        if (!out) throw Error("cannot write " + (dir / "events.ndjson").string());
        for (const auto& e : events) out << event_line(e) << "\n";
        if (!out) throw Error("write failed for " + (dir / "events.ndjson").string());
    }
    {
        const RunSummary s = summarize(metrics, events, episode_return);
        std::ofstream out(dir / "summary.json");
        if (!out) throw Error("cannot write " + (dir / "summary.json").string());
        out << "{\n";
        out << "  \"total_energy_joules\": " << format_double(s.total_energy_joules) << ",\n";
        out << "  \"mean_utilization\": " << format_double(s.mean_utilization) << ",\n";
        out << "  \"total_downtime_steps\": " << s.total_downtime_steps << ",\n";
        out << "  \"migrations_completed\": " << s.migrations_completed << ",\n";
        out << "  \"requests_admitted\": " << s.requests_admitted << ",\n";
        out << "  \"requests_deferred\": " << s.requests_deferred << ",\n";
        out << "  \"mean_soft_penalty\": " << format_double(s.mean_soft_penalty);
        if (s.episode_return) {
            out << ",\n  \"episode_return\": " << format_double(*s.episode_return) << "\n";
        } else {
            out << "\n";
        }
        out << "}\n";
        if (!out) throw Error("write failed for " + (dir / "summary.json").string());
    }
}

std::vector<StepMetrics> read_metrics_ndjson(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open metrics file " + path.string());
    std::vector<StepMetrics> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            parse_fail(path, lineno, e.what());
        }
        StepMetrics m;
        try {
            m.time = j.at("time").get<Step>();
            m.total_power = j.at("total_power").get<double>();
            m.energy_joules = j.at("energy_joules").get<double>();
            m.cpu_utilization = j.at("cpu_utilization").get<double>();
            m.util_stddev = j.at("util_stddev").get<double>();
            m.migrations_active = j.at("migrations_active").get<int>();
            m.downtime_steps = j.at("downtime_steps").get<int>();
            m.deferred_requests = j.at("deferred_requests").get<int>();
            m.soft_penalty_total = j.at("soft_penalty_total").get<double>();
        } catch (const nlohmann::json::exception& e) {
            parse_fail(path, lineno, e.what());
        }
        out.push_back(m);
    }
    return out;
}

std::vector<double> cpu_series(const WorkloadTrace& trace, const VmId& vm, Step horizon) {
    if (horizon < 1) throw InputError("cpu_series horizon must be >= 1");
    std::vector<double> out(static_cast<std::size_t>(horizon), 0.0);
    double current = 0.0;
    std::size_t cursor = 0;
    for (Step t = 0; t < horizon; ++t) {
        while (cursor < trace.records.size() && trace.records[cursor].time <= t) {
            if (trace.records[cursor].vm_id == vm && trace.records[cursor].time == t)
                current = trace.records[cursor].cpu;
            ++cursor;
        }
        out[static_cast<std::size_t>(t)] = current;
    }
    return out;
}

} // namespace vmsim
