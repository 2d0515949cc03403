#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "perfloop/arch_model.hpp"
#include "perfloop/trace_ingest.hpp"
#include "perfloop/traceability.hpp"

namespace perfloop::annotate {

// D = V * S for one operation, estimated from a light-load run.
struct DemandEstimate {
  arch::OperationRef operation;
  double visits = 0.0;             // V, per scenario step invoking the operation
  double mean_service_time = 0.0;  // S, seconds
  double demand = 0.0;             // D, seconds
  std::size_t sample_count = 0;

  bool operator==(const DemandEstimate&) const = default;
};

struct DemandReport {
  std::vector<DemandEstimate> estimates;       // sorted by operation
  std::vector<std::string> excluded;           // "component/operation: reason"
  std::vector<std::string> queueing_warnings;  // trace ids whose spans show queueing
};

struct DemandOptions {
  // A span whose exclusive time exceeds this multiple of its operation's
  // mean service time flags its trace as queued.
  double queueing_tolerance = 3.0;
};

struct ScenarioIndices {
  double resp_time = 0.0;   // seconds
  double throughput = 0.0;  // per second
  std::size_t trace_count = 0;

  bool operator==(const ScenarioIndices&) const = default;
};

struct MeasuredIndices {
  std::map<std::string, ScenarioIndices> scenarios;
  std::map<std::string, double> utilization;  // per service
  std::vector<std::string> warnings;

  bool operator==(const MeasuredIndices& o) const {
    return scenarios == o.scenarios && utilization == o.utilization;
  }
};

// Exclusive time of a span: its duration minus the time spent in its direct
// children. Microseconds.
std::int64_t self_time(const ingest::Trace& trace, std::size_t span_index);

DemandReport estimate_demands(const ingest::LogModel& log, const trace::TraceModel& tm,
                              const arch::ArchModel& arch, const DemandOptions& options = {});

MeasuredIndices measure_indices(const ingest::LogModel& log, const trace::TraceModel& tm,
                                double window_seconds);

// Writes demands into operations, scenario indices into scenarios and
// service utilizations into the hosting nodes (max over hosted services).
// Bumps the version exactly once.
arch::ArchModel write_back(const arch::ArchModel& model, const std::vector<DemandEstimate>& demands,
                           const MeasuredIndices& indices);

nlohmann::json to_json(const DemandReport& report);
nlohmann::json to_json(const MeasuredIndices& indices);
MeasuredIndices indices_from_json(const nlohmann::json& doc);
std::string demand_table(const DemandReport& report);
std::string indices_table(const MeasuredIndices& indices);

}  // namespace perfloop::annotate
