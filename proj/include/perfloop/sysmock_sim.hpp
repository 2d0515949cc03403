#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "perfloop/arch_model.hpp"
#include "perfloop/refactor_model.hpp"
#include "perfloop/trace_ingest.hpp"

namespace perfloop::sim {

struct Instance {
  std::string name;  // emitted as the span service name
  std::string node;
  std::vector<std::string> operations;

  bool operator==(const Instance&) const = default;
};

// Instances serving one scenario operation, balanced round-robin.
struct Route {
  std::string primary;  // instance the model's steps currently target
  std::vector<std::size_t> instances;
  std::size_t cursor = 0;

  bool operator==(const Route&) const = default;
};

struct SimScenario {
  std::string name;
  std::vector<arch::OperationRef> steps;  // route keys, fixed at instantiation
  std::vector<double> exec_probability;
  std::vector<int> parent;

  bool operator==(const SimScenario&) const = default;
};

struct SimSystem {
  std::vector<Instance> instances;
  std::vector<std::string> nodes;
  std::map<arch::OperationRef, Route> routes;
  std::map<arch::OperationRef, double> mean_service_ms;
  std::vector<SimScenario> scenarios;
  long generation = 0;

  const Instance* find_instance(std::string_view name) const;
  const SimScenario* find_scenario(std::string_view name) const;
  bool operator==(const SimSystem&) const = default;
};

// Mean service times in seconds, keyed by "component/operation" or by the
// bare operation name. Operations not listed fall back to their
// service_demand annotation.
using ServiceMeans = std::map<std::string, double>;

SimSystem instantiate(const arch::ArchModel& model, const ServiceMeans& means = {});

// Poisson arrivals at rate_per_s, or, when population > 0, a closed source
// of that many customers thinking exponentially for think_s between visits.
struct ArrivalStream {
  std::string scenario;
  double rate_per_s = 0.0;
  int population = 0;
  double think_s = 0.0;
};

struct ScheduledAction {
  double at_s = 0.0;
  refactor::RefactoringAction action;
};

struct SimRun {
  std::uint64_t seed = 1;
  double duration_s = 600.0;
  double warmup_s = 0.0;
  double sample_window_s = 60.0;
  std::vector<ArrivalStream> arrivals;
  std::vector<ScheduledAction> actions;
  std::uint64_t id_base = 0;  // added to trace and span counters

  void validate() const;
};

struct SimStats {
  std::size_t arrivals = 0;
  std::size_t completed = 0;   // finished after warmup, spans emitted
  std::size_t warmup = 0;      // finished but arrived during warmup
  std::size_t incomplete = 0;  // still in flight at the horizon
  std::size_t errors = 0;

  bool operator==(const SimStats&) const = default;
};

struct SimOutput {
  std::vector<ingest::SpanRecord> spans;
  std::vector<ingest::UtilizationSample> utilization;
  SimStats stats;
  SimSystem final_system;  // differs from the input when actions were scheduled
};

SimOutput run(const SimSystem& system, const SimRun& config);

SimSystem apply_system_refactoring(const SimSystem& system, const refactor::RefactoringAction& action);

// Run config document; "service_means" is returned separately.
SimRun run_from_json(const nlohmann::json& doc, ServiceMeans* means = nullptr);
nlohmann::json to_json(const SimRun& run);
nlohmann::json to_json(const SimStats& stats);
nlohmann::json to_json(const SimSystem& system);

}  // namespace perfloop::sim
