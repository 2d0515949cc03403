#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "perfloop/arch_model.hpp"

namespace perfloop::qn {

struct Station {
  std::string name;  // node name
  double demand = 0.0;  // D_k, seconds

  bool operator==(const Station&) const = default;
};

// Single-class closed product-form network with FCFS load-independent
// stations and an optional think (delay) time.
struct QNModel {
  std::vector<Station> stations;
  int population = 0;
  double think_time = 0.0;

  void validate() const;
};

struct StationResult {
  std::string name;
  double demand = 0.0;
  double residence_time = 0.0;  // R_k
  double queue_length = 0.0;    // Q_k
  double utilization = 0.0;     // U_k
};

// Indices after adding the n-th customer.
struct PopulationStep {
  int population = 0;
  double throughput = 0.0;
  double response_time = 0.0;
  std::vector<double> residence_times;
  std::vector<double> queue_lengths;
};

struct MVAResult {
  double throughput = 0.0;     // X
  double response_time = 0.0;  // R = sum of R_k
  std::vector<StationResult> stations;
  std::vector<PopulationStep> steps;  // n = 1..N
};

MVAResult mva_exact(const QNModel& qn);

struct MixEntry {
  std::string scenario;
  double weight = 1.0;
};

// Per-node demand of one scenario: exec probability (along the call path)
// times the callee operation's demand, split equally among the callee's
// replicas (itself plus its transitive clones owning the operation).
std::map<std::string, double> scenario_demands(const arch::ArchModel& model, std::string_view scenario);

// Stations for the weighted scenario mix, one per node. Population and
// think time are left at zero for the caller to fill.
QNModel build_qn(const arch::ArchModel& model, const std::vector<MixEntry>& mix);

struct ScenarioPrediction {
  double resp_time = 0.0;
  double throughput = 0.0;
};

struct Prediction {
  std::map<std::string, ScenarioPrediction> scenarios;
  std::map<std::string, double> node_utilization;
  QNModel network;  // aggregated network that was solved
  MVAResult solution;
};

// Solves all scenarios of the model jointly. Open workloads are converted to
// a closed population N = round(sum of rate * respT) (measured respT when the
// scenario is annotated, open-network estimate otherwise) and a think time
// fitted so that the closed network's throughput equals the offered rate.
Prediction predict_all(const arch::ArchModel& model);

struct WorkloadPrediction {
  double resp_time = 0.0;
  double throughput = 0.0;
  std::map<std::string, double> node_utilization;
};

WorkloadPrediction predict_for_workload(const arch::ArchModel& model, std::string_view scenario);

nlohmann::json to_json(const MVAResult& result);
nlohmann::json to_json(const Prediction& prediction);
std::string mva_table(const MVAResult& result);

}  // namespace perfloop::qn
