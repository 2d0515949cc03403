#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "perfloop/antipattern.hpp"
#include "perfloop/arch_model.hpp"
#include "perfloop/perf_annotator.hpp"
#include "perfloop/qn_mva.hpp"
#include "perfloop/refactor_model.hpp"
#include "perfloop/sysmock_sim.hpp"

namespace perfloop::session {

enum class Scope { ModelOnly, ModelAndSystem };

std::string_view to_string(Scope scope);
Scope scope_from_string(std::string_view text);

struct SessionConfig {
  std::uint64_t seed = 1;
  sim::SimRun run;  // workload run; its seed is replaced per measurement
  sim::ServiceMeans service_means;
  // Requests per scenario in the calibration run, which drives each scenario
  // alone with one request in flight so that spans carry no queueing.
  int calibration_traces = 400;
  int repetitions = 3;
  std::string target_scenario;  // defaults to the model's first scenario
  nlohmann::json band_overrides = nlohmann::json::object();
  double report_floor = 0.01;

  void validate() const;
};

SessionConfig config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const SessionConfig& config);

struct PredictedIndices {
  std::map<std::string, qn::ScenarioPrediction> scenarios;
  std::map<std::string, double> node_utilization;
};

struct ApplyCall {
  std::vector<refactor::RefactoringAction> actions;
  Scope scope = Scope::ModelAndSystem;
};

struct IterationRecord {
  int iteration = 0;
  annotate::MeasuredIndices measured;
  std::vector<antipattern::Occurrence> occurrences;
  std::vector<ApplyCall> applied;
  std::optional<PredictedIndices> predicted;  // after the last applied call
  std::optional<annotate::MeasuredIndices> post_measured;
  long model_version = 0;
  long generation = 0;
};

struct SessionState {
  SessionConfig config;
  arch::ArchModel initial_model;
  arch::ArchModel model;
  sim::SimSystem system;
  antipattern::Bands bands;
  // Actions applied to the model but not yet to the system.
  std::vector<refactor::RefactoringAction> pending_system;
  std::vector<IterationRecord> history;
  std::vector<std::string> warnings;

  int iteration() const { return history.empty() ? 0 : history.back().iteration; }
  const std::string& target_scenario() const;
};

// Derived seed of repetition `rep` of measurement `iteration`.
std::uint64_t derive_seed(std::uint64_t session_seed, int iteration, int rep);

// Median over repetitions of every scenario index and service utilization.
annotate::MeasuredIndices median_indices(const std::vector<annotate::MeasuredIndices>& reps);

// One repetition-median measurement of the system under the configured
// workload, linked against `model`.
annotate::MeasuredIndices measure_system(const arch::ArchModel& model, const sim::SimSystem& system,
                                         const SessionConfig& config, int iteration);

SessionState start_session(const arch::ArchModel& model, const SessionConfig& config);

std::vector<antipattern::Occurrence> detect(const SessionState& state);

struct Preview {
  PredictedIndices before;
  PredictedIndices after;
  std::map<std::string, double> resp_time_delta;    // after - before, per scenario
  std::map<std::string, double> utilization_delta;  // nodes present in both
  long model_version_after = 0;
};

// What-if prediction of the actions on a copy of the model.
Preview preview_model(const arch::ArchModel& model, const std::vector<refactor::RefactoringAction>& actions);
Preview preview(const SessionState& state, const std::vector<refactor::RefactoringAction>& actions);

// Applies the actions; on any failure the state is left untouched.
void apply(SessionState& state, const std::vector<refactor::RefactoringAction>& actions, Scope scope);

// Brings the system up to date with the model and takes a new measurement,
// closing the current iteration.
void measure(SessionState& state);

enum class BatchStatus { Clean, MaxIterations, NoImprovingAction };
std::string_view to_string(BatchStatus status);

struct BatchResult {
  BatchStatus status = BatchStatus::Clean;
  int iterations = 0;
};

BatchResult run_batch(SessionState& state, double floor, int max_iterations);

// Candidate with the smallest predicted target-scenario respT (ties: lower
// max predicted node utilization). Empty when nothing improves on the
// current prediction.
std::optional<refactor::RefactoringAction> best_action(const SessionState& state,
                                                       const antipattern::Occurrence& occurrence);

nlohmann::json to_json(const PredictedIndices& p);
nlohmann::json to_json(const Preview& p);
nlohmann::json to_json(const IterationRecord& r);
IterationRecord record_from_json(const nlohmann::json& doc);
nlohmann::json history_json(const SessionState& state);

// Record file: a header line {config, model} followed by one line per
// iteration record.
std::string record_file(const SessionState& state);
void write_record_file(const SessionState& state, const std::string& path);

struct RecordFile {
  SessionConfig config;
  arch::ArchModel model;
  std::vector<IterationRecord> records;
};

RecordFile parse_record_file(std::string_view text);
RecordFile read_record_file(const std::string& path);

struct ReplayResult {
  bool identical = true;
  std::vector<std::string> mismatches;
  SessionState state;
};

// Re-executes the recorded calls from iteration 0 and compares every
// measured index bit for bit.
ReplayResult replay(const RecordFile& file);

// Before/after respT and max utilization per applied action.
std::string comparison_table(const SessionState& state);
nlohmann::json comparison_json(const SessionState& state);

}  // namespace perfloop::session
