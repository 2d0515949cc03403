#include "perfloop/session_engine.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "perfloop/error.hpp"
#include "perfloop/trace_ingest.hpp"
#include "perfloop/traceability.hpp"

namespace perfloop::session {

using nlohmann::json;

std::string_view to_string(Scope scope) {
  return scope == Scope::ModelOnly ? "MODEL_ONLY" : "MODEL_AND_SYSTEM";
}

Scope scope_from_string(std::string_view text) {
  if (text == "MODEL_ONLY") return Scope::ModelOnly;
  if (text == "MODEL_AND_SYSTEM") return Scope::ModelAndSystem;
  throw ParseError("scope must be MODEL_ONLY or MODEL_AND_SYSTEM, got '" + std::string(text) + "'");
}

std::string_view to_string(BatchStatus status) {
  switch (status) {
    case BatchStatus::Clean: return "CLEAN";
    case BatchStatus::MaxIterations: return "MAX_ITERATIONS";
    case BatchStatus::NoImprovingAction: return "NO_IMPROVING_ACTION";
  }
  return "?";
}

void SessionConfig::validate() const {
  run.validate();
  if (repetitions < 1) throw RangeError("session: repetitions must be >= 1");
  if (calibration_traces < 1) throw RangeError("session: calibration_traces must be >= 1");
  if (!(report_floor >= 0.0 && report_floor <= 1.0)) throw RangeError("session: report_floor must be in [0, 1]");
}

SessionConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("session config must be a JSON object");
  SessionConfig c;
  const json& run = doc.contains("run") ? doc.at("run") : doc;
  c.run = sim::run_from_json(run, &c.service_means);
  if (auto it = doc.find("service_means"); it != doc.end() && &run != &doc)
    for (const auto& [k, v] : it->items()) c.service_means[k] = v.get<double>();
  try {
    c.seed = doc.value("seed", c.run.seed);
    c.calibration_traces = doc.value("calibration_traces", c.calibration_traces);
    c.repetitions = doc.value("repetitions", c.repetitions);
    c.target_scenario = doc.value("target_scenario", c.target_scenario);
    c.report_floor = doc.value("report_floor", c.report_floor);
    if (auto it = doc.find("bands"); it != doc.end()) c.band_overrides = *it;
  } catch (const json::exception& e) {
    throw ParseError(std::string("session config: ") + e.what());
  }
  c.validate();
  return c;
}

json to_json(const SessionConfig& c) {
  json run = sim::to_json(c.run);
  run["service_means"] = c.service_means;
  return {{"seed", c.seed},
          {"run", run},
          {"calibration_traces", c.calibration_traces},
          {"repetitions", c.repetitions},
          {"target_scenario", c.target_scenario},
          {"bands", c.band_overrides},
          {"report_floor", c.report_floor}};
}

const std::string& SessionState::target_scenario() const {
  if (!config.target_scenario.empty()) return config.target_scenario;
  return initial_model.scenarios.front().name;
}

std::uint64_t derive_seed(std::uint64_t session_seed, int iteration, int rep) {
  std::uint64_t x = session_seed ^ (static_cast<std::uint64_t>(iteration + 2) << 32) ^ static_cast<std::uint64_t>(rep);
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct Observation {
  ingest::LogModel log;
  trace::TraceModel links;
};

Observation observe(const arch::ArchModel& model, const sim::SimSystem& system, const sim::SimRun& run) {
  auto out = sim::run(system, run);
  Observation o{ingest::build_log_model(out.spans, out.utilization), {}};
  o.links = trace::generate_links(o.log, model);
  return o;
}

PredictedIndices predicted_of(const qn::Prediction& p) { return {p.scenarios, p.node_utilization}; }

void annotate_predicted(arch::ArchModel& model, const PredictedIndices& p) {
  for (auto& n : model.nodes)
    if (auto it = p.node_utilization.find(n.name); it != p.node_utilization.end())
      n.utilization = std::clamp(it->second, 0.0, 1.0);
  for (auto& s : model.scenarios)
    if (auto it = p.scenarios.find(s.name); it != p.scenarios.end()) {
      s.resp_time = it->second.resp_time;
      s.throughput = it->second.throughput;
    }
  ++model.version;
}

IterationRecord new_record(const SessionState& s, int iteration, annotate::MeasuredIndices measured) {
  IterationRecord r;
  r.iteration = iteration;
  r.measured = std::move(measured);
  r.occurrences = detect(s);
  r.model_version = s.model.version;
  r.generation = s.system.generation;
  return r;
}

}  // namespace

annotate::MeasuredIndices median_indices(const std::vector<annotate::MeasuredIndices>& reps) {
  if (reps.size() == 1) return reps.front();
  std::map<std::string, std::vector<annotate::ScenarioIndices>> scenarios;
  std::map<std::string, std::vector<double>> util;
  annotate::MeasuredIndices out;
  for (const auto& r : reps) {
    for (const auto& [name, s] : r.scenarios) scenarios[name].push_back(s);
    for (const auto& [name, u] : r.utilization) util[name].push_back(u);
    for (const auto& w : r.warnings)
      if (std::find(out.warnings.begin(), out.warnings.end(), w) == out.warnings.end()) out.warnings.push_back(w);
  }
  for (const auto& [name, v] : scenarios) {
    std::vector<double> r, x, n;
    for (const auto& s : v) {
      r.push_back(s.resp_time);
      x.push_back(s.throughput);
      n.push_back(static_cast<double>(s.trace_count));
    }
    out.scenarios[name] = {median(r), median(x), static_cast<std::size_t>(median(n))};
  }
  for (const auto& [name, v] : util) out.utilization[name] = median(v);
  return out;
}

annotate::MeasuredIndices measure_system(const arch::ArchModel& model, const sim::SimSystem& system,
                                         const SessionConfig& config, int iteration) {
  std::vector<annotate::MeasuredIndices> reps;
  double window = config.run.duration_s - config.run.warmup_s;
  for (int rep = 0; rep < config.repetitions; ++rep) {
    sim::SimRun run = config.run;
    run.seed = derive_seed(config.seed, iteration, rep);
    auto obs = observe(model, system, run);
    reps.push_back(annotate::measure_indices(obs.log, obs.links, window));
  }
  return median_indices(reps);
}

SessionState start_session(const arch::ArchModel& model, const SessionConfig& config) {
  model.validate();
  config.validate();
  if (model.scenarios.empty()) throw ValidationError("session: model has no scenarios");
  if (!config.target_scenario.empty() && !model.find_scenario(config.target_scenario))
    throw NotFoundError("session: unknown target scenario " + config.target_scenario);

  SessionState s;
  s.config = config;
  s.initial_model = model;
  s.model = model;
  // The driven arrival streams are the workload the predictions must describe.
  for (const auto& a : config.run.arrivals) {
    auto* sc = s.model.find_scenario(a.scenario);
    if (!sc) continue;
    arch::Workload w;
    if (a.population > 0) {
      w.pattern = arch::WorkloadPattern::Closed;
      w.population = a.population;
      w.think_time = a.think_s;
    } else {
      w.rate = a.rate_per_s;
    }
    if (w != sc->workload) {
      s.warnings.push_back("workload of " + sc->name + " replaced by its driven arrival stream");
      sc->workload = w;
    }
  }
  s.system = sim::instantiate(model, config.service_means);

  std::vector<ingest::SpanRecord> spans;
  for (std::size_t i = 0; i < model.scenarios.size(); ++i) {
    const auto& sc = model.scenarios[i];
    double cycle = 0.0;
    for (std::size_t j = 0; j < sc.steps.size(); ++j)
      cycle += arch::path_probability(sc, j) * s.system.mean_service_ms.at(sc.steps[j].target()) / 1000.0;
    sim::SimRun run;
    run.seed = derive_seed(config.seed, -1, static_cast<int>(i));
    run.duration_s = std::max(cycle, 1e-6) * config.calibration_traces;
    run.sample_window_s = run.duration_s;
    run.arrivals = {{sc.name, 0.0, 1, 0.0}};
    run.id_base = static_cast<std::uint64_t>(i + 1) << 40;
    auto out = sim::run(s.system, run);
    spans.insert(spans.end(), out.spans.begin(), out.spans.end());
  }
  if (spans.empty()) throw Error("session: calibration run produced no spans");
  auto log = ingest::build_log_model(spans, {});
  auto demands = annotate::estimate_demands(log, trace::generate_links(log, model), model);
  for (const auto& e : demands.excluded) s.warnings.push_back("calibration: " + e);
  if (!demands.queueing_warnings.empty())
    s.warnings.push_back("calibration: " + std::to_string(demands.queueing_warnings.size()) +
                         " traces show queueing");
  s.model = annotate::write_back(s.model, demands.estimates, {});
  // Operations the calibration run never reached keep their configured means.
  for (auto& c : s.model.components)
    for (auto& op : c.operations) {
      if (op.service_demand) continue;
      arch::OperationRef ref{c.name, op.name};
      if (auto it = s.system.mean_service_ms.find(ref); it != s.system.mean_service_ms.end())
        op.service_demand = it->second / 1000.0;
    }

  auto measured = measure_system(s.model, s.system, config, 0);
  s.model = annotate::write_back(s.model, {}, measured);
  s.bands = antipattern::apply_overrides(antipattern::default_bands(s.model), config.band_overrides);
  for (const auto& w : s.bands.warnings) s.warnings.push_back("bands: " + w);
  s.history.push_back(new_record(s, 0, std::move(measured)));
  return s;
}

std::vector<antipattern::Occurrence> detect(const SessionState& state) {
  return antipattern::detect_all(state.model, state.bands, {state.config.report_floor});
}

Preview preview_model(const arch::ArchModel& model, const std::vector<refactor::RefactoringAction>& actions) {
  if (actions.empty()) throw ValidationError("preview: no action given");
  arch::ArchModel after = model;
  for (const auto& a : actions) {
    refactor::check_action(after, a);
    after = refactor::apply_action(after, a);
  }
  Preview p;
  p.before = predicted_of(qn::predict_all(model));
  p.after = predicted_of(qn::predict_all(after));
  p.model_version_after = after.version;
  for (const auto& [name, s] : p.after.scenarios)
    if (auto it = p.before.scenarios.find(name); it != p.before.scenarios.end())
      p.resp_time_delta[name] = s.resp_time - it->second.resp_time;
  for (const auto& [name, u] : p.after.node_utilization)
    if (auto it = p.before.node_utilization.find(name); it != p.before.node_utilization.end())
      p.utilization_delta[name] = u - it->second;
  return p;
}

Preview preview(const SessionState& state, const std::vector<refactor::RefactoringAction>& actions) {
  return preview_model(state.model, actions);
}

void measure(SessionState& state) {
  SessionState next = state;
  for (const auto& a : next.pending_system) next.system = sim::apply_system_refactoring(next.system, a);
  next.pending_system.clear();
  int iteration = next.iteration() + 1;
  auto measured = measure_system(next.model, next.system, next.config, iteration);
  next.history.back().post_measured = measured;
  next.model = annotate::write_back(next.model, {}, measured);
  next.history.push_back(new_record(next, iteration, std::move(measured)));
  state = std::move(next);
}

void apply(SessionState& state, const std::vector<refactor::RefactoringAction>& actions, Scope scope) {
  if (actions.empty()) throw ValidationError("apply: no action given");
  SessionState next = state;
  for (const auto& a : actions) {
    refactor::check_action(next.model, a);
    next.model = refactor::apply_action(next.model, a, &next.warnings);
    next.pending_system.push_back(a);
  }
  auto predicted = predicted_of(qn::predict_all(next.model));
  auto& record = next.history.back();
  record.applied.push_back({actions, scope});
  record.predicted = predicted;
  if (scope == Scope::ModelOnly) {
    annotate_predicted(next.model, predicted);
  } else {
    measure(next);
  }
  state = std::move(next);
}

std::optional<refactor::RefactoringAction> best_action(const SessionState& state,
                                                       const antipattern::Occurrence& occurrence) {
  const auto& target = state.target_scenario();
  auto baseline = qn::predict_all(state.model).scenarios.at(target).resp_time;
  std::optional<refactor::RefactoringAction> best;
  double best_r = baseline, best_u = 0.0;
  for (const auto& c : refactor::enumerate_candidates(state.model, {occurrence})) {
    Preview p;
    try {
      p = preview(state, {c});
    } catch (const Error&) {
      continue;
    }
    double r = p.after.scenarios.at(target).resp_time;
    double u = 0.0;
    for (const auto& [_, x] : p.after.node_utilization) u = std::max(u, x);
    if (r < best_r || (best && r == best_r && u < best_u)) {
      best = c;
      best_r = r;
      best_u = u;
    }
  }
  return best;
}

BatchResult run_batch(SessionState& state, double floor, int max_iterations) {
  BatchResult result;
  for (;;) {
    auto occurrences = detect(state);
    std::erase_if(occurrences, [&](const antipattern::Occurrence& o) { return o.probability < floor; });
    if (occurrences.empty()) {
      result.status = BatchStatus::Clean;
      return result;
    }
    if (result.iterations >= max_iterations) {
      result.status = BatchStatus::MaxIterations;
      return result;
    }
    auto action = best_action(state, occurrences.front());
    if (!action) {
      result.status = BatchStatus::NoImprovingAction;
      return result;
    }
    apply(state, {*action}, Scope::ModelAndSystem);
    ++result.iterations;
  }
}

json to_json(const PredictedIndices& p) {
  json scenarios = json::array();
  for (const auto& [name, s] : p.scenarios)
    scenarios.push_back({{"scenario", name}, {"respT", s.resp_time}, {"X", s.throughput}});
  json nodes = json::array();
  for (const auto& [name, u] : p.node_utilization) nodes.push_back({{"node", name}, {"U", u}});
  return {{"scenarios", scenarios}, {"nodes", nodes}};
}

namespace {

PredictedIndices predicted_from_json(const json& doc) {
  PredictedIndices p;
  for (const auto& s : doc.at("scenarios"))
    p.scenarios[s.at("scenario").get<std::string>()] = {s.at("respT").get<double>(), s.at("X").get<double>()};
  for (const auto& n : doc.at("nodes")) p.node_utilization[n.at("node").get<std::string>()] = n.at("U").get<double>();
  return p;
}

}  // namespace

json to_json(const Preview& p) {
  return {{"before", to_json(p.before)},
          {"after", to_json(p.after)},
          {"delta", {{"respT", p.resp_time_delta}, {"U", p.utilization_delta}}},
          {"model_version_after", p.model_version_after}};
}

json to_json(const IterationRecord& r) {
  json applied = json::array();
  for (const auto& call : r.applied) {
    json actions = json::array();
    for (const auto& a : call.actions) actions.push_back(refactor::to_json(a));
    applied.push_back({{"actions", actions}, {"scope", to_string(call.scope)}});
  }
  return {{"iteration", r.iteration},
          {"measured", annotate::to_json(r.measured)},
          {"occurrences", antipattern::to_json(r.occurrences)},
          {"applied", applied},
          {"predicted", r.predicted ? to_json(*r.predicted) : json(nullptr)},
          {"post_measured", r.post_measured ? annotate::to_json(*r.post_measured) : json(nullptr)},
          {"model_version", r.model_version},
          {"generation", r.generation}};
}

IterationRecord record_from_json(const json& doc) {
  try {
    IterationRecord r;
    r.iteration = doc.at("iteration").get<int>();
    r.measured = annotate::indices_from_json(doc.at("measured"));
    for (const auto& o : doc.at("occurrences")) r.occurrences.push_back(antipattern::occurrence_from_json(o));
    for (const auto& call : doc.at("applied")) {
      ApplyCall c;
      c.scope = scope_from_string(call.at("scope").get<std::string>());
      for (const auto& a : call.at("actions")) c.actions.push_back(refactor::action_from_json(a));
      r.applied.push_back(std::move(c));
    }
    if (!doc.at("predicted").is_null()) r.predicted = predicted_from_json(doc.at("predicted"));
    if (!doc.at("post_measured").is_null()) r.post_measured = annotate::indices_from_json(doc.at("post_measured"));
    r.model_version = doc.at("model_version").get<long>();
    r.generation = doc.at("generation").get<long>();
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("iteration record: ") + e.what());
  }
}

json history_json(const SessionState& state) {
  json records = json::array();
  for (const auto& r : state.history) records.push_back(to_json(r));
  return records;
}

std::string record_file(const SessionState& state) {
  std::string out =
      json{{"type", "header"}, {"config", to_json(state.config)}, {"model", arch::to_json(state.initial_model)}}.dump();
  out += '\n';
  for (const auto& r : state.history) {
    json line = to_json(r);
    line["type"] = "record";
    out += line.dump();
    out += '\n';
  }
  return out;
}

void write_record_file(const SessionState& state, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write record file " + path);
  f << record_file(state);
}

RecordFile parse_record_file(std::string_view text) {
  RecordFile file;
  bool header = false;
  std::istringstream in{std::string(text)};
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError("record file line " + std::to_string(n) + ": " + e.what());
    }
    auto type = doc.value("type", "");
    if (type == "header") {
      file.config = config_from_json(doc.at("config"));
      file.model = arch::model_from_json(doc.at("model"));
      header = true;
    } else if (type == "record") {
      if (!header) throw ParseError("record file: record before header");
      file.records.push_back(record_from_json(doc));
    } else {
      throw ParseError("record file line " + std::to_string(n) + ": unknown type '" + type + "'");
    }
  }
  if (!header) throw ParseError("record file: missing header");
  return file;
}

RecordFile read_record_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw NotFoundError("cannot read record file " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_record_file(buf.str());
}

ReplayResult replay(const RecordFile& file) {
  ReplayResult out{true, {}, start_session(file.model, file.config)};
  auto compare = [&](const std::string& what, const annotate::MeasuredIndices& a, const annotate::MeasuredIndices& b) {
    if (a == b) return;
    out.identical = false;
    out.mismatches.push_back(what + ": " + annotate::to_json(a).dump() + " != " + annotate::to_json(b).dump());
  };
  if (file.records.empty()) return out;
  compare("iteration 0 measured", file.records[0].measured, out.state.history[0].measured);
  for (std::size_t k = 0; k < file.records.size(); ++k) {
    for (const auto& call : file.records[k].applied) apply(out.state, call.actions, call.scope);
    if (k + 1 >= file.records.size()) break;
    if (out.state.history.size() == k + 1) measure(out.state);
    if (out.state.history.size() != k + 2) {
      out.identical = false;
      out.mismatches.push_back("iteration " + std::to_string(k + 1) + " not reproduced");
      break;
    }
    auto label = "iteration " + std::to_string(k + 1) + " measured";
    compare(label, file.records[k + 1].measured, out.state.history[k + 1].measured);
  }
  return out;
}

namespace {

double max_util(const annotate::MeasuredIndices& m) {
  double u = 0.0;
  for (const auto& [_, x] : m.utilization) u = std::max(u, x);
  return u;
}

std::string action_labels(const IterationRecord& r) {
  std::string out;
  for (const auto& call : r.applied)
    for (const auto& a : call.actions) out += (out.empty() ? "" : "+") + a.label();
  return out;
}

}  // namespace

json comparison_json(const SessionState& state) {
  const auto& target = state.target_scenario();
  json rows = json::array();
  for (const auto& r : state.history) {
    if (r.applied.empty()) continue;
    json row = {{"iteration", r.iteration}, {"actions", action_labels(r)}, {"scenario", target}};
    auto before = r.measured.scenarios.find(target);
    row["respT_before"] = before != r.measured.scenarios.end() ? json(before->second.resp_time) : json(nullptr);
    row["respT_predicted"] = r.predicted ? json(r.predicted->scenarios.at(target).resp_time) : json(nullptr);
    row["respT_after"] = nullptr;
    row["maxU_before"] = max_util(r.measured);
    row["maxU_after"] = nullptr;
    if (r.post_measured) {
      auto after = r.post_measured->scenarios.find(target);
      if (after != r.post_measured->scenarios.end()) row["respT_after"] = after->second.resp_time;
      row["maxU_after"] = max_util(*r.post_measured);
    }
    rows.push_back(row);
  }
  return rows;
}

std::string comparison_table(const SessionState& state) {
  std::string out;
  char line[512];
  std::snprintf(line, sizeof line, "%-4s %-40s %12s %12s %12s %8s %8s\n", "it", "actions", "respT[s]", "predicted",
                "after", "maxU", "maxU'");
  out += line;
  auto num = [](const json& v, const char* fmt) {
    if (v.is_null()) return std::string("-");
    char b[64];
    std::snprintf(b, sizeof b, fmt, v.get<double>());
    return std::string(b);
  };
  for (const auto& row : comparison_json(state)) {
    std::snprintf(line, sizeof line, "%-4d %-40s %12s %12s %12s %8s %8s\n", row["iteration"].get<int>(),
                  row["actions"].get<std::string>().c_str(), num(row["respT_before"], "%.6f").c_str(),
                  num(row["respT_predicted"], "%.6f").c_str(), num(row["respT_after"], "%.6f").c_str(),
                  num(row["maxU_before"], "%.4f").c_str(), num(row["maxU_after"], "%.4f").c_str());
    out += line;
  }
  return out;
}

}  // namespace perfloop::session
