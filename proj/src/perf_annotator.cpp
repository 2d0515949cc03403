#include "perfloop/perf_annotator.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <unordered_map>

#include "perfloop/error.hpp"

namespace perfloop::annotate {

using nlohmann::json;
using ingest::SpanKind;

std::int64_t self_time(const ingest::Trace& trace, std::size_t span_index) {
  const auto& span = trace.spans[span_index];
  // A shared CLIENT/SERVER pair counts once, with its longer duration.
  std::map<std::string, std::int64_t> children;
  for (const auto& s : trace.spans) {
    if (s.parent_id && *s.parent_id == span.span_id && s.span_id != span.span_id) {
      auto& d = children[s.span_id];
      d = std::max(d, s.duration);
    }
  }
  std::int64_t inner = 0;
  for (const auto& [id, d] : children) inner += d;
  return std::max<std::int64_t>(0, span.duration - inner);
}

namespace {

struct MessageTarget {
  std::string scenario;
  arch::OperationRef operation;
};

MessageTarget resolve_message(const arch::ArchModel& arch, const std::string& ref) {
  auto hash = ref.rfind('#');
  auto scenario = ref.substr(0, hash);
  auto index = std::stoul(ref.substr(hash + 1));
  const auto* s = arch.find_scenario(scenario);
  if (!s || index >= s->steps.size()) throw NotFoundError("unresolved message " + ref);
  return {scenario, s->steps[index].target()};
}

// Per trace: scenario of its Trace2UseCase link (first in canonical order).
std::unordered_map<std::string, std::string> trace_scenarios(const trace::TraceModel& tm) {
  std::unordered_map<std::string, std::string> out;
  for (const auto& link : tm.links)
    if (link.rule == trace::Rule::Trace2UseCase) out.emplace(link.left_ends.front().ref, link.right_ends.front().ref);
  return out;
}

}  // namespace

DemandReport estimate_demands(const ingest::LogModel& log, const trace::TraceModel& tm,
                              const arch::ArchModel& arch, const DemandOptions& options) {
  std::unordered_map<std::string, const std::vector<trace::ElementRef>*> span_messages;
  for (const auto& link : tm.links)
    if (link.rule == trace::Rule::Span2Message) span_messages.emplace(link.left_ends.front().ref, &link.right_ends);
  auto scenarios_of = trace_scenarios(tm);

  std::unordered_map<std::string, MessageTarget> targets;
  auto target_of = [&](const std::string& ref) -> const MessageTarget& {
    auto it = targets.find(ref);
    if (it == targets.end()) it = targets.emplace(ref, resolve_message(arch, ref)).first;
    return it->second;
  };

  struct Acc {
    double self_sum = 0.0;  // seconds
    std::size_t samples = 0;
    double visit_ratio_sum = 0.0;
    std::size_t visit_traces = 0;
  };
  std::map<arch::OperationRef, Acc> acc;
  // (trace, span index, op) for the queueing check once S is known.
  std::vector<std::tuple<std::size_t, double, arch::OperationRef>> observed;

  for (std::size_t ti = 0; ti < log.traces.size(); ++ti) {
    const auto& t = log.traces[ti];
    const std::string* scenario = nullptr;
    if (auto it = scenarios_of.find(t.id); it != scenarios_of.end()) scenario = &it->second;
    std::map<arch::OperationRef, std::size_t> visits;

    for (std::size_t si = 0; si < t.spans.size(); ++si) {
      const auto& s = t.spans[si];
      if (s.kind != SpanKind::Server) continue;
      auto it = span_messages.find(trace::span_ref(t, s));
      if (it == span_messages.end()) continue;
      std::set<arch::OperationRef> ops;
      bool in_scenario = false;
      for (const auto& m : *it->second) {
        const auto& target = target_of(m.ref);
        ops.insert(target.operation);
        if (scenario && target.scenario == *scenario) in_scenario = true;
      }
      double self = static_cast<double>(self_time(t, si)) * 1e-6;
      for (const auto& op : ops) {
        auto& a = acc[op];
        a.self_sum += self;
        ++a.samples;
        observed.emplace_back(ti, self, op);
        if (in_scenario) ++visits[op];
      }
    }
    if (!scenario) continue;
    const auto* sc = arch.find_scenario(*scenario);
    if (!sc) continue;
    for (const auto& [op, count] : visits) {
      auto steps = std::count_if(sc->steps.begin(), sc->steps.end(),
                                 [&](const arch::Step& st) { return st.target() == op; });
      if (steps == 0) continue;
      acc[op].visit_ratio_sum += static_cast<double>(count) / static_cast<double>(steps);
      ++acc[op].visit_traces;
    }
  }

  DemandReport report;
  std::map<arch::OperationRef, double> service_times;
  for (const auto& [op, a] : acc) {
    if (a.visit_traces == 0) {
      report.excluded.push_back(op.str() + ": no spans inside a linked trace");
      continue;
    }
    DemandEstimate e;
    e.operation = op;
    e.mean_service_time = a.self_sum / static_cast<double>(a.samples);
    e.visits = a.visit_ratio_sum / static_cast<double>(a.visit_traces);
    e.demand = e.visits * e.mean_service_time;
    e.sample_count = a.samples;
    service_times[op] = e.mean_service_time;
    report.estimates.push_back(e);
  }

  std::set<arch::OperationRef> invoked;
  for (const auto& s : arch.scenarios)
    for (const auto& st : s.steps) invoked.insert(st.target());
  for (const auto& op : invoked)
    if (!acc.contains(op)) report.excluded.push_back(op.str() + ": no linked spans");

  std::set<std::size_t> flagged;
  for (const auto& [ti, self, op] : observed) {
    auto it = service_times.find(op);
    if (it != service_times.end() && it->second > 0.0 && self > options.queueing_tolerance * it->second)
      flagged.insert(ti);
  }
  for (auto ti : flagged) report.queueing_warnings.push_back(log.traces[ti].id);
  return report;
}

MeasuredIndices measure_indices(const ingest::LogModel& log, const trace::TraceModel& tm,
                                double window_seconds) {
  if (!(window_seconds > 0.0)) throw RangeError("measure_indices: window must be > 0");
  auto scenarios_of = trace_scenarios(tm);
  std::map<std::string, std::pair<double, std::size_t>> root_durations;
  for (const auto& t : log.traces) {
    auto it = scenarios_of.find(t.id);
    if (it == scenarios_of.end()) continue;
    auto& acc = root_durations[it->second];
    acc.first += static_cast<double>(t.spans[t.root].duration) * 1e-6;
    ++acc.second;
  }

  MeasuredIndices out;
  for (const auto& e : tm.elements) {
    if (e.side != trace::Side::Right || e.kind != "UseCase") continue;
    auto it = root_durations.find(e.ref);
    if (it == root_durations.end()) {
      out.warnings.push_back("scenario " + e.ref + " has no linked traces; omitted");
      continue;
    }
    auto n = static_cast<double>(it->second.second);
    out.scenarios[e.ref] = {it->second.first / n, n / window_seconds, it->second.second};
  }
  for (const auto& s : log.services) {
    out.utilization[s.name] = s.utilization;
    if (!s.sampled) out.warnings.push_back("service " + s.name + " has no utilization samples");
  }
  return out;
}

arch::ArchModel write_back(const arch::ArchModel& model, const std::vector<DemandEstimate>& demands,
                           const MeasuredIndices& indices) {
  arch::ArchModel out = model;
  for (const auto& d : demands) {
    auto* c = out.find_component(d.operation.component);
    auto* op = c ? c->find_operation(d.operation.operation) : nullptr;
    if (!op) throw NotFoundError("write_back: unresolved operation " + d.operation.str());
    op->service_demand = d.demand;
  }
  for (const auto& [name, idx] : indices.scenarios) {
    auto* s = out.find_scenario(name);
    if (!s) throw NotFoundError("write_back: unresolved scenario " + name);
    s->resp_time = idx.resp_time;
    s->throughput = idx.throughput;
  }
  std::map<std::string, double> node_util;
  for (const auto& [service, u] : indices.utilization) {
    const auto* node = out.node_of(service);
    if (!node) continue;  // service not modelled as a component
    auto [it, inserted] = node_util.emplace(node->name, u);
    if (!inserted) it->second = std::max(it->second, u);
  }
  for (const auto& [node, u] : node_util) out.find_node(node)->utilization = std::clamp(u, 0.0, 1.0);
  ++out.version;
  return out;
}

json to_json(const DemandReport& r) {
  json estimates = json::array();
  for (const auto& e : r.estimates)
    estimates.push_back({{"operation", e.operation.str()},
                         {"V", e.visits},
                         {"S", e.mean_service_time},
                         {"D", e.demand},
                         {"samples", e.sample_count}});
  return {{"demands", estimates}, {"excluded", r.excluded}, {"queueing_warnings", r.queueing_warnings.size()}};
}

json to_json(const MeasuredIndices& m) {
  json scenarios = json::array();
  for (const auto& [name, s] : m.scenarios)
    scenarios.push_back({{"scenario", name}, {"respT", s.resp_time}, {"X", s.throughput}, {"traces", s.trace_count}});
  json services = json::array();
  for (const auto& [name, u] : m.utilization) services.push_back({{"service", name}, {"U", u}});
  return {{"scenarios", scenarios}, {"services", services}, {"warnings", m.warnings}};
}

MeasuredIndices indices_from_json(const json& doc) {
  MeasuredIndices m;
  for (const auto& s : doc.at("scenarios"))
    m.scenarios[s.at("scenario").get<std::string>()] = {s.at("respT").get<double>(), s.at("X").get<double>(),
                                                         s.at("traces").get<std::size_t>()};
  for (const auto& s : doc.at("services")) m.utilization[s.at("service").get<std::string>()] = s.at("U").get<double>();
  if (auto it = doc.find("warnings"); it != doc.end()) m.warnings = it->get<std::vector<std::string>>();
  return m;
}

std::string demand_table(const DemandReport& r) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-44s %8s %12s %12s %8s\n", "operation", "V", "S[s]", "D[s]", "samples");
  out += line;
  for (const auto& e : r.estimates) {
    std::snprintf(line, sizeof line, "%-44s %8.3f %12.6f %12.6f %8zu\n", e.operation.str().c_str(), e.visits,
                  e.mean_service_time, e.demand, e.sample_count);
    out += line;
  }
  for (const auto& x : r.excluded) out += "excluded: " + x + "\n";
  return out;
}

std::string indices_table(const MeasuredIndices& m) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-24s %12s %12s %8s\n", "scenario", "respT[s]", "X[1/s]", "traces");
  out += line;
  for (const auto& [name, s] : m.scenarios) {
    std::snprintf(line, sizeof line, "%-24s %12.6f %12.4f %8zu\n", name.c_str(), s.resp_time, s.throughput,
                  s.trace_count);
    out += line;
  }
  std::snprintf(line, sizeof line, "%-24s %12s\n", "service", "U");
  out += line;
  for (const auto& [name, u] : m.utilization) {
    std::snprintf(line, sizeof line, "%-24s %12.4f\n", name.c_str(), u);
    out += line;
  }
  return out;
}

}  // namespace perfloop::annotate
