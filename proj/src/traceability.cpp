#include "perfloop/traceability.hpp"

#include <algorithm>
#include <map>
#include <regex>

#include "perfloop/error.hpp"

namespace perfloop::trace {

using nlohmann::json;

std::string_view to_string(Rule rule) {
  switch (rule) {
    case Rule::Trace2UseCase: return "Trace2UseCase";
    case Rule::Span2Message: return "Span2Message";
    case Rule::EndPoint2Signature: return "EndPoint2Signature";
    case Rule::Service2Component: return "Service2Component";
  }
  return "unknown";
}

bool CoverageReport::empty() const {
  return unmatched_services.empty() && unmatched_endpoints.empty() && unmatched_traces.empty() &&
         unmatched_scenarios.empty();
}

std::string normalize_endpoint(std::string_view name, const MatchOptions& options) {
  if (options.strip_prefix.empty()) return std::string(name);
  static thread_local std::string cached_pattern;
  static thread_local std::regex cached;
  if (cached_pattern != options.strip_prefix) {
    cached = std::regex(options.strip_prefix);
    cached_pattern = options.strip_prefix;
  }
  std::string text(name);
  return std::regex_replace(text, cached, "", std::regex_constants::format_first_only);
}

std::string span_ref(const ingest::Trace& trace, const ingest::SpanRecord& span) {
  auto ref = trace.id + "/" + span.span_id;
  if (span.kind == ingest::SpanKind::Client) ref += "@client";
  return ref;
}

std::string endpoint_ref(std::string_view service, std::string_view name) {
  return std::string(service) + "|" + std::string(name);
}

std::string message_ref(std::string_view scenario, std::size_t step) {
  return std::string(scenario) + "#" + std::to_string(step);
}

namespace {

ElementRef left(std::string kind, std::string ref) { return {Side::Left, std::move(kind), std::move(ref)}; }
ElementRef right(std::string kind, std::string ref) { return {Side::Right, std::move(kind), std::move(ref)}; }

}  // namespace

TraceModel generate_links(const ingest::LogModel& log, const arch::ArchModel& arch,
                          const MatchOptions& options) {
  TraceModel tm;
  tm.left_model_ref = "log";
  tm.right_model_ref = "arch@v" + std::to_string(arch.version);

  // Operation name -> operations; operation name -> messages invoking it.
  std::map<std::string, std::vector<ElementRef>> ops_by_name;
  std::map<std::string, std::vector<ElementRef>> messages_by_op;
  std::map<std::string, std::vector<ElementRef>> usecases_by_entry;
  for (const auto& c : arch.components) {
    tm.elements.insert(right("Component", c.name));
    for (const auto& op : c.operations) {
      auto ref = right("Operation", arch::OperationRef{c.name, op.name}.str());
      tm.elements.insert(ref);
      ops_by_name[op.name].push_back(ref);
    }
  }
  for (const auto& s : arch.scenarios) {
    tm.elements.insert(right("UseCase", s.name));
    usecases_by_entry[s.steps.front().operation].push_back(right("UseCase", s.name));
    for (std::size_t i = 0; i < s.steps.size(); ++i) {
      auto ref = right("Message", message_ref(s.name, i));
      tm.elements.insert(ref);
      messages_by_op[s.steps[i].operation].push_back(ref);
    }
  }

  std::map<std::string, std::string, std::less<>> normalized;
  auto norm = [&](const std::string& raw) -> const std::string& {
    auto it = normalized.find(raw);
    if (it == normalized.end()) it = normalized.emplace(raw, normalize_endpoint(raw, options)).first;
    return it->second;
  };

  auto lookup = [](const auto& index, const std::string& key) -> std::vector<ElementRef> {
    auto it = index.find(key);
    return it == index.end() ? std::vector<ElementRef>{} : it->second;
  };

  for (const auto& svc : log.services) {
    tm.elements.insert(left("Service", svc.name));
    if (arch.find_component(svc.name))
      tm.links.push_back({Rule::Service2Component, {left("Service", svc.name)}, {right("Component", svc.name)}});
  }
  for (const auto& ep : log.endpoints) {
    auto ref = left("EndPoint", endpoint_ref(ep.service, ep.name));
    tm.elements.insert(ref);
    auto ops = lookup(ops_by_name, norm(ep.name));
    if (!ops.empty()) tm.links.push_back({Rule::EndPoint2Signature, {ref}, ops});
  }
  for (const auto& t : log.traces) {
    tm.elements.insert(left("Trace", t.id));
    for (const auto& s : t.spans) {
      auto ref = left("Span", span_ref(t, s));
      tm.elements.insert(ref);
      auto messages = lookup(messages_by_op, norm(s.name));
      if (!messages.empty()) tm.links.push_back({Rule::Span2Message, {ref}, messages});
    }
    auto usecases = lookup(usecases_by_entry, norm(t.spans[t.root].name));
    if (!usecases.empty()) tm.links.push_back({Rule::Trace2UseCase, {left("Trace", t.id)}, usecases});
  }

  for (auto& link : tm.links) {
    std::sort(link.left_ends.begin(), link.left_ends.end());
    std::sort(link.right_ends.begin(), link.right_ends.end());
  }
  std::sort(tm.links.begin(), tm.links.end(), [](const TraceLink& a, const TraceLink& b) {
    return std::tie(a.rule, a.left_ends, a.right_ends) < std::tie(b.rule, b.left_ends, b.right_ends);
  });
  tm.links.erase(std::unique(tm.links.begin(), tm.links.end()), tm.links.end());
  tm.unmatched = coverage_report(tm, log, arch);
  return tm;
}

std::vector<TraceLink> links_for(const TraceModel& tm, const ElementRef& element) {
  if (!tm.elements.contains(element))
    throw NotFoundError("unknown trace element " + element.kind + " '" + element.ref + "'");
  std::vector<TraceLink> out;
  for (const auto& link : tm.links) {
    const auto& ends = element.side == Side::Left ? link.left_ends : link.right_ends;
    if (std::find(ends.begin(), ends.end(), element) != ends.end()) out.push_back(link);
  }
  return out;
}

CoverageReport coverage_report(const TraceModel& tm, const ingest::LogModel& log,
                               const arch::ArchModel& arch) {
  std::set<std::string> services, endpoints, traces, scenarios;
  for (const auto& link : tm.links) {
    switch (link.rule) {
      case Rule::Service2Component:
        for (const auto& e : link.left_ends) services.insert(e.ref);
        break;
      case Rule::EndPoint2Signature:
        for (const auto& e : link.left_ends) endpoints.insert(e.ref);
        break;
      case Rule::Trace2UseCase:
        for (const auto& e : link.left_ends) traces.insert(e.ref);
        for (const auto& e : link.right_ends) scenarios.insert(e.ref);
        break;
      case Rule::Span2Message:
        break;
    }
  }
  CoverageReport r;
  for (const auto& s : log.services)
    if (!services.contains(s.name)) r.unmatched_services.push_back(s.name);
  for (const auto& e : log.endpoints) {
    auto ref = endpoint_ref(e.service, e.name);
    if (!endpoints.contains(ref)) r.unmatched_endpoints.push_back(ref);
  }
  for (const auto& t : log.traces)
    if (!traces.contains(t.id)) r.unmatched_traces.push_back(t.id);
  for (const auto& s : arch.scenarios)
    if (!scenarios.contains(s.name)) r.unmatched_scenarios.push_back(s.name);
  return r;
}

json to_json(const CoverageReport& r) {
  return {{"unmatched_services", r.unmatched_services},
          {"unmatched_endpoints", r.unmatched_endpoints},
          {"unmatched_traces", r.unmatched_traces},
          {"unmatched_scenarios", r.unmatched_scenarios}};
}

json to_json(const TraceModel& tm) {
  auto ends = [](const std::vector<ElementRef>& v) {
    json out = json::array();
    for (const auto& e : v) out.push_back({{"kind", e.kind}, {"ref", e.ref}});
    return out;
  };
  json links = json::array();
  for (const auto& l : tm.links)
    links.push_back({{"rule", std::string(to_string(l.rule))}, {"left", ends(l.left_ends)}, {"right", ends(l.right_ends)}});
  return {{"left", tm.left_model_ref}, {"right", tm.right_model_ref}, {"links", links}};
}

}  // namespace perfloop::trace
