#include "perfloop/trace_ingest.hpp"

#include <algorithm>
#include <climits>
#include <set>
#include <sstream>
#include <tuple>

#include "perfloop/error.hpp"

namespace perfloop::ingest {

using nlohmann::json;

std::string_view to_string(SpanKind kind) {
  switch (kind) {
    case SpanKind::Server: return "SERVER";
    case SpanKind::Client: return "CLIENT";
    case SpanKind::Undefined: break;
  }
  return "UNDEFINED";
}

namespace {

[[noreturn]] void fail(std::size_t index, std::string_view field, std::string_view what) {
  std::ostringstream os;
  os << "record " << index << ": field '" << field << "' " << what;
  throw ParseError(os.str());
}

std::string required_string(const json& obj, std::size_t index, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) fail(index, field, "is missing");
  if (!it->is_string()) fail(index, field, "must be a string");
  auto value = it->get<std::string>();
  if (value.empty()) fail(index, field, "must not be empty");
  return value;
}

std::int64_t required_integer(const json& obj, std::size_t index, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) fail(index, field, "is missing");
  if (!it->is_number_integer()) fail(index, field, "must be an integer");
  return it->get<std::int64_t>();
}

// Splits the input into JSON objects, one per record.
std::vector<json> split_records(std::string_view input) {
  std::vector<json> records;
  auto first = input.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return records;

  if (input[first] == '[') {
    json doc;
    try {
      doc = json::parse(input);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON array: ") + e.what());
    }
    for (auto& item : doc) records.push_back(std::move(item));
  } else {
    std::size_t pos = 0;
    while (pos < input.size()) {
      auto end = input.find('\n', pos);
      if (end == std::string_view::npos) end = input.size();
      auto line = input.substr(pos, end - pos);
      pos = end + 1;
      if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
      try {
        records.push_back(json::parse(line));
      } catch (const json::parse_error& e) {
        std::ostringstream os;
        os << "record " << records.size() << ": malformed JSON: " << e.what();
        throw ParseError(os.str());
      }
    }
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].is_object()) {
      std::ostringstream os;
      os << "record " << i << ": expected a JSON object";
      throw ParseError(os.str());
    }
  }
  return records;
}

SpanRecord parse_span(const json& obj, std::size_t index) {
  SpanRecord span;
  span.trace_id = required_string(obj, index, "traceId");
  span.span_id = required_string(obj, index, "id");
  if (auto it = obj.find("parentId"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) fail(index, "parentId", "must be a string");
    span.parent_id = it->get<std::string>();
  }
  if (auto it = obj.find("name"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) fail(index, "name", "must be a string");
    span.name = it->get<std::string>();
  }
  span.timestamp = required_integer(obj, index, "timestamp");
  span.duration = required_integer(obj, index, "duration");
  if (span.duration < 0) fail(index, "duration", "must be non-negative");

  if (auto it = obj.find("kind"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) fail(index, "kind", "must be a string");
    auto kind = it->get<std::string>();
    if (kind == "SERVER") span.kind = SpanKind::Server;
    else if (kind == "CLIENT") span.kind = SpanKind::Client;
  }

  auto service = obj.find("localEndpoint");
  if (service != obj.end() && service->is_object()) {
    if (auto name = service->find("serviceName"); name != service->end() && name->is_string())
      span.service_name = name->get<std::string>();
  }
  // Flattened exports carry the service at top level.
  if (span.service_name.empty()) {
    if (auto name = obj.find("serviceName"); name != obj.end() && name->is_string())
      span.service_name = name->get<std::string>();
  }
  return span;
}

}  // namespace

std::vector<SpanRecord> parse_spans(std::string_view input) {
  auto records = split_records(input);
  std::vector<SpanRecord> spans;
  spans.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) spans.push_back(parse_span(records[i], i));
  return spans;
}

std::vector<UtilizationSample> parse_utilization(std::string_view input) {
  auto records = split_records(input);
  std::vector<UtilizationSample> samples;
  samples.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& obj = records[i];
    UtilizationSample s;
    s.service_name = required_string(obj, i, "service");
    s.window_start = required_integer(obj, i, "start");
    s.window_end = required_integer(obj, i, "end");
    auto u = obj.find("utilization");
    if (u == obj.end() || !u->is_number()) fail(i, "utilization", "must be a number");
    s.utilization = u->get<double>();
    if (s.utilization < 0.0 || s.utilization > 1.0) fail(i, "utilization", "must lie in [0,1]");
    if (s.window_end <= s.window_start) fail(i, "end", "must be greater than start");
    samples.push_back(std::move(s));
  }
  return samples;
}

const Service* LogModel::find_service(std::string_view name) const {
  auto it = std::lower_bound(services.begin(), services.end(), name,
                             [](const Service& s, std::string_view n) { return s.name < n; });
  return it != services.end() && it->name == name ? &*it : nullptr;
}

std::size_t LogModel::span_count() const {
  std::size_t n = 0;
  for (const auto& t : traces) n += t.spans.size();
  return n;
}

LogModel build_log_model(const std::vector<SpanRecord>& spans,
                         const std::vector<UtilizationSample>& util) {
  LogModel log;

  // A CLIENT and a SERVER span may legitimately share an id (Zipkin shared
  // spans), so duplicates are detected per (trace, id, kind).
  std::map<std::string, std::vector<SpanRecord>> by_trace;
  std::set<std::tuple<std::string, std::string, SpanKind>> seen;
  for (const auto& span : spans) {
    if (!seen.emplace(span.trace_id, span.span_id, span.kind).second) {
      log.warnings.push_back("duplicate span " + span.span_id + " in trace " + span.trace_id +
                             " ignored");
      continue;
    }
    by_trace[span.trace_id].push_back(span);
  }

  std::vector<std::string> bad_roots;
  std::vector<std::string> dangling;
  for (auto& [id, list] : by_trace) {
    std::stable_sort(list.begin(), list.end(), [](const SpanRecord& a, const SpanRecord& b) {
      return a.timestamp < b.timestamp;
    });
    std::set<std::string> ids;
    for (const auto& s : list) ids.insert(s.span_id);

    std::set<std::string> root_ids;
    std::optional<std::size_t> root;
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto& s = list[i];
      if (!s.parent_id) {
        root_ids.insert(s.span_id);
        if (!root || (list[*root].kind != SpanKind::Server && s.kind == SpanKind::Server))
          root = i;
      } else if (!ids.contains(*s.parent_id)) {
        dangling.push_back(id + "/" + s.span_id);
      }
    }
    if (root_ids.size() != 1) {
      bad_roots.push_back(id + " (" + std::to_string(root_ids.size()) + " roots)");
      continue;
    }
    log.traces.push_back(Trace{id, std::move(list), *root});
  }

  if (!bad_roots.empty()) {
    std::string msg = "traces without exactly one root span:";
    for (const auto& t : bad_roots) msg += " " + t;
    throw ValidationError(msg);
  }
  if (!dangling.empty()) {
    std::string msg = "spans with dangling parent references:";
    for (const auto& s : dangling) msg += " " + s;
    throw ValidationError(msg);
  }

  std::set<std::string> service_names;
  std::set<EndPoint> endpoints;
  for (const auto& t : log.traces) {
    for (const auto& s : t.spans) {
      service_names.insert(s.service_name);
      endpoints.insert(EndPoint{s.service_name, s.name});
    }
  }

  std::map<std::string, std::pair<double, double>> weighted;  // sum(u*dt), sum(dt)
  for (const auto& sample : util) {
    if (sample.window_end <= sample.window_start)
      throw ValidationError("utilization sample for " + sample.service_name +
                            " has an empty window");
    if (sample.utilization < 0.0 || sample.utilization > 1.0)
      throw RangeError("utilization sample for " + sample.service_name + " outside [0,1]");
    auto dt = static_cast<double>(sample.window_end - sample.window_start);
    auto& acc = weighted[sample.service_name];
    acc.first += sample.utilization * dt;
    acc.second += dt;
    service_names.insert(sample.service_name);
  }

  for (const auto& name : service_names) {
    Service svc{name, 0.0, false};
    if (auto it = weighted.find(name); it != weighted.end()) {
      svc.utilization = std::clamp(it->second.first / it->second.second, 0.0, 1.0);
      svc.sampled = true;
    } else {
      log.warnings.push_back("no utilization samples for service " + name);
    }
    log.services.push_back(std::move(svc));
  }
  log.endpoints.assign(endpoints.begin(), endpoints.end());
  return log;
}

double observed_seconds(const LogModel& log) {
  std::int64_t lo = INT64_MAX, hi = INT64_MIN;
  for (const auto& t : log.traces)
    for (const auto& s : t.spans) {
      lo = std::min(lo, s.timestamp);
      hi = std::max(hi, s.timestamp + s.duration);
    }
  return hi > lo ? static_cast<double>(hi - lo) * 1e-6 : 1.0;
}

Summary summarize(const LogModel& log) {
  Summary summary;
  summary.trace_count = log.traces.size();
  std::map<std::string, double> totals;
  for (const auto& t : log.traces) {
    for (const auto& s : t.spans) {
      ++summary.span_count;
      ++summary.per_service[s.service_name].span_count;
      totals[s.service_name] += static_cast<double>(s.duration);
    }
  }
  for (auto& [name, svc] : summary.per_service)
    svc.mean_duration_us = totals[name] / static_cast<double>(svc.span_count);
  return summary;
}

json span_to_json(const SpanRecord& span) {
  json obj = {{"traceId", span.trace_id}, {"id", span.span_id}};
  if (span.parent_id) obj["parentId"] = *span.parent_id;
  obj["name"] = span.name;
  obj["timestamp"] = span.timestamp;
  obj["duration"] = span.duration;
  if (span.kind != SpanKind::Undefined) obj["kind"] = std::string(to_string(span.kind));
  obj["localEndpoint"] = {{"serviceName", span.service_name}};
  return obj;
}

json sample_to_json(const UtilizationSample& sample) {
  return {{"service", sample.service_name},
          {"start", sample.window_start},
          {"end", sample.window_end},
          {"utilization", sample.utilization}};
}

std::string serialize_spans(const std::vector<SpanRecord>& spans) {
  std::string out;
  for (const auto& s : spans) {
    out += span_to_json(s).dump();
    out += '\n';
  }
  return out;
}

std::string serialize_utilization(const std::vector<UtilizationSample>& samples) {
  std::string out;
  for (const auto& s : samples) {
    out += sample_to_json(s).dump();
    out += '\n';
  }
  return out;
}

std::vector<SpanRecord> flatten(const LogModel& log) {
  std::vector<SpanRecord> spans;
  for (const auto& t : log.traces) spans.insert(spans.end(), t.spans.begin(), t.spans.end());
  return spans;
}

json to_json(const Summary& summary) {
  json services = json::object();
  for (const auto& [name, svc] : summary.per_service)
    services[name] = {{"spans", svc.span_count}, {"mean_duration_us", svc.mean_duration_us}};
  return {{"traces", summary.trace_count}, {"spans", summary.span_count}, {"services", services}};
}

json to_json(const LogModel& log) {
  json traces = json::array();
  for (const auto& t : log.traces) {
    json spans = json::array();
    for (const auto& s : t.spans) spans.push_back(span_to_json(s));
    traces.push_back({{"id", t.id}, {"root", t.spans[t.root].span_id}, {"spans", spans}});
  }
  json services = json::array();
  for (const auto& s : log.services)
    services.push_back({{"name", s.name}, {"utilization", s.utilization}, {"sampled", s.sampled}});
  json endpoints = json::array();
  for (const auto& e : log.endpoints) endpoints.push_back({{"service", e.service}, {"name", e.name}});
  return {{"traces", traces},
          {"services", services},
          {"endpoints", endpoints},
          {"warnings", log.warnings}};
}

}  // namespace perfloop::ingest
