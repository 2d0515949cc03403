#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace perfloop::ingest {

enum class SpanKind { Server, Client, Undefined };

std::string_view to_string(SpanKind kind);

// One Zipkin v2 span. Times are microseconds.
struct SpanRecord {
  std::string trace_id;
  std::string span_id;
  std::optional<std::string> parent_id;
  std::string name;
  std::int64_t timestamp = 0;
  std::int64_t duration = 0;
  SpanKind kind = SpanKind::Undefined;
  std::string service_name;

  bool operator==(const SpanRecord&) const = default;
};

struct UtilizationSample {
  std::string service_name;
  std::int64_t window_start = 0;
  std::int64_t window_end = 0;
  double utilization = 0.0;

  bool operator==(const UtilizationSample&) const = default;
};

struct Trace {
  std::string id;
  std::vector<SpanRecord> spans;  // ordered by timestamp
  std::size_t root = 0;           // index into spans
};

struct Service {
  std::string name;
  double utilization = 0.0;
  bool sampled = false;  // false when no utilization samples were seen
};

struct EndPoint {
  std::string service;
  std::string name;

  auto operator<=>(const EndPoint&) const = default;
};

// Runtime-side model. Traces are sorted by id, services and endpoints by
// name, so two models built from the same data compare equal.
struct LogModel {
  std::vector<Trace> traces;
  std::vector<Service> services;
  std::vector<EndPoint> endpoints;
  std::vector<std::string> warnings;

  const Service* find_service(std::string_view name) const;
  std::size_t span_count() const;
};

// Accepts a JSON array of span objects or newline-delimited objects.
std::vector<SpanRecord> parse_spans(std::string_view input);
std::vector<UtilizationSample> parse_utilization(std::string_view input);

LogModel build_log_model(const std::vector<SpanRecord>& spans,
                         const std::vector<UtilizationSample>& util);

struct ServiceSummary {
  std::size_t span_count = 0;
  double mean_duration_us = 0.0;
};

struct Summary {
  std::size_t trace_count = 0;
  std::size_t span_count = 0;
  std::map<std::string, ServiceSummary> per_service;
};

Summary summarize(const LogModel& log);

// Extent of the log from the first span start to the last span end, in
// seconds; 1 for an empty log.
double observed_seconds(const LogModel& log);

// Wire serialization (newline-delimited JSON, one object per line).
nlohmann::json span_to_json(const SpanRecord& span);
nlohmann::json sample_to_json(const UtilizationSample& sample);
std::string serialize_spans(const std::vector<SpanRecord>& spans);
std::string serialize_utilization(const std::vector<UtilizationSample>& samples);
// Flattens the traces of a model back into span records.
std::vector<SpanRecord> flatten(const LogModel& log);

nlohmann::json to_json(const Summary& summary);
nlohmann::json to_json(const LogModel& log);

}  // namespace perfloop::ingest
