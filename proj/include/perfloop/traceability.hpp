#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "perfloop/arch_model.hpp"
#include "perfloop/trace_ingest.hpp"

namespace perfloop::trace {

enum class Rule { Trace2UseCase, Span2Message, EndPoint2Signature, Service2Component };
enum class Side { Left, Right };

std::string_view to_string(Rule rule);

// Element kinds and the form of their refs:
//   Left:  Trace "<traceId>", Span "<traceId>/<spanId>[@client]",
//          EndPoint "<service>|<name>", Service "<name>"
//   Right: UseCase "<scenario>", Message "<scenario>#<step>",
//          Operation "<component>/<operation>", Component "<name>"
struct ElementRef {
  Side side = Side::Left;
  std::string kind;
  std::string ref;

  auto operator<=>(const ElementRef&) const = default;
};

struct TraceLink {
  Rule rule;
  std::vector<ElementRef> left_ends;
  std::vector<ElementRef> right_ends;

  bool operator==(const TraceLink&) const = default;
};

struct CoverageReport {
  std::vector<std::string> unmatched_services;
  std::vector<std::string> unmatched_endpoints;
  std::vector<std::string> unmatched_traces;
  std::vector<std::string> unmatched_scenarios;

  bool empty() const;
  bool operator==(const CoverageReport&) const = default;
};

struct TraceModel {
  std::string left_model_ref;
  std::string right_model_ref;
  std::vector<TraceLink> links;  // canonical order
  std::set<ElementRef> elements;  // every element of both models
  CoverageReport unmatched;
};

struct MatchOptions {
  // Stripped from endpoint names before comparing with operation names.
  std::string strip_prefix = R"(^[A-Za-z][A-Za-z0-9+.\-]*://[^/]*/?)";
};

std::string normalize_endpoint(std::string_view name, const MatchOptions& options = {});

std::string span_ref(const ingest::Trace& trace, const ingest::SpanRecord& span);
std::string endpoint_ref(std::string_view service, std::string_view name);
std::string message_ref(std::string_view scenario, std::size_t step);

TraceModel generate_links(const ingest::LogModel& log, const arch::ArchModel& arch,
                          const MatchOptions& options = {});

// Links that have the element as one of their ends. Throws NotFoundError for
// an element that belongs to neither model.
std::vector<TraceLink> links_for(const TraceModel& tm, const ElementRef& element);

CoverageReport coverage_report(const TraceModel& tm, const ingest::LogModel& log,
                               const arch::ArchModel& arch);

nlohmann::json to_json(const TraceModel& tm);
nlohmann::json to_json(const CoverageReport& report);

}  // namespace perfloop::trace
