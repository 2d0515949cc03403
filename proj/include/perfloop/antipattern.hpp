#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "perfloop/arch_model.hpp"

namespace perfloop::antipattern {

enum class Metric { NumClientConnects, NumMsgs, MaxHwUtil, ResDemand };
enum class Kind { Blob, PipeAndFilter };

std::string_view to_string(Metric metric);
std::string_view to_string(Kind kind);
Metric metric_from_string(std::string_view text);

struct ThresholdBand {
  double lower = 0.0;
  double upper = 1.0;
};

struct Bands {
  std::map<Metric, ThresholdBand> bands;
  std::vector<std::string> warnings;

  const ThresholdBand& at(Metric m) const;
};

// Violation probability of a fuzzy threshold: 1 - (UB - F) / (UB - LB),
// clamped to [0, 1].
double fuzzy_prob(double value, const ThresholdBand& band);

struct LiteralProbability {
  Metric metric;
  std::string element;  // component, "a,b" pair, node, or operation ref
  double value = 0.0;
  double probability = 0.0;
};

struct Occurrence {
  Kind kind;
  std::string target;  // component (Blob) or "component/operation" (PaF)
  std::string scenario;
  std::vector<LiteralProbability> literals;
  double probability = 0.0;  // product of literal probabilities
};

struct PartnerMetrics {
  std::string partner;
  double num_msgs = 0.0;
  std::string busiest_node;
  double max_hw_util = 0.0;
};

struct ComponentMetrics {
  double num_client_connects = 0.0;
  std::vector<PartnerMetrics> partners;  // sorted by partner name
};

ComponentMetrics metrics_for_component(const arch::ArchModel& model, std::string_view component,
                                       std::string_view scenario);

// Blob probability from raw metrics: P_connects * max over partners of
// (P_msgs * P_util). Literals report the maximising partner.
Occurrence evaluate_blob(std::string component, std::string scenario, const ComponentMetrics& metrics,
                         const Bands& bands);
Occurrence evaluate_paf(std::string operation, std::string scenario, std::string node, double demand,
                        double utilization, const Bands& bands);

struct DetectOptions {
  double report_floor = 0.01;
};

std::vector<Occurrence> detect_blob(const arch::ArchModel& model, const Bands& bands, std::string_view scenario,
                                    const DetectOptions& options = {});
std::vector<Occurrence> detect_paf(const arch::ArchModel& model, const Bands& bands, std::string_view scenario,
                                   const DetectOptions& options = {});
// Blob and PaF over every scenario, canonically sorted.
std::vector<Occurrence> detect_all(const arch::ArchModel& model, const Bands& bands,
                                   const DetectOptions& options = {});
void canonical_sort(std::vector<Occurrence>& occurrences);

// LB = model-wide mean, UB = model-wide max of each metric.
Bands default_bands(const arch::ArchModel& model);
// Applies {"<metric>": {"lb": x, "ub": y}} overrides.
Bands apply_overrides(Bands bands, const nlohmann::json& config);

nlohmann::json to_json(const Bands& bands);
nlohmann::json to_json(const Occurrence& occurrence);
nlohmann::json to_json(const std::vector<Occurrence>& occurrences);
Occurrence occurrence_from_json(const nlohmann::json& doc);

}  // namespace perfloop::antipattern
