#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace perfloop::arch {

struct Operation {
  std::string name;  // doubles as the endpoint path used for trace matching
  std::optional<double> service_demand;  // seconds

  bool operator==(const Operation&) const = default;
};

struct Component {
  std::string name;
  std::vector<Operation> operations;
  std::optional<std::string> clone_of;

  const Operation* find_operation(std::string_view op) const;
  Operation* find_operation(std::string_view op);
  bool operator==(const Component&) const = default;
};

// Identifies an operation model-wide; rendered as "component/operation".
struct OperationRef {
  std::string component;
  std::string operation;

  std::string str() const { return component + "/" + operation; }
  static OperationRef parse(std::string_view text);
  auto operator<=>(const OperationRef&) const = default;
};

struct Node {
  std::string name;
  std::vector<std::string> hosts;
  std::optional<double> utilization;

  bool operator==(const Node&) const = default;
};

// Unordered pair; stored with first < second.
struct NodeLink {
  std::string first;
  std::string second;

  static NodeLink make(std::string a, std::string b);
  bool touches(std::string_view node) const { return first == node || second == node; }
  const std::string& other(std::string_view node) const { return first == node ? second : first; }
  auto operator<=>(const NodeLink&) const = default;
};

enum class WorkloadPattern { Open, Closed };

struct Workload {
  WorkloadPattern pattern = WorkloadPattern::Open;
  double rate = 0.0;         // requests per second (open)
  double population = 0.0;   // customers (closed)
  double think_time = 0.0;   // seconds (closed)

  bool operator==(const Workload&) const = default;
};

struct Step {
  std::optional<std::string> caller;  // empty for the external actor
  std::string callee;
  std::string operation;
  double exec_probability = 1.0;

  OperationRef target() const { return {callee, operation}; }
  bool operator==(const Step&) const = default;
};

struct Scenario {
  std::string name;
  Workload workload;
  std::vector<Step> steps;
  std::optional<double> resp_time;   // seconds
  std::optional<double> throughput;  // per second

  bool operator==(const Scenario&) const = default;
};

// Parent step of every step under call-stack semantics: a step is nested in
// the nearest enclosing step whose callee is its caller. The first step and
// steps with no enclosing caller hang off step 0. Returns -1 for step 0.
std::vector<int> call_parents(const Scenario& scenario);

// Probability that step `index` executes: its own probability times those
// of every enclosing step.
double path_probability(const Scenario& scenario, std::size_t index);

struct ArchModel {
  std::vector<Component> components;
  std::vector<Node> nodes;
  std::vector<NodeLink> node_links;
  std::vector<Scenario> scenarios;
  long version = 0;

  const Component* find_component(std::string_view name) const;
  Component* find_component(std::string_view name);
  const Node* find_node(std::string_view name) const;
  Node* find_node(std::string_view name);
  const Scenario* find_scenario(std::string_view name) const;
  Scenario* find_scenario(std::string_view name);
  const Operation* find_operation(const OperationRef& ref) const;
  // Node hosting the component, or nullptr.
  const Node* node_of(std::string_view component) const;
  std::vector<std::string> neighbours(std::string_view node) const;

  // Throws ValidationError on any broken invariant.
  void validate() const;
};

ArchModel load_model(std::string_view text);
ArchModel model_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ArchModel& model);
std::string serialize(const ArchModel& model);

// True when both models have the same elements, ignoring annotation slots
// and the version counter.
bool same_structure(const ArchModel& a, const ArchModel& b);

enum class AnnotationKind { ServiceDemand, NodeUtilization, ScenarioRespTime, ScenarioThroughput };

std::string_view to_string(AnnotationKind kind);
AnnotationKind annotation_kind_from_string(std::string_view text);

struct Annotation {
  AnnotationKind kind;
  std::string target;  // "component/operation", node name, or scenario name
  double value = 0.0;
};

ArchModel annotate(const ArchModel& model, const Annotation& annotation);

struct StepChange {
  std::string scenario;
  std::size_t index = 0;
  OperationRef from;
  OperationRef to;
  bool operator==(const StepChange&) const = default;
};

struct HostChange {
  std::string node;
  std::vector<std::string> hosts;  // new host list
  bool operator==(const HostChange&) const = default;
};

// Structural change list taking one model to another.
struct ModelDiff {
  std::vector<Component> added_components;
  std::vector<std::string> removed_components;
  std::vector<OperationRef> added_operations;
  std::vector<OperationRef> removed_operations;
  std::vector<Node> added_nodes;
  std::vector<std::string> removed_nodes;
  std::vector<HostChange> host_changes;
  std::vector<NodeLink> added_links;
  std::vector<NodeLink> removed_links;
  std::vector<StepChange> retargeted_steps;

  bool empty() const;
};

ModelDiff diff(const ArchModel& a, const ArchModel& b);
// Replays a change list; the result has the structure of the diff's target.
ArchModel apply_diff(const ArchModel& a, const ModelDiff& d);
nlohmann::json to_json(const ModelDiff& d);

}  // namespace perfloop::arch
