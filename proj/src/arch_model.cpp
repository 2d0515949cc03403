#include "perfloop/arch_model.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "perfloop/error.hpp"

namespace perfloop::arch {

using nlohmann::json;

const Operation* Component::find_operation(std::string_view op) const {
  for (const auto& o : operations)
    if (o.name == op) return &o;
  return nullptr;
}

Operation* Component::find_operation(std::string_view op) {
  for (auto& o : operations)
    if (o.name == op) return &o;
  return nullptr;
}

OperationRef OperationRef::parse(std::string_view text) {
  auto slash = text.find('/');
  if (slash == std::string_view::npos || slash == 0 || slash + 1 == text.size())
    throw ParseError("operation reference '" + std::string(text) +
                     "' must have the form component/operation");
  return {std::string(text.substr(0, slash)), std::string(text.substr(slash + 1))};
}

NodeLink NodeLink::make(std::string a, std::string b) {
  if (b < a) std::swap(a, b);
  return {std::move(a), std::move(b)};
}

std::vector<int> call_parents(const Scenario& scenario) {
  std::vector<int> parents(scenario.steps.size(), -1);
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < scenario.steps.size(); ++i) {
    const auto& step = scenario.steps[i];
    if (i > 0) {
      while (!stack.empty() && (!step.caller || scenario.steps[stack.back()].callee != *step.caller))
        stack.pop_back();
      parents[i] = stack.empty() ? 0 : static_cast<int>(stack.back());
      if (stack.empty()) stack.push_back(0);
    }
    stack.push_back(i);
  }
  return parents;
}

double path_probability(const Scenario& scenario, std::size_t index) {
  auto parents = call_parents(scenario);
  double p = 1.0;
  for (int i = static_cast<int>(index); i >= 0; i = parents[static_cast<std::size_t>(i)])
    p *= scenario.steps[static_cast<std::size_t>(i)].exec_probability;
  return p;
}

namespace {

template <typename T>
auto find_named(T& items, std::string_view name) -> decltype(&items.front()) {
  for (auto& item : items)
    if (item.name == name) return &item;
  return nullptr;
}

}  // namespace

const Component* ArchModel::find_component(std::string_view name) const { return find_named(components, name); }
Component* ArchModel::find_component(std::string_view name) { return find_named(components, name); }
const Node* ArchModel::find_node(std::string_view name) const { return find_named(nodes, name); }
Node* ArchModel::find_node(std::string_view name) { return find_named(nodes, name); }
const Scenario* ArchModel::find_scenario(std::string_view name) const { return find_named(scenarios, name); }
Scenario* ArchModel::find_scenario(std::string_view name) { return find_named(scenarios, name); }

const Operation* ArchModel::find_operation(const OperationRef& ref) const {
  const auto* c = find_component(ref.component);
  return c ? c->find_operation(ref.operation) : nullptr;
}

const Node* ArchModel::node_of(std::string_view component) const {
  for (const auto& n : nodes)
    if (std::find(n.hosts.begin(), n.hosts.end(), component) != n.hosts.end()) return &n;
  return nullptr;
}

std::vector<std::string> ArchModel::neighbours(std::string_view node) const {
  std::vector<std::string> out;
  for (const auto& l : node_links)
    if (l.touches(node)) out.push_back(l.other(node));
  std::sort(out.begin(), out.end());
  return out;
}

void ArchModel::validate() const {
  std::set<std::string> component_names;
  for (const auto& c : components) {
    if (c.name.empty()) throw ValidationError("component with empty name");
    if (c.name.find('/') != std::string::npos)
      throw ValidationError("component " + c.name + ": name must not contain '/'");
    if (!component_names.insert(c.name).second)
      throw ValidationError("component " + c.name + ": duplicate name");
    std::set<std::string> ops;
    for (const auto& op : c.operations) {
      if (op.name.empty()) throw ValidationError("component " + c.name + ": operation with empty name");
      if (!ops.insert(op.name).second)
        throw ValidationError("component " + c.name + ": duplicate operation " + op.name);
      if (op.service_demand && *op.service_demand < 0.0)
        throw ValidationError("operation " + c.name + "/" + op.name + ": service_demand must be >= 0");
    }
  }
  for (const auto& c : components) {
    if (c.clone_of && !component_names.contains(*c.clone_of))
      throw ValidationError("component " + c.name + ": clone_of references unknown component " +
                            *c.clone_of);
  }

  std::set<std::string> node_names;
  std::map<std::string, int> deployments;
  for (const auto& n : nodes) {
    if (n.name.empty()) throw ValidationError("node with empty name");
    if (!node_names.insert(n.name).second) throw ValidationError("node " + n.name + ": duplicate name");
    for (const auto& h : n.hosts) {
      if (!component_names.contains(h))
        throw ValidationError("node " + n.name + ": hosts references unknown component " + h);
      if (++deployments[h] > 1) throw ValidationError("component " + h + ": component deployed twice");
    }
    if (n.utilization && (*n.utilization < 0.0 || *n.utilization > 1.0))
      throw ValidationError("node " + n.name + ": utilization must lie in [0,1]");
  }
  for (const auto& c : components)
    if (!deployments.contains(c.name)) throw ValidationError("component " + c.name + ": not deployed on any node");

  std::set<NodeLink> links;
  for (const auto& l : node_links) {
    if (!node_names.contains(l.first) || !node_names.contains(l.second))
      throw ValidationError("node_links: link " + l.first + "-" + l.second + " references unknown node");
    if (l.first == l.second) throw ValidationError("node_links: self-link on " + l.first);
    if (!links.insert(NodeLink::make(l.first, l.second)).second)
      throw ValidationError("node_links: duplicate link " + l.first + "-" + l.second);
  }

  std::set<std::string> scenario_names;
  for (const auto& s : scenarios) {
    if (!scenario_names.insert(s.name).second)
      throw ValidationError("scenario " + s.name + ": duplicate name");
    if (s.steps.empty()) throw ValidationError("scenario " + s.name + ": steps must not be empty");
    const auto& w = s.workload;
    if (w.pattern == WorkloadPattern::Open && !(w.rate > 0.0))
      throw ValidationError("scenario " + s.name + ": workload rate must be > 0");
    if (w.pattern == WorkloadPattern::Closed && (w.population < 0.0 || w.think_time < 0.0))
      throw ValidationError("scenario " + s.name + ": workload population and think_time must be >= 0");
    if (s.resp_time && *s.resp_time < 0.0)
      throw ValidationError("scenario " + s.name + ": resp_time must be >= 0");
    if (s.throughput && *s.throughput < 0.0)
      throw ValidationError("scenario " + s.name + ": throughput must be >= 0");
    for (std::size_t i = 0; i < s.steps.size(); ++i) {
      const auto& step = s.steps[i];
      auto where = "scenario " + s.name + " step " + std::to_string(i);
      if (step.caller && !component_names.contains(*step.caller))
        throw ValidationError(where + ": caller references unknown component " + *step.caller);
      const auto* callee = find_component(step.callee);
      if (!callee) throw ValidationError(where + ": callee references unknown component " + step.callee);
      if (!callee->find_operation(step.operation))
        throw ValidationError(where + ": operation " + step.operation + " does not belong to " + step.callee);
      if (!(step.exec_probability > 0.0 && step.exec_probability <= 1.0))
        throw ValidationError(where + ": prob must lie in (0,1]");
    }
  }
}

namespace {

std::optional<double> opt_number(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) throw ParseError(where + ": field '" + key + "' must be a number");
  return it->get<double>();
}

std::string req_string(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string())
    throw ParseError(where + ": field '" + key + "' must be a string");
  return it->get<std::string>();
}

const json& req_array(const json& obj, const char* key, const std::string& where) {
  static const json empty = json::array();
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return empty;
  if (!it->is_array()) throw ParseError(where + ": field '" + key + "' must be an array");
  return *it;
}

json opt_to_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

ArchModel model_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("model document must be a JSON object");
  ArchModel m;
  for (const auto& c : req_array(doc, "components", "model")) {
    Component comp;
    comp.name = req_string(c, "name", "components[]");
    auto where = "component " + comp.name;
    for (const auto& o : req_array(c, "operations", where)) {
      Operation op;
      if (o.is_string()) {
        op.name = o.get<std::string>();
      } else {
        op.name = req_string(o, "name", where + " operations[]");
        op.service_demand = opt_number(o, "service_demand", where + " operation " + op.name);
      }
      comp.operations.push_back(std::move(op));
    }
    if (auto it = c.find("clone_of"); it != c.end() && it->is_string()) comp.clone_of = it->get<std::string>();
    m.components.push_back(std::move(comp));
  }
  for (const auto& n : req_array(doc, "nodes", "model")) {
    Node node;
    node.name = req_string(n, "name", "nodes[]");
    for (const auto& h : req_array(n, "hosts", "node " + node.name)) {
      if (!h.is_string()) throw ParseError("node " + node.name + ": field 'hosts' must hold strings");
      node.hosts.push_back(h.get<std::string>());
    }
    node.utilization = opt_number(n, "utilization", "node " + node.name);
    m.nodes.push_back(std::move(node));
  }
  for (const auto& l : req_array(doc, "node_links", "model")) {
    if (!l.is_array() || l.size() != 2 || !l[0].is_string() || !l[1].is_string())
      throw ParseError("node_links: each link must be a pair of node names");
    m.node_links.push_back(NodeLink::make(l[0].get<std::string>(), l[1].get<std::string>()));
  }
  for (const auto& s : req_array(doc, "scenarios", "model")) {
    Scenario sc;
    sc.name = req_string(s, "name", "scenarios[]");
    auto where = "scenario " + sc.name;
    auto w = s.find("workload");
    if (w == s.end() || !w->is_object()) throw ParseError(where + ": field 'workload' must be an object");
    auto pattern = req_string(*w, "pattern", where + " workload");
    if (pattern == "OPEN") {
      sc.workload.pattern = WorkloadPattern::Open;
      sc.workload.rate = opt_number(*w, "rate", where + " workload").value_or(0.0);
    } else if (pattern == "CLOSED") {
      sc.workload.pattern = WorkloadPattern::Closed;
      sc.workload.population = opt_number(*w, "population", where + " workload").value_or(0.0);
      sc.workload.think_time = opt_number(*w, "think_time", where + " workload").value_or(0.0);
    } else {
      throw ParseError(where + ": field 'pattern' must be OPEN or CLOSED");
    }
    for (const auto& st : req_array(s, "steps", where)) {
      Step step;
      if (auto it = st.find("caller"); it != st.end() && it->is_string()) step.caller = it->get<std::string>();
      step.callee = req_string(st, "callee", where + " steps[]");
      step.operation = req_string(st, "operation", where + " steps[]");
      step.exec_probability = opt_number(st, "prob", where + " steps[]").value_or(1.0);
      sc.steps.push_back(std::move(step));
    }
    sc.resp_time = opt_number(s, "resp_time", where);
    sc.throughput = opt_number(s, "throughput", where);
    m.scenarios.push_back(std::move(sc));
  }
  m.validate();
  return m;
}

ArchModel load_model(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model document: ") + e.what());
  }
  return model_from_json(doc);
}

json to_json(const ArchModel& m) {
  json components = json::array();
  for (const auto& c : m.components) {
    json ops = json::array();
    for (const auto& o : c.operations) ops.push_back({{"name", o.name}, {"service_demand", opt_to_json(o.service_demand)}});
    json comp = {{"name", c.name}, {"operations", ops}};
    if (c.clone_of) comp["clone_of"] = *c.clone_of;
    components.push_back(comp);
  }
  json nodes = json::array();
  for (const auto& n : m.nodes)
    nodes.push_back({{"name", n.name}, {"hosts", n.hosts}, {"utilization", opt_to_json(n.utilization)}});
  json links = json::array();
  for (const auto& l : m.node_links) links.push_back({l.first, l.second});
  json scenarios = json::array();
  for (const auto& s : m.scenarios) {
    json workload = s.workload.pattern == WorkloadPattern::Open
                        ? json{{"pattern", "OPEN"}, {"rate", s.workload.rate}}
                        : json{{"pattern", "CLOSED"},
                               {"population", s.workload.population},
                               {"think_time", s.workload.think_time}};
    json steps = json::array();
    for (const auto& st : s.steps) {
      steps.push_back({{"caller", st.caller ? json(*st.caller) : json(nullptr)},
                       {"callee", st.callee},
                       {"operation", st.operation},
                       {"prob", st.exec_probability}});
    }
    scenarios.push_back({{"name", s.name},
                         {"workload", workload},
                         {"steps", steps},
                         {"resp_time", opt_to_json(s.resp_time)},
                         {"throughput", opt_to_json(s.throughput)}});
  }
  return {{"components", components},
          {"nodes", nodes},
          {"node_links", links},
          {"scenarios", scenarios},
          {"version", m.version}};
}

std::string serialize(const ArchModel& m) { return to_json(m).dump(2); }

namespace {

ArchModel structural_normal_form(ArchModel m) {
  for (auto& c : m.components) {
    for (auto& o : c.operations) o.service_demand.reset();
    std::sort(c.operations.begin(), c.operations.end(),
              [](const Operation& a, const Operation& b) { return a.name < b.name; });
  }
  std::sort(m.components.begin(), m.components.end(),
            [](const Component& a, const Component& b) { return a.name < b.name; });
  for (auto& n : m.nodes) {
    n.utilization.reset();
    std::sort(n.hosts.begin(), n.hosts.end());
  }
  std::sort(m.nodes.begin(), m.nodes.end(), [](const Node& a, const Node& b) { return a.name < b.name; });
  for (auto& l : m.node_links) l = NodeLink::make(l.first, l.second);
  std::sort(m.node_links.begin(), m.node_links.end());
  for (auto& s : m.scenarios) {
    s.resp_time.reset();
    s.throughput.reset();
  }
  std::sort(m.scenarios.begin(), m.scenarios.end(),
            [](const Scenario& a, const Scenario& b) { return a.name < b.name; });
  m.version = 0;
  return m;
}

}  // namespace

bool same_structure(const ArchModel& a, const ArchModel& b) {
  auto na = structural_normal_form(a);
  auto nb = structural_normal_form(b);
  return na.components == nb.components && na.nodes == nb.nodes && na.node_links == nb.node_links &&
         na.scenarios == nb.scenarios;
}

std::string_view to_string(AnnotationKind kind) {
  switch (kind) {
    case AnnotationKind::ServiceDemand: return "service_demand";
    case AnnotationKind::NodeUtilization: return "node_utilization";
    case AnnotationKind::ScenarioRespTime: return "scenario_resp_time";
    case AnnotationKind::ScenarioThroughput: return "scenario_throughput";
  }
  return "unknown";
}

AnnotationKind annotation_kind_from_string(std::string_view text) {
  for (auto k : {AnnotationKind::ServiceDemand, AnnotationKind::NodeUtilization,
                 AnnotationKind::ScenarioRespTime, AnnotationKind::ScenarioThroughput})
    if (to_string(k) == text) return k;
  throw ParseError("unknown annotation kind '" + std::string(text) + "'");
}

ArchModel annotate(const ArchModel& model, const Annotation& a) {
  ArchModel out = model;
  switch (a.kind) {
    case AnnotationKind::ServiceDemand: {
      auto ref = OperationRef::parse(a.target);
      auto* c = out.find_component(ref.component);
      auto* op = c ? c->find_operation(ref.operation) : nullptr;
      if (!op) throw NotFoundError("annotate: unknown operation " + a.target);
      if (!(a.value >= 0.0)) throw RangeError("annotate: service_demand must be >= 0");
      op->service_demand = a.value;
      break;
    }
    case AnnotationKind::NodeUtilization: {
      auto* n = out.find_node(a.target);
      if (!n) throw NotFoundError("annotate: unknown node " + a.target);
      if (!(a.value >= 0.0 && a.value <= 1.0)) throw RangeError("annotate: node utilization must lie in [0,1]");
      n->utilization = a.value;
      break;
    }
    case AnnotationKind::ScenarioRespTime:
    case AnnotationKind::ScenarioThroughput: {
      auto* s = out.find_scenario(a.target);
      if (!s) throw NotFoundError("annotate: unknown scenario " + a.target);
      if (!(a.value >= 0.0)) throw RangeError("annotate: scenario index must be >= 0");
      (a.kind == AnnotationKind::ScenarioRespTime ? s->resp_time : s->throughput) = a.value;
      break;
    }
  }
  ++out.version;
  return out;
}

bool ModelDiff::empty() const {
  return added_components.empty() && removed_components.empty() && added_operations.empty() &&
         removed_operations.empty() && added_nodes.empty() && removed_nodes.empty() &&
         host_changes.empty() && added_links.empty() && removed_links.empty() &&
         retargeted_steps.empty();
}

ModelDiff diff(const ArchModel& a, const ArchModel& b) {
  ModelDiff d;
  for (const auto& c : b.components) {
    const auto* old = a.find_component(c.name);
    if (!old) {
      d.added_components.push_back(c);
      continue;
    }
    for (const auto& op : c.operations)
      if (!old->find_operation(op.name)) d.added_operations.push_back({c.name, op.name});
    for (const auto& op : old->operations)
      if (!c.find_operation(op.name)) d.removed_operations.push_back({c.name, op.name});
  }
  for (const auto& c : a.components)
    if (!b.find_component(c.name)) d.removed_components.push_back(c.name);

  for (const auto& n : b.nodes) {
    const auto* old = a.find_node(n.name);
    if (!old) {
      d.added_nodes.push_back(n);
    } else {
      auto h1 = old->hosts, h2 = n.hosts;
      std::sort(h1.begin(), h1.end());
      std::sort(h2.begin(), h2.end());
      if (h1 != h2) d.host_changes.push_back({n.name, n.hosts});
    }
  }
  for (const auto& n : a.nodes)
    if (!b.find_node(n.name)) d.removed_nodes.push_back(n.name);

  std::set<NodeLink> la, lb;
  for (const auto& l : a.node_links) la.insert(NodeLink::make(l.first, l.second));
  for (const auto& l : b.node_links) lb.insert(NodeLink::make(l.first, l.second));
  std::set_difference(lb.begin(), lb.end(), la.begin(), la.end(), std::back_inserter(d.added_links));
  std::set_difference(la.begin(), la.end(), lb.begin(), lb.end(), std::back_inserter(d.removed_links));

  for (const auto& s : b.scenarios) {
    const auto* old = a.find_scenario(s.name);
    if (!old || old->steps.size() != s.steps.size()) continue;
    for (std::size_t i = 0; i < s.steps.size(); ++i) {
      auto from = old->steps[i].target(), to = s.steps[i].target();
      if (from != to) d.retargeted_steps.push_back({s.name, i, from, to});
    }
  }
  return d;
}

ArchModel apply_diff(const ArchModel& a, const ModelDiff& d) {
  ArchModel m = a;
  auto erase_named = [](auto& items, const std::string& name) {
    items.erase(std::remove_if(items.begin(), items.end(), [&](const auto& x) { return x.name == name; }),
                items.end());
  };
  for (const auto& name : d.removed_components) erase_named(m.components, name);
  for (const auto& ref : d.removed_operations)
    if (auto* c = m.find_component(ref.component)) erase_named(c->operations, ref.operation);
  for (const auto& ref : d.added_operations)
    if (auto* c = m.find_component(ref.component)) c->operations.push_back({ref.operation, std::nullopt});
  for (const auto& c : d.added_components) m.components.push_back(c);

  for (const auto& name : d.removed_nodes) erase_named(m.nodes, name);
  for (const auto& hc : d.host_changes)
    if (auto* n = m.find_node(hc.node)) n->hosts = hc.hosts;
  for (const auto& n : d.added_nodes) m.nodes.push_back(n);

  for (const auto& l : d.removed_links)
    m.node_links.erase(std::remove_if(m.node_links.begin(), m.node_links.end(),
                                      [&](const NodeLink& x) { return NodeLink::make(x.first, x.second) == l; }),
                       m.node_links.end());
  for (const auto& l : d.added_links) m.node_links.push_back(l);

  for (const auto& sc : d.retargeted_steps) {
    auto* s = m.find_scenario(sc.scenario);
    if (!s || sc.index >= s->steps.size()) continue;
    s->steps[sc.index].callee = sc.to.component;
    s->steps[sc.index].operation = sc.to.operation;
  }
  return m;
}

json to_json(const ModelDiff& d) {
  auto refs = [](const std::vector<OperationRef>& v) {
    json out = json::array();
    for (const auto& r : v) out.push_back(r.str());
    return out;
  };
  auto links = [](const std::vector<NodeLink>& v) {
    json out = json::array();
    for (const auto& l : v) out.push_back({l.first, l.second});
    return out;
  };
  json added_components = json::array();
  for (const auto& c : d.added_components) added_components.push_back(c.name);
  json added_nodes = json::array();
  for (const auto& n : d.added_nodes) added_nodes.push_back({{"name", n.name}, {"hosts", n.hosts}});
  json host_changes = json::array();
  for (const auto& h : d.host_changes) host_changes.push_back({{"node", h.node}, {"hosts", h.hosts}});
  json steps = json::array();
  for (const auto& s : d.retargeted_steps)
    steps.push_back({{"scenario", s.scenario}, {"index", s.index}, {"from", s.from.str()}, {"to", s.to.str()}});
  return {{"added_components", added_components},
          {"removed_components", d.removed_components},
          {"added_operations", refs(d.added_operations)},
          {"removed_operations", refs(d.removed_operations)},
          {"added_nodes", added_nodes},
          {"removed_nodes", d.removed_nodes},
          {"host_changes", host_changes},
          {"added_links", links(d.added_links)},
          {"removed_links", links(d.removed_links)},
          {"retargeted_steps", steps}};
}

}  // namespace perfloop::arch
