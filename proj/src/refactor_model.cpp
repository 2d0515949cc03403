#include "perfloop/refactor_model.hpp"

#include <algorithm>
#include <random>

#include "perfloop/error.hpp"

namespace perfloop::refactor {

using nlohmann::json;

std::string RefactoringAction::label() const {
  if (kind == ActionKind::Clone) return "clone(" + component + ")";
  return "moveop(" + component + "/" + operation + ")";
}

std::string occurrence_ref(const antipattern::Occurrence& o) {
  return std::string(antipattern::to_string(o.kind)) + ":" + o.target + "@" + o.scenario;
}

std::pair<std::string, std::string> replica_names(std::string_view base, const std::set<std::string>& components,
                                                  const std::set<std::string>& nodes) {
  std::string component = "cloned-" + std::string(base);
  std::string node = "cloned-container-" + std::string(base);
  for (int k = 2; components.contains(component) || nodes.contains(node); ++k) {
    component = "cloned-" + std::string(base) + "-" + std::to_string(k);
    node = "cloned-container-" + std::string(base) + "-" + std::to_string(k);
  }
  return {component, node};
}

namespace {

std::pair<std::string, std::string> fresh_names(const arch::ArchModel& m, std::string_view base) {
  std::set<std::string> comps, nodes;
  for (const auto& c : m.components) comps.insert(c.name);
  for (const auto& n : m.nodes) nodes.insert(n.name);
  return replica_names(base, comps, nodes);
}

// New node mirroring every link of `source_node`.
void add_mirrored_node(arch::ArchModel& m, const std::string& node, const std::string& component,
                       const std::string& source_node) {
  auto neighbours = m.neighbours(source_node);
  m.nodes.push_back({node, {component}, std::nullopt});
  for (const auto& n : neighbours) m.node_links.push_back(arch::NodeLink::make(node, n));
}

}  // namespace

arch::ArchModel clone_component(const arch::ArchModel& model, std::string_view component,
                                std::vector<std::string>* warnings) {
  const auto* original = model.find_component(component);
  if (!original) throw NotFoundError("clone: unknown component " + std::string(component));
  if (original->clone_of && warnings)
    warnings->push_back("clone: " + original->name + " is itself a clone of " + *original->clone_of);

  arch::ArchModel out = model;
  auto [name, node] = fresh_names(model, component);
  arch::Component replica{name, original->operations, original->name};
  out.components.push_back(std::move(replica));
  add_mirrored_node(out, node, name, model.node_of(component)->name);
  ++out.version;
  return out;
}

arch::ArchModel move_operation(const arch::ArchModel& model, std::string_view component, std::string_view operation) {
  const auto* source = model.find_component(component);
  if (!source) throw NotFoundError("move_operation: unknown component " + std::string(component));
  const auto* op = source->find_operation(operation);
  if (!op)
    throw NotFoundError("move_operation: unknown operation " + std::string(operation) + " of " + std::string(component));
  if (source->operations.size() < 2)
    throw ValidationError("move_operation: " + std::string(component) +
                          " has a single operation; use clone instead");

  arch::ArchModel out = model;
  auto [name, node] = fresh_names(model, component);
  out.components.push_back({name, {*op}, std::nullopt});
  auto* src = out.find_component(component);
  src->operations.erase(std::remove_if(src->operations.begin(), src->operations.end(),
                                       [&](const arch::Operation& o) { return o.name == operation; }),
                        src->operations.end());
  for (auto& s : out.scenarios)
    for (auto& st : s.steps)
      if (st.callee == component && st.operation == operation) st.callee = name;
  add_mirrored_node(out, node, name, model.node_of(component)->name);
  ++out.version;
  return out;
}

void check_action(const arch::ArchModel& model, const RefactoringAction& action) {
  const auto* c = model.find_component(action.component);
  if (!c) throw NotFoundError("unknown component " + action.component);
  if (action.kind == ActionKind::MoveOperation) {
    if (!c->find_operation(action.operation))
      throw NotFoundError("unknown operation " + action.operation + " of " + action.component);
    if (c->operations.size() < 2)
      throw ValidationError(action.component + " has a single operation; use clone instead");
  }
}

arch::ArchModel apply_action(const arch::ArchModel& model, const RefactoringAction& action,
                             std::vector<std::string>* warnings) {
  if (action.kind == ActionKind::Clone) return clone_component(model, action.component, warnings);
  return move_operation(model, action.component, action.operation);
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<RefactoringAction> enumerate_candidates(const arch::ArchModel& model,
                                                    const std::vector<antipattern::Occurrence>& occurrences) {
  std::vector<RefactoringAction> out;
  auto add = [&](RefactoringAction a) {
    for (const auto& x : out)
      if (x.same_edit(a)) return;
    out.push_back(std::move(a));
  };

  for (const auto& occ : occurrences) {
    auto source = occurrence_ref(occ);
    auto driven = [&](ActionKind kind, std::string comp, std::string op) {
      return RefactoringAction{kind, std::move(comp), std::move(op), Provenance::AntipatternDriven, source};
    };
    if (occ.kind == antipattern::Kind::Blob) {
      const auto* c = model.find_component(occ.target);
      if (!c) continue;
      add(driven(ActionKind::Clone, c->name, ""));
      if (c->operations.size() < 2) continue;
      std::vector<double> demands;
      for (const auto& op : c->operations)
        if (op.service_demand) demands.push_back(*op.service_demand);
      if (demands.empty()) continue;
      double mid = median(demands);
      for (const auto& op : c->operations)
        if (op.service_demand && *op.service_demand >= mid) add(driven(ActionKind::MoveOperation, c->name, op.name));
    } else {
      arch::OperationRef ref;
      try {
        ref = arch::OperationRef::parse(occ.target);
      } catch (const ParseError&) {
        continue;
      }
      const auto* c = model.find_component(ref.component);
      if (!c || !c->find_operation(ref.operation)) continue;
      if (c->operations.size() >= 2) add(driven(ActionKind::MoveOperation, c->name, ref.operation));
      add(driven(ActionKind::Clone, c->name, ""));
    }
  }
  return out;
}

RefactoringAction random_action(const arch::ArchModel& model, std::uint64_t seed,
                                const std::vector<RefactoringAction>& exclude) {
  auto excluded = [&](const RefactoringAction& a) {
    return std::any_of(exclude.begin(), exclude.end(), [&](const RefactoringAction& x) { return x.same_edit(a); });
  };
  std::vector<RefactoringAction> clones, moves;
  for (const auto& c : model.components) {
    RefactoringAction clone{ActionKind::Clone, c.name, "", Provenance::Random, std::nullopt};
    if (!excluded(clone)) clones.push_back(clone);
    if (c.operations.size() < 2) continue;
    for (const auto& op : c.operations) {
      RefactoringAction move{ActionKind::MoveOperation, c.name, op.name, Provenance::Random, std::nullopt};
      if (!excluded(move)) moves.push_back(move);
    }
  }
  std::mt19937_64 rng(seed);
  bool pick_clone = rng() % 2 == 0;
  const auto* pool = pick_clone ? &clones : &moves;
  if (pool->empty()) pool = pick_clone ? &moves : &clones;
  if (pool->empty()) throw ValidationError("random_action: model offers no valid refactoring target");
  return (*pool)[rng() % pool->size()];
}

json to_json(const RefactoringAction& a) {
  json target = {{"component", a.component}};
  if (a.kind == ActionKind::MoveOperation) target["operation"] = a.operation;
  std::string provenance = a.provenance == Provenance::AntipatternDriven ? "ANTIPATTERN_DRIVEN"
                           : a.provenance == Provenance::Random         ? "RANDOM"
                                                                        : "MANUAL";
  return {{"kind", a.kind == ActionKind::Clone ? "CLONE" : "MOVE_OPERATION"},
          {"target", target},
          {"provenance", provenance},
          {"occurrence", a.source_occurrence ? json(*a.source_occurrence) : json(nullptr)}};
}

RefactoringAction action_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("action must be a JSON object");
  RefactoringAction a;
  auto kind = doc.value("kind", "");
  if (kind == "CLONE") a.kind = ActionKind::Clone;
  else if (kind == "MOVE_OPERATION") a.kind = ActionKind::MoveOperation;
  else throw ParseError("action kind must be CLONE or MOVE_OPERATION");

  auto target = doc.find("target");
  if (target == doc.end()) throw ParseError("action: missing field 'target'");
  if (target->is_string()) {
    auto text = target->get<std::string>();
    if (a.kind == ActionKind::MoveOperation) {
      auto ref = arch::OperationRef::parse(text);
      a.component = ref.component;
      a.operation = ref.operation;
    } else {
      a.component = text;
    }
  } else if (target->is_object()) {
    a.component = target->value("component", "");
    a.operation = target->value("operation", "");
  } else {
    throw ParseError("action: field 'target' must be a string or object");
  }
  if (a.component.empty()) throw ParseError("action: target component missing");
  if (a.kind == ActionKind::MoveOperation && a.operation.empty()) throw ParseError("action: target operation missing");

  auto provenance = doc.value("provenance", "MANUAL");
  a.provenance = provenance == "ANTIPATTERN_DRIVEN" ? Provenance::AntipatternDriven
                 : provenance == "RANDOM"           ? Provenance::Random
                                                    : Provenance::Manual;
  if (auto it = doc.find("occurrence"); it != doc.end() && it->is_string()) a.source_occurrence = it->get<std::string>();
  return a;
}

}  // namespace perfloop::refactor
