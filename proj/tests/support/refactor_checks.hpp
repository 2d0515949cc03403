#pragma once

// Postconditions of a single refactoring, checked against the model it was
// applied to. Returns an empty string when all hold.

#include <set>
#include <sstream>
#include <string>

#include "perfloop/arch_model.hpp"
#include "perfloop/error.hpp"
#include "perfloop/refactor_model.hpp"

namespace checks {

inline std::set<std::string> neighbour_set(const perfloop::arch::ArchModel& m, const std::string& node) {
  auto v = m.neighbours(node);
  return {v.begin(), v.end()};
}

inline std::string refactoring_postconditions(const perfloop::arch::ArchModel& before,
                                              const perfloop::refactor::RefactoringAction& action,
                                              const perfloop::arch::ArchModel& after) {
  using perfloop::refactor::ActionKind;
  std::ostringstream err;
  try {
    after.validate();
  } catch (const perfloop::Error& e) {
    return std::string("invalid model: ") + e.what();
  }
  if (after.components.size() != before.components.size() + 1) err << "component count; ";
  if (after.nodes.size() != before.nodes.size() + 1) err << "node count; ";
  if (after.scenarios.size() != before.scenarios.size()) return err.str() + "scenario count";
  if (after.version != before.version + 1) err << "version; ";

  const auto& added = after.components.back();
  const auto& added_node = after.nodes.back();
  if (added_node.hosts != std::vector<std::string>{added.name}) err << "new node hosts; ";
  auto source_node = before.node_of(action.component)->name;
  if (neighbour_set(after, added_node.name) != neighbour_set(before, source_node)) err << "mirrored links; ";
  // Links among the old nodes are untouched.
  std::size_t new_links = 0;
  for (const auto& l : after.node_links) new_links += l.touches(added_node.name);
  if (after.node_links.size() != before.node_links.size() + new_links) err << "old links changed; ";
  if (added.name.rfind("cloned-" + action.component, 0) != 0) err << "replica name; ";
  if (added_node.name.rfind("cloned-container-" + action.component, 0) != 0) err << "replica node name; ";

  for (std::size_t s = 0; s < before.scenarios.size(); ++s) {
    const auto& sb = before.scenarios[s];
    const auto& sa = after.scenarios[s];
    if (sb.steps.size() != sa.steps.size()) {
      err << "step count in " << sb.name << "; ";
      continue;
    }
    for (std::size_t i = 0; i < sb.steps.size(); ++i) {
      auto expected = sb.steps[i];
      if (action.kind == ActionKind::MoveOperation && expected.callee == action.component &&
          expected.operation == action.operation)
        expected.callee = added.name;
      if (!(sa.steps[i] == expected)) err << "step " << sb.name << "#" << i << "; ";
    }
  }

  const auto* src_before = before.find_component(action.component);
  const auto* src_after = after.find_component(action.component);
  if (action.kind == ActionKind::Clone) {
    if (added.operations != src_before->operations) err << "clone operations; ";
    if (added.clone_of != action.component) err << "clone_of; ";
    if (!(*src_after == *src_before)) err << "original changed; ";
  } else {
    if (added.operations.size() != 1 || added.operations[0].name != action.operation) err << "moved operation; ";
    if (src_after->operations.size() + 1 != src_before->operations.size() || src_after->find_operation(action.operation))
      err << "source operations; ";
  }
  return err.str();
}

}  // namespace checks
