#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "perfloop/antipattern.hpp"
#include "perfloop/arch_model.hpp"

namespace perfloop::refactor {

enum class ActionKind { Clone, MoveOperation };
enum class Provenance { AntipatternDriven, Random, Manual };

struct RefactoringAction {
  ActionKind kind = ActionKind::Clone;
  std::string component;
  std::string operation;  // MoveOperation only
  Provenance provenance = Provenance::Manual;
  std::optional<std::string> source_occurrence;

  // Same edit, regardless of provenance.
  bool same_edit(const RefactoringAction& o) const {
    return kind == o.kind && component == o.component && operation == o.operation;
  }
  std::string label() const;
};

std::string occurrence_ref(const antipattern::Occurrence& occurrence);

// Names for a replica of `base`: "cloned-<base>" and
// "cloned-container-<base>", suffixed "-2", "-3", ... until both are free.
std::pair<std::string, std::string> replica_names(std::string_view base, const std::set<std::string>& components,
                                                  const std::set<std::string>& nodes);

arch::ArchModel clone_component(const arch::ArchModel& model, std::string_view component,
                                std::vector<std::string>* warnings = nullptr);
arch::ArchModel move_operation(const arch::ArchModel& model, std::string_view component, std::string_view operation);
arch::ArchModel apply_action(const arch::ArchModel& model, const RefactoringAction& action,
                             std::vector<std::string>* warnings = nullptr);
// Throws NotFoundError / ValidationError when the action cannot apply.
void check_action(const arch::ArchModel& model, const RefactoringAction& action);

std::vector<RefactoringAction> enumerate_candidates(const arch::ArchModel& model,
                                                    const std::vector<antipattern::Occurrence>& occurrences);

RefactoringAction random_action(const arch::ArchModel& model, std::uint64_t seed,
                                const std::vector<RefactoringAction>& exclude = {});

nlohmann::json to_json(const RefactoringAction& action);
RefactoringAction action_from_json(const nlohmann::json& doc);

}  // namespace perfloop::refactor
