#include <algorithm>

#include "doctest.h"
#include "perfloop/error.hpp"
#include "perfloop/session_engine.hpp"
#include "support/models.hpp"

using namespace perfloop;
using namespace perfloop::session;
using refactor::ActionKind;

namespace {

SessionConfig small_config(double rate = 12.0) {
  SessionConfig c;
  c.seed = 77;
  c.run.duration_s = 60.0;
  c.run.warmup_s = 10.0;
  c.run.sample_window_s = 10.0;
  c.run.arrivals = {{"Main", rate}};
  c.calibration_traces = 100;
  return c;
}

const SessionState& base_state() {
  static const SessionState s = start_session(models::three_tier(), small_config());
  return s;
}

nlohmann::json snapshot(const SessionState& s) {
  return {{"model", arch::to_json(s.model)}, {"history", history_json(s)}, {"generation", s.system.generation},
          {"pending", s.pending_system.size()}};
}

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[1];
}

}  // namespace

TEST_SUITE("session_engine") {
  TEST_CASE("start annotates demands and records iteration zero") {
    const auto& s = base_state();
    REQUIRE(s.history.size() == 1);
    CHECK(s.iteration() == 0);
    for (const auto& c : s.model.components)
      for (const auto& op : c.operations) CHECK(op.service_demand.has_value());
    for (const auto& n : s.model.nodes) CHECK(n.utilization.has_value());
    CHECK(s.model.find_scenario("Main")->resp_time.has_value());
    auto d = *s.model.find_component("api")->find_operation("write")->service_demand;
    CHECK(std::abs(d - 0.04) / 0.04 < 0.2);
    CHECK(s.target_scenario() == "Main");
  }

  TEST_CASE("minimal model session") {
    auto s = start_session(models::minimal(0.05), [] {
      SessionConfig c;
      c.run.duration_s = 30.0;
      c.run.arrivals = {{"Browse", 2.0}};
      c.calibration_traces = 50;
      return c;
    }());
    CHECK(s.model.components[0].operations[0].service_demand.has_value());
  }

  TEST_CASE("same seed gives identical iteration zero") {
    auto again = start_session(models::three_tier(), small_config());
    CHECK(to_json(again.history[0]) == to_json(base_state().history[0]));
  }

  TEST_CASE("iteration zero equals a manual pipeline") {
    const auto& s = base_state();
    const auto& cfg = s.config;
    std::vector<annotate::MeasuredIndices> reps;
    for (int rep = 0; rep < 3; ++rep) {
      auto run = cfg.run;
      run.seed = derive_seed(cfg.seed, 0, rep);
      auto out = sim::run(sim::instantiate(models::three_tier()), run);
      auto log = ingest::build_log_model(out.spans, out.utilization);
      reps.push_back(annotate::measure_indices(log, trace::generate_links(log, models::three_tier()),
                                               run.duration_s - run.warmup_s));
    }
    const auto& measured = s.history[0].measured;
    CHECK(measured.scenarios.at("Main").resp_time ==
          median3({reps[0].scenarios.at("Main").resp_time, reps[1].scenarios.at("Main").resp_time,
                   reps[2].scenarios.at("Main").resp_time}));
    for (const auto& [svc, u] : measured.utilization)
      CHECK(u == median3({reps[0].utilization.at(svc), reps[1].utilization.at(svc), reps[2].utilization.at(svc)}));
  }

  TEST_CASE("unknown target scenario is rejected") {
    auto c = small_config();
    c.target_scenario = "Nope";
    CHECK_THROWS_AS(start_session(models::three_tier(), c), NotFoundError);
  }

  TEST_CASE("preview has no side effects") {
    auto s = base_state();
    auto before = snapshot(s);
    auto p = preview(s, {{ActionKind::Clone, "api"}});
    CHECK(snapshot(s) == before);
    CHECK(p.resp_time_delta.at("Main") < 0.0);
    CHECK(p.model_version_after == s.model.version + 1);
    CHECK_THROWS_AS(preview(s, {{ActionKind::Clone, "ghost"}}), NotFoundError);
  }

  TEST_CASE("model-only apply leaves the system alone until measured") {
    auto s = base_state();
    apply(s, {{ActionKind::Clone, "api"}}, Scope::ModelOnly);
    CHECK(s.system.generation == 0);
    CHECK(s.history.size() == 1);
    CHECK(s.pending_system.size() == 1);
    CHECK(s.history[0].predicted.has_value());
    CHECK(s.model.find_component("cloned-api"));
    measure(s);
    CHECK(s.system.generation == 1);
    CHECK(s.pending_system.empty());
    CHECK(s.history.size() == 2);
    CHECK(s.history[0].post_measured.has_value());
  }

  TEST_CASE("cloning the busiest service lowers its measured utilization") {
    auto s = base_state();
    auto before = s.history.back().measured.utilization.at("api");
    apply(s, {{ActionKind::Clone, "api"}}, Scope::ModelAndSystem);
    REQUIRE(s.history.size() == 2);
    CHECK(s.iteration() == 1);
    CHECK(s.history.back().measured.utilization.at("api") < before);
    CHECK(s.history[0].applied.size() == 1);
  }

  TEST_CASE("failed apply leaves the state untouched") {
    auto s = base_state();
    auto before = snapshot(s);
    CHECK_THROWS_AS(apply(s, {{ActionKind::MoveOperation, "db", "query"}}, Scope::ModelAndSystem), ValidationError);
    CHECK(snapshot(s) == before);
    // A system-side failure after the model change rolls the model back too.
    s.pending_system.push_back({ActionKind::Clone, "ghost"});
    auto poisoned = snapshot(s);
    CHECK_THROWS_AS(apply(s, {{ActionKind::Clone, "api"}}, Scope::ModelAndSystem), NotFoundError);
    CHECK(snapshot(s) == poisoned);
  }

  TEST_CASE("batch with a floor above one does nothing") {
    auto s = base_state();
    auto r = run_batch(s, 1.01, 5);
    CHECK(r.status == BatchStatus::Clean);
    CHECK(r.iterations == 0);
    CHECK(s.history.size() == 1);
  }

  TEST_CASE("batch cap of one applies at most one action") {
    auto s = base_state();
    auto r = run_batch(s, 0.01, 1);
    CHECK(r.iterations <= 1);
    std::size_t actions = 0;
    for (const auto& rec : s.history)
      for (const auto& call : rec.applied) actions += call.actions.size();
    CHECK(actions <= 1);
    CHECK_FALSE(comparison_table(s).empty());
  }

  TEST_CASE("best action improves on the baseline") {
    const auto& s = base_state();
    auto occ = detect(s);
    REQUIRE_FALSE(occ.empty());
    auto best = best_action(s, occ[0]);
    REQUIRE(best);
    auto p = preview(s, {*best});
    CHECK(p.resp_time_delta.at("Main") < 0.0);
  }

  TEST_CASE("record file round-trip and replay") {
    auto s = base_state();
    apply(s, {{ActionKind::Clone, "api"}}, Scope::ModelOnly);
    measure(s);
    apply(s, {{ActionKind::MoveOperation, "api", "write"}}, Scope::ModelAndSystem);
    auto text = record_file(s);
    auto file = parse_record_file(text);
    CHECK(file.records.size() == s.history.size());
    CHECK(record_file(replay(file).state) == text);
    auto r = replay(file);
    CHECK(r.identical);
    CHECK(r.mismatches.empty());

    file.records.back().measured.utilization.begin()->second += 1e-15;
    CHECK_FALSE(replay(file).identical);
    CHECK_THROWS_AS(parse_record_file("{\"type\":\"record\"}\n"), ParseError);
  }

  TEST_CASE("config json round-trip") {
    auto c = small_config();
    c.band_overrides = {{"maxHwUtil", {{"lb", 0.1}, {"ub", 0.9}}}};
    c.service_means = {{"api/read", 0.02}};
    auto back = config_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));
    CHECK(scope_from_string("MODEL_ONLY") == Scope::ModelOnly);
    CHECK_THROWS_AS(scope_from_string("BOTH"), ParseError);
  }

  TEST_CASE("seeds differ per iteration and repetition") {
    CHECK(derive_seed(1, 0, 0) != derive_seed(1, 0, 1));
    CHECK(derive_seed(1, 0, 0) != derive_seed(1, 1, 0));
    CHECK(derive_seed(1, 0, 0) != derive_seed(2, 0, 0));
  }
}
