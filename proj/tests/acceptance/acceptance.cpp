// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when any
// fails. `--only <name>` runs a single criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "perfloop/antipattern.hpp"
#include "perfloop/error.hpp"
#include "perfloop/fixtures.hpp"
#include "perfloop/qn_mva.hpp"
#include "perfloop/refactor_model.hpp"
#include "perfloop/session_engine.hpp"
#include "perfloop/sysmock_sim.hpp"
#include "perfloop/traceability.hpp"
#include "support/ctmc.hpp"
#include "support/random_models.hpp"
#include "support/reference_tables.hpp"
#include "support/refactor_checks.hpp"
#include "support/sim_stats.hpp"
#include "support/trace_oracle.hpp"

using namespace perfloop;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Criterion {
  std::string name;
  double budget_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

antipattern::Bands unit_bands() {
  antipattern::Bands b;
  for (auto m : {antipattern::Metric::NumClientConnects, antipattern::Metric::NumMsgs, antipattern::Metric::MaxHwUtil,
                 antipattern::Metric::ResDemand})
    b.bands[m] = {0.0, 1.0};
  return b;
}

// With the unit band (0, 1) a literal's fuzzy probability is its value, so
// the published literals pass through the detector's own formulas.
Outcome table_reproduction() {
  auto bands = unit_bands();
  int cells = 0, good = 0;
  double worst = 0.0;
  std::string bad;
  for (const auto& t : reference::tables()) {
    for (std::size_t col = 0; col < t.columns.size(); ++col) {
      const auto& c = t.columns[col];
      double p;
      if (t.blob) {
        antipattern::ComponentMetrics m{c.literals[0], {{"partner", c.literals[1], "node", c.literals[2]}}};
        p = antipattern::evaluate_blob("target", "scenario", m, bands).probability;
      } else {
        p = antipattern::evaluate_paf("c/op", "scenario", "node", c.literals[0], c.literals[1], bands).probability;
      }
      double err = std::abs(p - c.reported);
      worst = std::max(worst, err);
      ++cells;
      if (err <= 0.015) ++good;
      else bad += fmt(" %s[M%zu]=%.4f vs %.2f", t.name.c_str(), col, p, c.reported);
    }
  }
  return {cells == 18 && good == 18, fmt("%d/%d cells, max |err| %.4f", good, cells, worst) + bad};
}

Outcome fuzzy_formula() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-100.0, 100.0), w(1e-3, 50.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    double lb = u(rng), ub = lb + w(rng);
    antipattern::ThresholdBand band{lb, ub};
    worst = std::max({worst, std::abs(antipattern::fuzzy_prob(lb, band)),
                      std::abs(antipattern::fuzzy_prob(ub, band) - 1.0),
                      std::abs(antipattern::fuzzy_prob(0.5 * (lb + ub), band) - 0.5)});
  }
  worst = std::max(worst, std::abs(antipattern::fuzzy_prob(0.6, {0.4, 0.8}) - 0.5));
  int violations = 0;
  for (int i = 0; i < 10000; ++i) {
    double lb = u(rng), ub = lb + w(rng);
    double a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    double pa = antipattern::fuzzy_prob(a, {lb, ub}), pb = antipattern::fuzzy_prob(b, {lb, ub});
    if (pa > pb || pa < 0.0 || pb > 1.0) ++violations;
  }
  return {worst <= 1e-12 && violations == 0,
          fmt("boundary/midpoint max err %.2e, %d monotonicity violations in 10000 samples", worst, violations)};
}

Outcome mva_correctness() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(0.05, 4.0);
  double worst = 0.0, worst_little = 0.0;
  for (int i = 0; i < 200; ++i) {
    int k = 1 + static_cast<int>(rng() % 3);
    int n = static_cast<int>(rng() % 5);
    double z = rng() % 3 == 0 ? 0.0 : d(rng);
    qn::QNModel net;
    std::vector<double> demands;
    for (int j = 0; j < k; ++j) {
      demands.push_back(d(rng));
      net.stations.push_back({"s" + std::to_string(j), demands.back()});
    }
    net.population = n;
    net.think_time = z;
    auto r = qn::mva_exact(net);
    auto c = oracle::solve_closed(demands, n, z);
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
    worst = std::max({worst, rel(r.throughput, c.throughput), rel(r.response_time, c.response_time)});
    for (int j = 0; j < k; ++j)
      worst = std::max({worst, rel(r.stations[j].queue_length, c.queue_lengths[j]),
                        rel(r.stations[j].utilization, c.utilizations[j])});
    for (const auto& s : r.steps)
      worst_little = std::max(worst_little, std::abs(s.population - s.throughput * (s.response_time + z)));
  }
  qn::QNModel known{{{"a", 2.0}, {"b", 1.0}}, 2, 0.0};
  auto r = qn::mva_exact(known);
  double known_err = std::max(std::abs(r.throughput - 3.0 / 7.0), std::abs(r.response_time - 14.0 / 3.0));
  return {worst <= 1e-9 && worst_little <= 1e-12 && known_err <= 1e-15,
          fmt("200 cases max rel err %.2e vs CTMC, Little max err %.2e, D=[2,1] N=2: X=%.17g R=%.17g", worst,
              worst_little, r.throughput, r.response_time)};
}

Outcome simulator_fidelity() {
  auto f = fixtures::load_fixture("mm1");
  sim::ServiceMeans means;
  auto base = sim::run_from_json(f.run_config, &means);
  double s = means.at("server/serve");
  auto system = sim::instantiate(f.model, means);
  auto cloned = sim::apply_system_refactoring(system, {refactor::ActionKind::Clone, "server"});

  bool pass = true;
  std::string detail;
  for (double rho : {0.3, 0.5, 0.7}) {
    auto t0 = std::chrono::steady_clock::now();
    auto run = base;
    run.duration_s = 600.0;
    run.arrivals = {{"Request", rho / s}};
    auto out = sim::run(system, run);
    double u = simstats::mean_utilization(out, "server");
    double w = simstats::mean_root_duration(out);
    double expected_w = s / (1.0 - rho);
    auto after = sim::run(cloned, run);
    double u1 = simstats::mean_utilization(after, "server");
    double u2 = simstats::mean_utilization(after, "cloned-server");
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool ok = std::abs(u - rho) <= 0.05 && std::abs(w - expected_w) / expected_w <= 0.10 &&
              std::abs(u1 - rho / 2) <= 0.05 && std::abs(u2 - rho / 2) <= 0.05 && secs < 30.0;
    pass &= ok;
    detail += fmt("%srho=%.1f U=%.3f W=%.2fms (%.2f) replicas %.3f/%.3f %.1fs", detail.empty() ? "" : "; ", rho, u,
                  w * 1e3, expected_w * 1e3, u1, u2, secs);
  }
  return {pass, detail};
}

Outcome loop_direction() {
  auto f = fixtures::load_fixture("eshopper");
  auto state = session::start_session(f.model, f.session_config());
  const auto& target = state.target_scenario();
  double before = state.history.back().measured.scenarios.at(target).resp_time;

  auto occurrences = session::detect(state);
  if (occurrences.empty()) return {false, "no occurrence detected"};
  auto driven = session::best_action(state, occurrences.front());
  if (!driven) return {false, "no improving candidate for the top occurrence"};

  auto a = state;
  session::apply(a, {*driven}, session::Scope::ModelAndSystem);
  double driven_reduction = before - a.history.back().measured.scenarios.at(target).resp_time;

  auto exclude = refactor::enumerate_candidates(state.model, occurrences);
  bool pass = driven_reduction > 0.0;
  std::string detail = fmt("%s median respT %.3fs, %s reduces it by %.3fs", target.c_str(), before,
                           driven->label().c_str(), driven_reduction);
  for (std::uint64_t seed : {1, 2, 3}) {
    auto random = refactor::random_action(state.model, seed, exclude);
    auto b = state;
    session::apply(b, {random}, session::Scope::ModelAndSystem);
    double random_reduction = before - b.history.back().measured.scenarios.at(target).resp_time;
    pass &= random_reduction < driven_reduction;
    detail += fmt("; random %s %.3fs", random.label().c_str(), random_reduction);
  }
  return {pass, detail};
}

Outcome refactoring_structure() {
  auto m = arch::load_model(R"({
    "components": [{"name": "client", "operations": [{"name": "run", "service_demand": 0.01}]},
                   {"name": "uService_A", "operations": [{"name": "operation_1", "service_demand": 0.02},
                                                         {"name": "operation_2", "service_demand": 0.03}]},
                   {"name": "uService_B", "operations": [{"name": "operation_3", "service_demand": 0.01}]}],
    "nodes": [{"name": "n-client", "hosts": ["client"]}, {"name": "n-A", "hosts": ["uService_A"]},
              {"name": "n-B", "hosts": ["uService_B"]}],
    "node_links": [["n-client", "n-A"], ["n-A", "n-B"]],
    "scenarios": [{"name": "S", "workload": {"pattern": "OPEN", "rate": 1.0},
                   "steps": [{"callee": "client", "operation": "run"},
                             {"caller": "client", "callee": "uService_A", "operation": "operation_1"},
                             {"caller": "client", "callee": "uService_A", "operation": "operation_2"},
                             {"caller": "uService_A", "callee": "uService_B", "operation": "operation_3"}]}]
  })");
  std::string problems;
  refactor::RefactoringAction clone{refactor::ActionKind::Clone, "uService_A"};
  auto c = refactor::apply_action(m, clone);
  problems += checks::refactoring_postconditions(m, clone, c);
  if (!c.find_component("cloned-uService_A") || !c.find_node("cloned-container-uService_A")) problems += "clone names; ";
  refactor::RefactoringAction move{refactor::ActionKind::MoveOperation, "uService_A", "operation_2"};
  auto mv = refactor::apply_action(m, move);
  problems += checks::refactoring_postconditions(m, move, mv);
  if (mv.scenarios[0].steps[2].callee != "cloned-uService_A") problems += "move retarget; ";

  std::mt19937_64 rng(99);
  int applied = 0, failures = 0;
  auto model = gen::random_model(rng);
  for (int i = 0; i < 1000; ++i) {
    if (i % 10 == 0) model = gen::random_model(rng);
    auto action = refactor::random_action(model, rng());
    auto next = refactor::apply_action(model, action);
    auto err = checks::refactoring_postconditions(model, action, next);
    if (!err.empty()) {
      if (++failures <= 3) problems += action.label() + ": " + err;
    }
    ++applied;
    model = std::move(next);
  }
  return {problems.empty(), fmt("worked-example clone/move postconditions hold; %d randomized applications, %d failures",
                                applied, failures) +
                                (problems.empty() ? "" : " [" + problems + "]")};
}

Outcome traceability_oracle() {
  int cases = 0, mismatches = 0;
  std::size_t links = 0;
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    auto m = gen::random_model(rng, 6);
    auto spans = gen::random_spans(rng, m, 20);
    auto tm = trace::generate_links(ingest::build_log_model(spans, {}), m);
    auto got = oracle::flatten_links(tm);
    links += got.size();
    if (got != oracle::brute_force_links(spans, m)) ++mismatches;
    ++cases;
  }
  return {mismatches == 0, fmt("%d random cases, %zu link ends compared, %d mismatches", cases, links, mismatches)};
}

Outcome replay_determinism() {
  auto f = fixtures::load_fixture("eshopper");
  auto state = session::start_session(f.model, f.session_config());
  auto result = session::run_batch(state, 0.1, 2);
  auto path = std::filesystem::temp_directory_path() / ("perfloop-replay-" + std::to_string(::getpid()) + ".jsonl");
  session::write_record_file(state, path.string());
  auto file = session::read_record_file(path.string());
  std::filesystem::remove(path);
  auto replayed = session::replay(file);
  bool same = replayed.identical && replayed.state.history.size() == state.history.size();
  for (std::size_t i = 0; same && i < state.history.size(); ++i)
    same = replayed.state.history[i].measured == state.history[i].measured;
  return {same && result.iterations > 0,
          fmt("batch of %d iteration(s), %zu records replayed, %zu mismatches", result.iterations,
              file.records.size(), replayed.mismatches.size())};
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<Criterion> criteria{
      {"table-reproduction", 1.0, table_reproduction},
      {"fuzzy-formula", 1.0, fuzzy_formula},
      {"mva-vs-ctmc", 10.0, mva_correctness},
      {"simulator-fidelity", 90.0, simulator_fidelity},
      {"loop-direction", 120.0, loop_direction},
      {"refactoring-structure", 30.0, refactoring_structure},
      {"traceability-oracle", 30.0, traceability_oracle},
      {"replay-determinism", 120.0, replay_determinism},
  };
  std::string only;
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) only = argv[++i];
    else if (a == "--list") {
      for (const auto& c : criteria) std::cout << c.name << "\n";
      return 0;
    } else {
      std::cerr << "usage: perfloop_acceptance [--only <criterion>] [--list]\n";
      return 2;
    }
  }

  int failed = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && c.name != only) continue;
    ++ran;
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_s) {
      o.pass = false;
      o.detail += fmt(" [over budget %.0fs]", c.budget_s);
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << " (" << fmt("%.2fs", secs) << "): " << o.detail
              << std::endl;
  }
  if (ran == 0) {
    std::cerr << "unknown criterion " << only << "\n";
    return 2;
  }
  return failed == 0 ? 0 : 1;
}
