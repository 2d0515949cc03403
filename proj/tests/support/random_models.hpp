#pragma once

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "perfloop/arch_model.hpp"
#include "perfloop/trace_ingest.hpp"

namespace gen {

inline const std::vector<std::string>& op_pool() {
  static const std::vector<std::string> pool{"get", "put", "list", "find", "home", "sync"};
  return pool;
}

inline std::size_t pick(std::mt19937_64& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }

inline double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// Valid model with up to `max_components` components, one node each, every
// operation carrying a demand.
inline perfloop::arch::ArchModel random_model(std::mt19937_64& rng, int max_components = 6) {
  using namespace perfloop::arch;
  ArchModel m;
  int n = 1 + static_cast<int>(pick(rng, max_components));
  for (int i = 0; i < n; ++i) {
    Component c{"c" + std::to_string(i), {}, std::nullopt};
    auto ops = op_pool();
    std::shuffle(ops.begin(), ops.end(), rng);
    int nops = 1 + static_cast<int>(pick(rng, 3));
    for (int j = 0; j < nops; ++j) c.operations.push_back({ops[j], uniform(rng, 0.001, 0.05)});
    m.components.push_back(c);
    m.nodes.push_back({"n" + std::to_string(i), {c.name}, std::nullopt});
  }
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      if (uniform(rng, 0, 1) < 0.4) m.node_links.push_back(NodeLink::make(m.nodes[a].name, m.nodes[b].name));

  int scenarios = 1 + static_cast<int>(pick(rng, 3));
  for (int s = 0; s < scenarios; ++s) {
    Scenario sc;
    sc.name = "S" + std::to_string(s);
    sc.workload = {WorkloadPattern::Open, uniform(rng, 0.5, 5.0), 0.0, 0.0};
    int steps = 1 + static_cast<int>(pick(rng, 5));
    for (int i = 0; i < steps; ++i) {
      const auto& callee = m.components[pick(rng, m.components.size())];
      Step st;
      st.callee = callee.name;
      st.operation = callee.operations[pick(rng, callee.operations.size())].name;
      if (i > 0) {
        st.caller = sc.steps[pick(rng, sc.steps.size())].callee;
        st.exec_probability = uniform(rng, 0, 1) < 0.25 ? 0.5 : 1.0;
      }
      sc.steps.push_back(st);
    }
    m.scenarios.push_back(sc);
  }
  return m;
}

// Up to `max_spans` spans over a few traces, each a tree with one root.
// Names mix bare operation names, prefixed URLs and names no model uses.
inline std::vector<perfloop::ingest::SpanRecord> random_spans(std::mt19937_64& rng,
                                                              const perfloop::arch::ArchModel& m,
                                                              int max_spans = 20) {
  using perfloop::ingest::SpanKind;
  using perfloop::ingest::SpanRecord;
  std::vector<std::string> services;
  for (const auto& c : m.components) services.push_back(c.name);
  services.push_back("ghost");
  auto names = op_pool();
  names.push_back("unknown");

  std::vector<SpanRecord> out;
  int total = static_cast<int>(pick(rng, max_spans + 1));
  int trace_no = 0;
  while (static_cast<int>(out.size()) < total) {
    int size = 1 + static_cast<int>(pick(rng, std::min(6, total - static_cast<int>(out.size()))));
    std::string tid = "t" + std::to_string(trace_no++);
    std::int64_t ts = 1000;
    for (int i = 0; i < size; ++i) {
      SpanRecord s;
      s.trace_id = tid;
      s.span_id = "s" + std::to_string(i);
      if (i > 0) s.parent_id = "s" + std::to_string(pick(rng, i));
      s.service_name = services[pick(rng, services.size())];
      auto name = names[pick(rng, names.size())];
      s.name = uniform(rng, 0, 1) < 0.5 ? name : "http://" + s.service_name + "/" + name;
      s.kind = uniform(rng, 0, 1) < 0.7 ? SpanKind::Server : SpanKind::Client;
      s.timestamp = ts;
      s.duration = 100;
      ts += 10;
      out.push_back(s);
    }
  }
  return out;
}

}  // namespace gen
