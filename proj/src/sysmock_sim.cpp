#include "perfloop/sysmock_sim.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <deque>
#include <queue>
#include <random>
#include <set>

#include "perfloop/error.hpp"

namespace perfloop::sim {

using nlohmann::json;

const Instance* SimSystem::find_instance(std::string_view name) const {
  for (const auto& i : instances)
    if (i.name == name) return &i;
  return nullptr;
}

const SimScenario* SimSystem::find_scenario(std::string_view name) const {
  for (const auto& s : scenarios)
    if (s.name == name) return &s;
  return nullptr;
}

namespace {

std::vector<std::string> replica_set(const arch::ArchModel& model, const arch::OperationRef& target) {
  auto descends = [&](const arch::Component& c) {
    const arch::Component* cur = &c;
    for (std::size_t guard = 0; cur && guard <= model.components.size(); ++guard) {
      if (cur->name == target.component) return true;
      cur = cur->clone_of ? model.find_component(*cur->clone_of) : nullptr;
    }
    return false;
  };
  std::vector<std::string> out;
  for (const auto& c : model.components)
    if (descends(c) && c.find_operation(target.operation)) out.push_back(c.name);
  return out;
}

std::size_t instance_index(const SimSystem& sys, std::string_view name) {
  for (std::size_t i = 0; i < sys.instances.size(); ++i)
    if (sys.instances[i].name == name) return i;
  throw NotFoundError("simulator: unknown instance " + std::string(name));
}

}  // namespace

SimSystem instantiate(const arch::ArchModel& model, const ServiceMeans& means) {
  model.validate();
  SimSystem sys;
  for (const auto& n : model.nodes) sys.nodes.push_back(n.name);
  for (const auto& c : model.components) {
    Instance inst{c.name, model.node_of(c.name)->name, {}};
    for (const auto& op : c.operations) inst.operations.push_back(op.name);
    sys.instances.push_back(std::move(inst));
  }

  for (const auto& s : model.scenarios) {
    SimScenario sc{s.name, {}, {}, arch::call_parents(s)};
    for (const auto& st : s.steps) {
      auto key = st.target();
      sc.steps.push_back(key);
      sc.exec_probability.push_back(st.exec_probability);
      if (sys.routes.contains(key)) continue;

      Route route;
      route.primary = key.component;
      for (const auto& name : replica_set(model, key)) route.instances.push_back(instance_index(sys, name));
      if (route.instances.empty()) throw ValidationError("simulator: no instance serves " + key.str());
      sys.routes.emplace(key, std::move(route));

      double mean_s = 0.0;
      if (auto it = means.find(key.str()); it != means.end()) {
        mean_s = it->second;
      } else if (auto it2 = means.find(key.operation); it2 != means.end()) {
        mean_s = it2->second;
      } else if (const auto* op = model.find_operation(key); op && op->service_demand) {
        mean_s = *op->service_demand;
      } else {
        throw ValidationError("simulator: no mean service time for " + key.str());
      }
      if (!(mean_s >= 0.0)) throw RangeError("simulator: negative mean service time for " + key.str());
      sys.mean_service_ms[key] = mean_s * 1000.0;
    }
    sys.scenarios.push_back(std::move(sc));
  }
  return sys;
}

SimSystem apply_system_refactoring(const SimSystem& system, const refactor::RefactoringAction& action) {
  SimSystem out = system;
  std::size_t src = instance_index(out, action.component);
  std::set<std::string> names(out.nodes.begin(), out.nodes.end()), instances;
  for (const auto& i : out.instances) instances.insert(i.name);
  auto [name, node] = refactor::replica_names(action.component, instances, names);
  std::size_t added = out.instances.size();

  if (action.kind == refactor::ActionKind::Clone) {
    out.instances.push_back({name, node, out.instances[src].operations});
    for (auto& [key, route] : out.routes)
      if (std::find(route.instances.begin(), route.instances.end(), src) != route.instances.end())
        route.instances.push_back(added);
  } else {
    auto& ops = out.instances[src].operations;
    auto it = std::find(ops.begin(), ops.end(), action.operation);
    if (it == ops.end())
      throw NotFoundError("simulator: " + action.component + " does not serve " + action.operation);
    if (ops.size() < 2) throw ValidationError("simulator: " + action.component + " has a single operation");
    ops.erase(it);
    out.instances.push_back({name, node, {action.operation}});
    for (auto& [key, route] : out.routes) {
      if (key.operation != action.operation) continue;
      if (route.primary == action.component) {
        route.primary = name;
        route.instances = {added};
        route.cursor = 0;
      } else {
        std::erase(route.instances, src);
        if (route.cursor >= route.instances.size()) route.cursor = 0;
      }
    }
  }
  out.nodes.push_back(node);
  ++out.generation;
  return out;
}

void SimRun::validate() const {
  if (!(duration_s > 0.0)) throw RangeError("run: duration_s must be > 0");
  if (!(warmup_s >= 0.0) || !(warmup_s < duration_s)) throw RangeError("run: warmup_s must be in [0, duration_s)");
  if (!(sample_window_s > 0.0)) throw RangeError("run: sample_window_s must be > 0");
  for (const auto& a : arrivals) {
    if (!(a.rate_per_s >= 0.0)) throw RangeError("run: negative arrival rate for " + a.scenario);
    if (a.population < 0 || !(a.think_s >= 0.0)) throw RangeError("run: invalid closed source for " + a.scenario);
  }
  for (const auto& a : actions)
    if (!(a.at_s >= 0.0)) throw RangeError("run: action time must be >= 0");
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
double exponential(std::mt19937_64& rng, double mean) { return -mean * std::log1p(-uniform(rng)); }

std::string hex_id(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

enum class EventType { Arrival, Done, Action };

struct Event {
  double time;
  std::uint64_t seq;
  EventType type;
  std::size_t index;

  bool operator>(const Event& o) const { return time != o.time ? time > o.time : seq > o.seq; }
};

struct Call {
  std::size_t trace;
  std::size_t step;
  int parent;  // call index, -1 for the root
  std::size_t instance;
  std::size_t next_child = 0;
  double start = 0.0;
  double end = 0.0;
  std::uint64_t span;
};

struct TraceState {
  std::size_t stream;
  std::size_t scenario;
  double arrival;
  std::uint64_t id;
  std::vector<std::size_t> calls;
};

struct Server {
  std::deque<std::size_t> queue;
  bool busy = false;
  std::size_t current = 0;
  double service_start = 0.0;
};

class Engine {
 public:
  Engine(const SimSystem& sys, const SimRun& cfg) : sys_(sys), cfg_(cfg) {
    end_ = cfg.duration_s * 1000.0;
    warmup_ = cfg.warmup_s * 1000.0;
    window_ = cfg.sample_window_s * 1000.0;
    windows_ = static_cast<std::size_t>(std::ceil((end_ - warmup_) / window_ - 1e-9));
    windows_ = std::max<std::size_t>(windows_, 1);
    service_rng_.seed(splitmix(cfg.seed ^ 0x5e41ceULL));
    branch_rng_.seed(splitmix(cfg.seed ^ 0xb7a9c4ULL));
    for (const auto& sc : sys_.scenarios) {
      std::vector<std::vector<std::size_t>> kids(sc.steps.size());
      for (std::size_t j = 0; j < sc.steps.size(); ++j)
        if (sc.parent[j] >= 0) kids[static_cast<std::size_t>(sc.parent[j])].push_back(j);
      children_.push_back(std::move(kids));
    }
    grow();
  }

  SimOutput run() {
    for (std::size_t a = 0; a < cfg_.arrivals.size(); ++a) {
      const auto& stream = cfg_.arrivals[a];
      std::size_t sc = scenario_index(stream.scenario);
      stream_scenario_.push_back(sc);
      arrival_rng_.emplace_back(splitmix(cfg_.seed + 0x100 * (a + 1)));
      if (sys_.scenarios[sc].steps.empty()) continue;
      if (stream.population > 0) {
        for (int c = 0; c < stream.population; ++c) schedule_arrival(a, 0.0);
      } else if (stream.rate_per_s > 0.0) {
        schedule_arrival(a, 0.0);
      }
    }
    for (std::size_t i = 0; i < cfg_.actions.size(); ++i)
      push(cfg_.actions[i].at_s * 1000.0, EventType::Action, i);

    while (!events_.empty() && events_.top().time <= end_) {
      Event e = events_.top();
      events_.pop();
      now_ = e.time;
      switch (e.type) {
        case EventType::Arrival: on_arrival(e.index); break;
        case EventType::Done: on_done(e.index); break;
        case EventType::Action:
          sys_ = apply_system_refactoring(sys_, cfg_.actions[e.index].action);
          grow();
          break;
      }
    }
    for (std::size_t i = 0; i < servers_.size(); ++i)
      if (servers_[i].busy) add_busy(i, servers_[i].service_start, end_);

    out_.stats.incomplete = out_.stats.arrivals - out_.stats.completed - out_.stats.warmup;
    for (std::size_t i = 0; i < sys_.instances.size(); ++i) {
      for (std::size_t w = 0; w < windows_; ++w) {
        double lo = warmup_ + static_cast<double>(w) * window_;
        double hi = std::min(end_, lo + window_);
        out_.utilization.push_back({sys_.instances[i].name, std::llround(lo * 1000.0), std::llround(hi * 1000.0),
                                    busy_[i][w] / (hi - lo)});
      }
    }
    out_.final_system = sys_;
    return std::move(out_);
  }

 private:
  std::size_t scenario_index(const std::string& name) const {
    for (std::size_t i = 0; i < sys_.scenarios.size(); ++i)
      if (sys_.scenarios[i].name == name) return i;
    throw NotFoundError("run: unknown scenario " + name);
  }

  void grow() {
    servers_.resize(sys_.instances.size());
    busy_.resize(sys_.instances.size(), std::vector<double>(windows_, 0.0));
  }

  void push(double t, EventType type, std::size_t index) { events_.push({t, seq_++, type, index}); }

  bool closed(std::size_t stream) const { return cfg_.arrivals[stream].population > 0; }

  void schedule_arrival(std::size_t stream, double from) {
    const auto& s = cfg_.arrivals[stream];
    double gap = closed(stream) ? (s.think_s > 0.0 ? exponential(arrival_rng_[stream], s.think_s * 1000.0) : 0.0)
                                : exponential(arrival_rng_[stream], 1000.0 / s.rate_per_s);
    if (from + gap < end_) push(from + gap, EventType::Arrival, stream);
  }

  void on_arrival(std::size_t stream) {
    ++out_.stats.arrivals;
    traces_.push_back({stream, stream_scenario_[stream], now_, cfg_.id_base + ++trace_counter_, {}});
    start_call(traces_.size() - 1, 0, -1);
    if (!closed(stream)) schedule_arrival(stream, now_);
  }

  void start_call(std::size_t trace, std::size_t step, int parent) {
    const auto& key = sys_.scenarios[traces_[trace].scenario].steps[step];
    auto& route = sys_.routes.at(key);
    std::size_t inst = route.instances[route.cursor];
    route.cursor = (route.cursor + 1) % route.instances.size();
    calls_.push_back({trace, step, parent, inst, 0, now_, 0.0, cfg_.id_base + ++span_counter_});
    std::size_t id = calls_.size() - 1;
    traces_[trace].calls.push_back(id);
    auto& server = servers_[inst];
    if (server.busy) server.queue.push_back(id);
    else begin_service(inst, id);
  }

  void begin_service(std::size_t inst, std::size_t call) {
    auto& server = servers_[inst];
    server.busy = true;
    server.current = call;
    server.service_start = now_;
    const auto& c = calls_[call];
    const auto& key = sys_.scenarios[traces_[c.trace].scenario].steps[c.step];
    push(now_ + exponential(service_rng_, sys_.mean_service_ms.at(key)), EventType::Done, inst);
  }

  void on_done(std::size_t inst) {
    auto& server = servers_[inst];
    std::size_t call = server.current;
    add_busy(inst, server.service_start, now_);
    server.busy = false;
    if (!server.queue.empty()) {
      std::size_t next = server.queue.front();
      server.queue.pop_front();
      begin_service(inst, next);
    }
    advance(call);
  }

  // Runs the next executing child of `call`, or completes it.
  void advance(std::size_t call) {
    for (;;) {
      auto& c = calls_[call];
      const auto& sc = sys_.scenarios[traces_[c.trace].scenario];
      const auto& kids = children_[traces_[c.trace].scenario][c.step];
      while (c.next_child < kids.size()) {
        std::size_t j = kids[c.next_child++];
        double p = sc.exec_probability[j];
        if (p >= 1.0 || uniform(branch_rng_) < p) {
          start_call(c.trace, j, static_cast<int>(call));
          return;
        }
      }
      c.end = now_;
      if (c.parent < 0) {
        finish_trace(c.trace);
        return;
      }
      call = static_cast<std::size_t>(c.parent);
    }
  }

  void finish_trace(std::size_t t) {
    const auto& tr = traces_[t];
    if (closed(tr.stream)) schedule_arrival(tr.stream, now_);
    if (tr.arrival < warmup_) {
      ++out_.stats.warmup;
      return;
    }
    ++out_.stats.completed;
    const auto& sc = sys_.scenarios[tr.scenario];
    auto trace_id = hex_id(tr.id);
    for (std::size_t id : tr.calls) {
      const auto& c = calls_[id];
      std::int64_t start = std::llround(c.start * 1000.0);
      std::int64_t stop = std::llround(c.end * 1000.0);
      ingest::SpanRecord span;
      span.trace_id = trace_id;
      span.span_id = hex_id(c.span);
      if (c.parent >= 0) span.parent_id = hex_id(calls_[static_cast<std::size_t>(c.parent)].span);
      span.name = "http://" + sys_.instances[c.instance].name + "/" + sc.steps[c.step].operation;
      span.timestamp = start;
      span.duration = stop - start;
      span.kind = ingest::SpanKind::Server;
      span.service_name = sys_.instances[c.instance].name;
      out_.spans.push_back(std::move(span));
    }
  }

  void add_busy(std::size_t inst, double from, double to) {
    from = std::max(from, warmup_);
    to = std::min(to, end_);
    if (to <= from) return;
    auto w = static_cast<std::size_t>((from - warmup_) / window_);
    for (; w < windows_; ++w) {
      double lo = warmup_ + static_cast<double>(w) * window_;
      double hi = std::min(end_, lo + window_);
      if (lo >= to) break;
      double overlap = std::min(hi, to) - std::max(lo, from);
      if (overlap > 0.0) busy_[inst][w] += overlap;
    }
  }

  SimSystem sys_;
  const SimRun& cfg_;
  double end_, warmup_, window_, now_ = 0.0;
  std::size_t windows_;
  std::mt19937_64 service_rng_, branch_rng_;
  std::vector<std::mt19937_64> arrival_rng_;
  std::vector<std::size_t> stream_scenario_;
  std::vector<std::vector<std::vector<std::size_t>>> children_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  std::uint64_t seq_ = 0, trace_counter_ = 0, span_counter_ = 0;
  std::vector<Call> calls_;
  std::vector<TraceState> traces_;
  std::vector<Server> servers_;
  std::vector<std::vector<double>> busy_;
  SimOutput out_;
};

}  // namespace

SimOutput run(const SimSystem& system, const SimRun& config) {
  config.validate();
  Engine engine(system, config);
  return engine.run();
}

SimRun run_from_json(const json& doc, ServiceMeans* means) {
  if (!doc.is_object()) throw ParseError("run config must be a JSON object");
  SimRun run;
  try {
    run.seed = doc.value("seed", std::uint64_t{1});
    run.duration_s = doc.value("duration_s", run.duration_s);
    run.warmup_s = doc.value("warmup_s", run.warmup_s);
    run.sample_window_s = doc.value("sample_window_s", run.sample_window_s);
    for (const auto& a : doc.value("arrivals", json::array()))
      run.arrivals.push_back({a.at("scenario").get<std::string>(), a.value("rate_per_s", 0.0),
                              a.value("population", 0), a.value("think_s", 0.0)});
    for (const auto& a : doc.value("actions", json::array()))
      run.actions.push_back({a.at("at_s").get<double>(), refactor::action_from_json(a.at("action"))});
    run.id_base = doc.value("id_base", std::uint64_t{0});
    if (auto it = doc.find("service_means"); means && it != doc.end())
      for (const auto& [k, v] : it->items()) (*means)[k] = v.get<double>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("run config: ") + e.what());
  }
  run.validate();
  return run;
}

json to_json(const SimRun& run) {
  json arrivals = json::array();
  for (const auto& a : run.arrivals) {
    json stream = {{"scenario", a.scenario}, {"rate_per_s", a.rate_per_s}};
    if (a.population > 0) {
      stream["population"] = a.population;
      stream["think_s"] = a.think_s;
    }
    arrivals.push_back(stream);
  }
  json doc = {{"seed", run.seed},
              {"duration_s", run.duration_s},
              {"warmup_s", run.warmup_s},
              {"sample_window_s", run.sample_window_s},
              {"arrivals", arrivals}};
  if (!run.actions.empty()) {
    json actions = json::array();
    for (const auto& a : run.actions) actions.push_back({{"at_s", a.at_s}, {"action", refactor::to_json(a.action)}});
    doc["actions"] = actions;
  }
  if (run.id_base != 0) doc["id_base"] = run.id_base;
  return doc;
}

json to_json(const SimStats& s) {
  return {{"arrivals", s.arrivals},
          {"completed", s.completed},
          {"warmup", s.warmup},
          {"incomplete", s.incomplete},
          {"errors", s.errors}};
}

json to_json(const SimSystem& sys) {
  json instances = json::array();
  for (const auto& i : sys.instances)
    instances.push_back({{"name", i.name}, {"node", i.node}, {"operations", i.operations}});
  json routes = json::array();
  for (const auto& [key, r] : sys.routes) {
    json names = json::array();
    for (auto i : r.instances) names.push_back(sys.instances[i].name);
    routes.push_back({{"operation", key.str()}, {"instances", names}, {"cursor", r.cursor}});
  }
  return {{"generation", sys.generation}, {"instances", instances}, {"routes", routes}};
}

}  // namespace perfloop::sim
