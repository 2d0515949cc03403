#include "perfloop/qn_mva.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "perfloop/error.hpp"

namespace perfloop::qn {

using nlohmann::json;

void QNModel::validate() const {
  if (stations.empty()) throw ValidationError("queueing network needs at least one station");
  for (const auto& s : stations)
    if (!(s.demand >= 0.0)) throw ValidationError("station " + s.name + ": demand must be >= 0");
  if (population < 0) throw ValidationError("queueing network population must be >= 0");
  if (!(think_time >= 0.0)) throw ValidationError("queueing network think time must be >= 0");
}

MVAResult mva_exact(const QNModel& qn) {
  qn.validate();
  const auto k = qn.stations.size();
  MVAResult result;
  std::vector<double> queue(k, 0.0), residence(k, 0.0);
  double x = 0.0, r = 0.0;

  for (int n = 1; n <= qn.population; ++n) {
    for (std::size_t i = 0; i < k; ++i) residence[i] = qn.stations[i].demand * (1.0 + queue[i]);
    r = std::accumulate(residence.begin(), residence.end(), 0.0);
    if (r + qn.think_time <= 0.0)
      throw ValidationError("queueing network has zero total demand and zero think time");
    x = static_cast<double>(n) / (qn.think_time + r);
    for (std::size_t i = 0; i < k; ++i) queue[i] = x * residence[i];
    result.steps.push_back({n, x, r, residence, queue});
  }

  result.throughput = x;
  result.response_time = r;
  for (std::size_t i = 0; i < k; ++i) {
    const auto& s = qn.stations[i];
    result.stations.push_back({s.name, s.demand, qn.population > 0 ? residence[i] : 0.0,
                               qn.population > 0 ? queue[i] : 0.0, x * s.demand});
  }
  return result;
}

namespace {

std::vector<std::string> replicas(const arch::ArchModel& model, const arch::OperationRef& target) {
  auto root_is = [&](const arch::Component& c) {
    const arch::Component* cur = &c;
    for (std::size_t guard = 0; cur && guard <= model.components.size(); ++guard) {
      if (cur->name == target.component) return true;
      cur = cur->clone_of ? model.find_component(*cur->clone_of) : nullptr;
    }
    return false;
  };
  std::vector<std::string> out;
  for (const auto& c : model.components)
    if (root_is(c) && c.find_operation(target.operation)) out.push_back(c.name);
  return out;
}

}  // namespace

std::map<std::string, double> scenario_demands(const arch::ArchModel& model, std::string_view name) {
  const auto* scenario = model.find_scenario(name);
  if (!scenario) throw NotFoundError("unknown scenario " + std::string(name));
  std::map<std::string, double> demands;
  for (const auto& n : model.nodes) demands[n.name] = 0.0;
  for (std::size_t i = 0; i < scenario->steps.size(); ++i) {
    auto target = scenario->steps[i].target();
    const auto* op = model.find_operation(target);
    if (!op || !op->service_demand)
      throw ValidationError("operation " + target.str() + " has no service_demand annotation");
    auto hosts = replicas(model, target);
    double share = path_probability(*scenario, i) * *op->service_demand / static_cast<double>(hosts.size());
    for (const auto& h : hosts) demands[model.node_of(h)->name] += share;
  }
  return demands;
}

QNModel build_qn(const arch::ArchModel& model, const std::vector<MixEntry>& mix) {
  if (mix.empty()) throw ValidationError("build_qn: empty scenario mix");
  double total = 0.0;
  for (const auto& m : mix) {
    if (!(m.weight >= 0.0)) throw ValidationError("build_qn: negative weight for " + m.scenario);
    total += m.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("build_qn: mix weights must sum to 1");

  QNModel qn;
  for (const auto& n : model.nodes) qn.stations.push_back({n.name, 0.0});
  for (const auto& m : mix) {
    auto d = scenario_demands(model, m.scenario);
    for (auto& s : qn.stations) s.demand += m.weight * d[s.name];
  }
  return qn;
}

namespace {

// Smallest think time at which the closed network's throughput drops to
// the target rate. Zero when even Z = 0 cannot reach it.
double fit_think_time(QNModel qn, double rate) {
  qn.think_time = 0.0;
  if (mva_exact(qn).throughput <= rate) return 0.0;
  double lo = 0.0, hi = static_cast<double>(qn.population) / rate;
  for (int i = 0; i < 200 && hi - lo > 1e-12 * std::max(1.0, hi); ++i) {
    double mid = 0.5 * (lo + hi);
    qn.think_time = mid;
    (mva_exact(qn).throughput > rate ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

Prediction predict_all(const arch::ArchModel& model) {
  Prediction out;
  if (model.scenarios.empty()) throw ValidationError("model has no scenarios to predict");

  struct Class {
    const arch::Scenario* scenario;
    std::map<std::string, double> demands;
    double rate = 0.0;
  };
  std::vector<Class> classes;
  bool any_open = false;
  for (const auto& s : model.scenarios) {
    Class c{&s, scenario_demands(model, s.name)};
    if (s.workload.pattern == arch::WorkloadPattern::Open) {
      c.rate = s.workload.rate;
      any_open = true;
    } else {
      double base = s.resp_time.value_or(std::accumulate(
          c.demands.begin(), c.demands.end(), 0.0, [](double a, const auto& kv) { return a + kv.second; }));
      double cycle = s.workload.think_time + base;
      c.rate = cycle > 0.0 ? s.workload.population / cycle : 0.0;
    }
    classes.push_back(std::move(c));
  }
  double total_rate = 0.0;
  for (const auto& c : classes) total_rate += c.rate;

  for (const auto& n : model.nodes) out.network.stations.push_back({n.name, 0.0});
  if (total_rate > 0.0) {
    for (const auto& c : classes)
      for (auto& st : out.network.stations) st.demand += c.rate / total_rate * c.demands.at(st.name);
  }

  // Open-network residence estimate, used when a scenario is not annotated.
  auto open_estimate = [&](const Class& c) {
    double r = 0.0;
    for (const auto& st : out.network.stations) {
      double u = total_rate * st.demand;
      double d = c.demands.at(st.name);
      if (d > 0.0) r += u < 1.0 ? d / (1.0 - u) : d * 1e3;
    }
    return r;
  };

  double population = 0.0, closed_population = 0.0, closed_think = 0.0;
  for (const auto& c : classes) {
    const auto& w = c.scenario->workload;
    if (w.pattern == arch::WorkloadPattern::Open) {
      population += c.rate * c.scenario->resp_time.value_or(open_estimate(c));
    } else {
      population += w.population;
      closed_population += w.population;
      closed_think += w.population * w.think_time;
    }
  }
  out.network.population = std::max(1, static_cast<int>(std::lround(population)));

  double total_demand = 0.0;
  for (const auto& st : out.network.stations) total_demand += st.demand;
  if (total_rate <= 0.0 || total_demand <= 0.0) {
    for (const auto& c : classes) out.scenarios[c.scenario->name] = {0.0, c.rate};
    for (const auto& st : out.network.stations) out.node_utilization[st.name] = 0.0;
    out.network.population = 0;
    out.solution = mva_exact(out.network);
    return out;
  }

  if (any_open) {
    out.network.think_time = fit_think_time(out.network, total_rate);
  } else {
    out.network.population = static_cast<int>(std::lround(closed_population));
    out.network.think_time = closed_population > 0.0 ? closed_think / closed_population : 0.0;
  }
  out.solution = mva_exact(out.network);

  // Arrival theorem: a tagged request sees the queues of population N-1.
  std::vector<double> seen(out.network.stations.size(), 0.0);
  if (out.solution.steps.size() >= 2) seen = out.solution.steps[out.solution.steps.size() - 2].queue_lengths;
  for (const auto& c : classes) {
    double r = 0.0;
    for (std::size_t k = 0; k < out.network.stations.size(); ++k)
      r += c.demands.at(out.network.stations[k].name) * (1.0 + seen[k]);
    out.scenarios[c.scenario->name] = {r, out.solution.throughput * c.rate / total_rate};
  }
  for (const auto& st : out.solution.stations) out.node_utilization[st.name] = st.utilization;
  return out;
}

WorkloadPrediction predict_for_workload(const arch::ArchModel& model, std::string_view scenario) {
  if (!model.find_scenario(scenario)) throw NotFoundError("unknown scenario " + std::string(scenario));
  auto all = predict_all(model);
  const auto& s = all.scenarios.at(std::string(scenario));
  return {s.resp_time, s.throughput, all.node_utilization};
}

json to_json(const MVAResult& r) {
  json stations = json::array();
  for (const auto& s : r.stations)
    stations.push_back({{"station", s.name}, {"D", s.demand}, {"R", s.residence_time}, {"Q", s.queue_length}, {"U", s.utilization}});
  return {{"X", r.throughput}, {"R", r.response_time}, {"stations", stations}};
}

json to_json(const Prediction& p) {
  json scenarios = json::array();
  for (const auto& [name, s] : p.scenarios) scenarios.push_back({{"scenario", name}, {"respT", s.resp_time}, {"X", s.throughput}});
  json nodes = json::array();
  for (const auto& [name, u] : p.node_utilization) nodes.push_back({{"node", name}, {"U", u}});
  return {{"scenarios", scenarios},
          {"nodes", nodes},
          {"population", p.network.population},
          {"think_time", p.network.think_time},
          {"mva", to_json(p.solution)}};
}

std::string mva_table(const MVAResult& r) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-32s %10s %12s %10s %8s\n", "station", "D[s]", "R_k[s]", "Q_k", "U_k");
  out += line;
  for (const auto& s : r.stations) {
    std::snprintf(line, sizeof line, "%-32s %10.6f %12.6f %10.4f %8.4f\n", s.name.c_str(), s.demand, s.residence_time,
                  s.queue_length, s.utilization);
    out += line;
  }
  std::snprintf(line, sizeof line, "X = %.6f /s   R = %.6f s\n", r.throughput, r.response_time);
  out += line;
  return out;
}

}  // namespace perfloop::qn
