#include "perfloop/antipattern.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "perfloop/error.hpp"

namespace perfloop::antipattern {

using nlohmann::json;

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::NumClientConnects: return "numClientConnects";
    case Metric::NumMsgs: return "numMsgs";
    case Metric::MaxHwUtil: return "maxHwUtil";
    case Metric::ResDemand: return "resDemand";
  }
  return "unknown";
}

std::string_view to_string(Kind kind) { return kind == Kind::Blob ? "BLOB" : "PAF"; }

Metric metric_from_string(std::string_view text) {
  for (auto m : {Metric::NumClientConnects, Metric::NumMsgs, Metric::MaxHwUtil, Metric::ResDemand})
    if (to_string(m) == text) return m;
  throw ParseError("unknown metric '" + std::string(text) + "'");
}

const ThresholdBand& Bands::at(Metric m) const {
  auto it = bands.find(m);
  if (it == bands.end()) throw ValidationError("no threshold band for " + std::string(to_string(m)));
  return it->second;
}

double fuzzy_prob(double value, const ThresholdBand& band) {
  if (!(band.upper > band.lower)) throw ValidationError("threshold band needs UB > LB");
  double p = 1.0 - (band.upper - value) / (band.upper - band.lower);
  return std::clamp(p, 0.0, 1.0);
}

namespace {

bool involved(const arch::Scenario& s, std::string_view component) {
  return std::any_of(s.steps.begin(), s.steps.end(), [&](const arch::Step& st) {
    return st.callee == component || (st.caller && *st.caller == component);
  });
}

double node_utilization(const arch::ArchModel& model, std::string_view component, std::string* node_name = nullptr) {
  const auto* node = model.node_of(component);
  if (!node) throw ValidationError("component " + std::string(component) + " is not deployed");
  if (!node->utilization) throw ValidationError("node " + node->name + " has no utilization annotation");
  if (node_name) *node_name = node->name;
  return *node->utilization;
}

double num_client_connects(const arch::ArchModel& model, std::string_view component) {
  std::set<std::string> callers;
  for (const auto& s : model.scenarios)
    for (const auto& st : s.steps)
      if (st.callee == component && st.caller && *st.caller != component) callers.insert(*st.caller);
  return static_cast<double>(callers.size());
}

}  // namespace

ComponentMetrics metrics_for_component(const arch::ArchModel& model, std::string_view component,
                                       std::string_view scenario) {
  if (!model.find_component(component)) throw NotFoundError("unknown component " + std::string(component));
  const auto* s = model.find_scenario(scenario);
  if (!s) throw NotFoundError("unknown scenario " + std::string(scenario));

  ComponentMetrics m;
  m.num_client_connects = num_client_connects(model, component);
  std::map<std::string, double> msgs;
  for (const auto& st : s->steps) {
    if (!st.caller || *st.caller == st.callee) continue;
    if (st.callee == component) msgs[*st.caller] += 1.0;
    else if (*st.caller == component) msgs[st.callee] += 1.0;
  }
  if (msgs.empty()) return m;

  std::string own_node;
  double own = node_utilization(model, component, &own_node);
  for (const auto& [partner, count] : msgs) {
    std::string partner_node;
    double other = node_utilization(model, partner, &partner_node);
    PartnerMetrics p{partner, count, own_node, own};
    if (other > own) {
      p.busiest_node = partner_node;
      p.max_hw_util = other;
    }
    m.partners.push_back(std::move(p));
  }
  return m;
}

Occurrence evaluate_blob(std::string component, std::string scenario, const ComponentMetrics& metrics,
                         const Bands& bands) {
  Occurrence occ{Kind::Blob, component, std::move(scenario), {}, 0.0};
  double p_conn = fuzzy_prob(metrics.num_client_connects, bands.at(Metric::NumClientConnects));
  const PartnerMetrics* best = nullptr;
  double best_p = -1.0, best_msgs = 0.0, best_util = 0.0;
  for (const auto& p : metrics.partners) {
    double pm = fuzzy_prob(p.num_msgs, bands.at(Metric::NumMsgs));
    double pu = fuzzy_prob(p.max_hw_util, bands.at(Metric::MaxHwUtil));
    if (pm * pu > best_p) {
      best = &p;
      best_p = pm * pu;
      best_msgs = pm;
      best_util = pu;
    }
  }
  occ.literals.push_back({Metric::NumClientConnects, component, metrics.num_client_connects, p_conn});
  if (best) {
    occ.literals.push_back({Metric::NumMsgs, component + "," + best->partner, best->num_msgs, best_msgs});
    occ.literals.push_back({Metric::MaxHwUtil, best->busiest_node, best->max_hw_util, best_util});
  } else {
    occ.literals.push_back({Metric::NumMsgs, component, 0.0, 0.0});
    occ.literals.push_back({Metric::MaxHwUtil, component, 0.0, 0.0});
  }
  occ.probability = occ.literals[0].probability * occ.literals[1].probability * occ.literals[2].probability;
  return occ;
}

Occurrence evaluate_paf(std::string operation, std::string scenario, std::string node, double demand,
                        double utilization, const Bands& bands) {
  Occurrence occ{Kind::PipeAndFilter, operation, std::move(scenario), {}, 0.0};
  occ.literals.push_back({Metric::ResDemand, operation, demand, fuzzy_prob(demand, bands.at(Metric::ResDemand))});
  occ.literals.push_back({Metric::MaxHwUtil, std::move(node), utilization,
                          fuzzy_prob(utilization, bands.at(Metric::MaxHwUtil))});
  occ.probability = occ.literals[0].probability * occ.literals[1].probability;
  return occ;
}

void canonical_sort(std::vector<Occurrence>& occ) {
  std::sort(occ.begin(), occ.end(), [](const Occurrence& a, const Occurrence& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    return std::tie(a.target, a.kind, a.scenario) < std::tie(b.target, b.kind, b.scenario);
  });
}

std::vector<Occurrence> detect_blob(const arch::ArchModel& model, const Bands& bands, std::string_view scenario,
                                    const DetectOptions& options) {
  const auto* s = model.find_scenario(scenario);
  if (!s) throw NotFoundError("unknown scenario " + std::string(scenario));
  std::vector<Occurrence> out;
  for (const auto& c : model.components) {
    if (!involved(*s, c.name)) continue;
    auto metrics = metrics_for_component(model, c.name, scenario);
    if (metrics.partners.empty()) continue;
    auto occ = evaluate_blob(c.name, s->name, metrics, bands);
    if (occ.probability >= options.report_floor) out.push_back(std::move(occ));
  }
  canonical_sort(out);
  return out;
}

std::vector<Occurrence> detect_paf(const arch::ArchModel& model, const Bands& bands, std::string_view scenario,
                                   const DetectOptions& options) {
  const auto* s = model.find_scenario(scenario);
  if (!s) throw NotFoundError("unknown scenario " + std::string(scenario));
  std::set<arch::OperationRef> certain;
  for (std::size_t i = 0; i < s->steps.size(); ++i)
    if (arch::path_probability(*s, i) == 1.0) certain.insert(s->steps[i].target());

  std::vector<Occurrence> out;
  for (const auto& ref : certain) {
    const auto* op = model.find_operation(ref);
    if (!op->service_demand) throw ValidationError("operation " + ref.str() + " has no service_demand annotation");
    std::string node;
    double u = node_utilization(model, ref.component, &node);
    auto occ = evaluate_paf(ref.str(), s->name, node, *op->service_demand, u, bands);
    if (occ.probability >= options.report_floor) out.push_back(std::move(occ));
  }
  canonical_sort(out);
  return out;
}

std::vector<Occurrence> detect_all(const arch::ArchModel& model, const Bands& bands, const DetectOptions& options) {
  std::vector<Occurrence> out;
  for (const auto& s : model.scenarios) {
    auto blobs = detect_blob(model, bands, s.name, options);
    auto pafs = detect_paf(model, bands, s.name, options);
    out.insert(out.end(), blobs.begin(), blobs.end());
    out.insert(out.end(), pafs.begin(), pafs.end());
  }
  canonical_sort(out);
  return out;
}

namespace {

ThresholdBand band_from_values(const std::vector<double>& values, Metric metric, std::vector<std::string>& warnings) {
  auto name = std::string(to_string(metric));
  if (values.empty()) {
    warnings.push_back(name + ": no values in model, using band (0, 1)");
    return {0.0, 1.0};
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double max = *std::max_element(values.begin(), values.end());
  if (max - mean <= 1e-12 * std::max(1.0, std::abs(max))) {
    warnings.push_back(name + ": no spread in model values, widening upper bound by 10%");
    double upper = max > 0.0 ? max * 1.1 : max + 0.1;
    return {max, upper};
  }
  return {mean, max};
}

}  // namespace

Bands default_bands(const arch::ArchModel& model) {
  Bands b;
  std::vector<double> connects, msgs, utils, demands;
  for (const auto& c : model.components) {
    connects.push_back(num_client_connects(model, c.name));
    for (const auto& op : c.operations)
      if (op.service_demand) demands.push_back(*op.service_demand);
  }
  for (const auto& s : model.scenarios) {
    std::map<std::pair<std::string, std::string>, double> pairs;
    for (const auto& st : s.steps) {
      if (!st.caller || *st.caller == st.callee) continue;
      auto key = std::minmax(*st.caller, st.callee);
      pairs[{key.first, key.second}] += 1.0;
    }
    for (const auto& [k, v] : pairs) msgs.push_back(v);
  }
  for (const auto& n : model.nodes)
    if (n.utilization) utils.push_back(*n.utilization);

  b.bands[Metric::NumClientConnects] = band_from_values(connects, Metric::NumClientConnects, b.warnings);
  b.bands[Metric::NumMsgs] = band_from_values(msgs, Metric::NumMsgs, b.warnings);
  b.bands[Metric::MaxHwUtil] = band_from_values(utils, Metric::MaxHwUtil, b.warnings);
  b.bands[Metric::ResDemand] = band_from_values(demands, Metric::ResDemand, b.warnings);
  return b;
}

Bands apply_overrides(Bands bands, const json& config) {
  if (!config.is_object()) throw ParseError("threshold config must be a JSON object");
  for (const auto& [key, value] : config.items()) {
    auto metric = metric_from_string(key);
    if (!value.is_object()) throw ParseError("threshold config: '" + key + "' must be an object");
    auto& band = bands.bands[metric];
    if (auto it = value.find("lb"); it != value.end()) band.lower = it->get<double>();
    if (auto it = value.find("ub"); it != value.end()) band.upper = it->get<double>();
    if (!(band.upper > band.lower)) throw ValidationError("threshold config: '" + key + "' needs ub > lb");
  }
  return bands;
}

json to_json(const Bands& b) {
  json out = json::object();
  for (const auto& [m, band] : b.bands) out[std::string(to_string(m))] = {{"lb", band.lower}, {"ub", band.upper}};
  return out;
}

json to_json(const Occurrence& o) {
  json literals = json::array();
  for (const auto& l : o.literals)
    literals.push_back({{"metric", std::string(to_string(l.metric))}, {"element", l.element}, {"value", l.value}, {"p", l.probability}});
  return {{"kind", std::string(to_string(o.kind))},
          {"target", o.target},
          {"scenario", o.scenario},
          {"literals", literals},
          {"probability", o.probability}};
}

json to_json(const std::vector<Occurrence>& occ) {
  json out = json::array();
  for (const auto& o : occ) out.push_back(to_json(o));
  return out;
}

Occurrence occurrence_from_json(const json& doc) {
  Occurrence o;
  auto kind = doc.at("kind").get<std::string>();
  if (kind == "BLOB") o.kind = Kind::Blob;
  else if (kind == "PAF") o.kind = Kind::PipeAndFilter;
  else throw ParseError("occurrence kind must be BLOB or PAF");
  o.target = doc.at("target").get<std::string>();
  o.scenario = doc.value("scenario", "");
  if (auto it = doc.find("literals"); it != doc.end()) {
    for (const auto& l : *it)
      o.literals.push_back({metric_from_string(l.at("metric").get<std::string>()), l.value("element", ""),
                            l.value("value", 0.0), l.value("p", 0.0)});
  }
  o.probability = doc.value("probability", 0.0);
  return o;
}

}  // namespace perfloop::antipattern
