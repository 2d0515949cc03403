// Documents cross the boundary as JSON text; perfloop/__init__.py converts
// them to and from Python objects.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "perfloop/antipattern.hpp"
#include "perfloop/error.hpp"
#include "perfloop/fixtures.hpp"
#include "perfloop/gateway.hpp"
#include "perfloop/perf_annotator.hpp"
#include "perfloop/qn_mva.hpp"
#include "perfloop/session_engine.hpp"
#include "perfloop/sysmock_sim.hpp"
#include "perfloop/traceability.hpp"

namespace py = pybind11;
using namespace perfloop;
using nlohmann::json;

namespace {

json parse(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  }
}

arch::ArchModel model_of(const std::string& text) { return arch::model_from_json(parse(text, "model")); }

antipattern::Bands bands_of(const arch::ArchModel& model, const std::string& overrides) {
  auto bands = antipattern::default_bands(model);
  if (!overrides.empty()) bands = antipattern::apply_overrides(bands, parse(overrides, "bands"));
  return bands;
}

std::vector<refactor::RefactoringAction> actions_of(const std::vector<std::string>& texts) {
  std::vector<refactor::RefactoringAction> out;
  for (const auto& t : texts) out.push_back(gateway::parse_action(t));
  return out;
}

ingest::LogModel log_of(const std::string& spans, const std::string& util) {
  return ingest::build_log_model(ingest::parse_spans(spans), util.empty() ? std::vector<ingest::UtilizationSample>{}
                                                                          : ingest::parse_utilization(util));
}

std::string dump(const json& doc) { return doc.dump(); }

// Holds a session; every mutation goes through the engine, which leaves the
// state untouched on failure.
class Session {
 public:
  Session(const std::string& model, const std::string& config)
      : state_(session::start_session(model_of(model), session::config_from_json(parse(config, "config")))) {}
  explicit Session(session::SessionState state) : state_(std::move(state)) {}

  static Session from_fixture(const std::string& name, std::optional<std::uint64_t> seed) {
    auto f = fixtures::load_fixture(name);
    auto config = f.session_config();
    if (seed) config.seed = *seed;
    return Session(session::start_session(f.model, config));
  }

  std::string model() const { return dump(arch::to_json(state_.model)); }
  std::string history() const { return dump(session::history_json(state_)); }
  std::string detect() const { return dump(antipattern::to_json(session::detect(state_))); }
  std::string candidates() const {
    json out = json::array();
    for (const auto& a : refactor::enumerate_candidates(state_.model, session::detect(state_)))
      out.push_back(refactor::to_json(a));
    return dump(out);
  }
  std::string preview(const std::vector<std::string>& actions) const {
    return dump(session::to_json(session::preview(state_, actions_of(actions))));
  }
  void apply(const std::vector<std::string>& actions, const std::string& scope) {
    session::apply(state_, actions_of(actions), session::scope_from_string(scope));
  }
  void measure() { session::measure(state_); }
  std::string batch(double floor, int max_iterations) {
    auto r = session::run_batch(state_, floor, max_iterations);
    return dump({{"status", session::to_string(r.status)}, {"iterations", r.iterations}});
  }
  std::string comparison() const { return dump(session::comparison_json(state_)); }
  std::string record_file() const { return session::record_file(state_); }
  int iteration() const { return state_.iteration(); }
  long generation() const { return state_.system.generation; }
  std::vector<std::string> warnings() const { return state_.warnings; }

 private:
  session::SessionState state_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "perfloop native core";

  static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", base);
  py::register_exception<ValidationError>(m, "ValidationError", base);
  py::register_exception<NotFoundError>(m, "NotFoundError", base);
  py::register_exception<RangeError>(m, "RangeError", base);

  m.def("fixture_names", &fixtures::fixture_names);
  m.def("load_fixture", [](const std::string& name) {
    auto f = fixtures::load_fixture(name);
    return dump({{"name", f.name}, {"model", arch::to_json(f.model)}, {"run", f.run_config}, {"expected", f.expected}});
  });

  m.def("validate_model", [](const std::string& model) { return dump(arch::to_json(model_of(model))); });

  m.def("ingest", [](const std::string& spans, const std::string& util) {
    return dump(ingest::to_json(ingest::summarize(log_of(spans, util))));
  }, py::arg("spans"), py::arg("util") = "");

  m.def("link", [](const std::string& model, const std::string& spans) {
    auto log = log_of(spans, "");
    return dump(trace::to_json(trace::generate_links(log, model_of(model))));
  });

  m.def("annotate", [](const std::string& model_text, const std::string& spans, const std::string& util,
                       double window) {
    auto log = log_of(spans, util);
    auto model = model_of(model_text);
    auto tm = trace::generate_links(log, model);
    auto demands = annotate::estimate_demands(log, tm, model);
    auto indices = annotate::measure_indices(log, tm, window > 0.0 ? window : ingest::observed_seconds(log));
    return dump({{"model", arch::to_json(annotate::write_back(model, demands.estimates, indices))},
                 {"demands", annotate::to_json(demands)},
                 {"indices", annotate::to_json(indices)}});
  }, py::arg("model"), py::arg("spans"), py::arg("util") = "", py::arg("window") = 0.0);

  m.def("mva", [](const std::vector<double>& demands, int population, double think_time) {
    qn::QNModel net;
    for (std::size_t i = 0; i < demands.size(); ++i) net.stations.push_back({"s" + std::to_string(i), demands[i]});
    net.population = population;
    net.think_time = think_time;
    return dump(qn::to_json(qn::mva_exact(net)));
  }, py::arg("demands"), py::arg("population"), py::arg("think_time") = 0.0);

  m.def("predict", [](const std::string& model) { return dump(qn::to_json(qn::predict_all(model_of(model)))); });

  m.def("fuzzy_prob", [](double value, double lb, double ub) { return antipattern::fuzzy_prob(value, {lb, ub}); });

  m.def("detect", [](const std::string& model_text, const std::string& bands, double floor) {
    auto model = model_of(model_text);
    return dump(antipattern::to_json(antipattern::detect_all(model, bands_of(model, bands), {floor})));
  }, py::arg("model"), py::arg("bands") = "", py::arg("floor") = 0.01);

  m.def("refactor", [](const std::string& model_text, const std::vector<std::string>& actions) {
    auto model = model_of(model_text);
    for (const auto& a : actions_of(actions)) {
      refactor::check_action(model, a);
      model = refactor::apply_action(model, a);
    }
    return dump(arch::to_json(model));
  });

  m.def("preview", [](const std::string& model, const std::vector<std::string>& actions) {
    return dump(session::to_json(session::preview_model(model_of(model), actions_of(actions))));
  });

  m.def("simulate", [](const std::string& model, const std::string& run_text) {
    sim::ServiceMeans means;
    auto run = sim::run_from_json(parse(run_text, "run"), &means);
    auto out = sim::run(sim::instantiate(model_of(model), means), run);
    return dump({{"spans", ingest::serialize_spans(out.spans)},
                 {"utilization", ingest::serialize_utilization(out.utilization)},
                 {"stats", sim::to_json(out.stats)}});
  });

  m.def("replay", [](const std::string& record_text) {
    auto r = session::replay(session::parse_record_file(record_text));
    return dump({{"identical", r.identical}, {"mismatches", r.mismatches}});
  });

  py::class_<Session>(m, "Session")
      .def(py::init<const std::string&, const std::string&>(), py::arg("model"), py::arg("config"))
      .def_static("from_fixture", &Session::from_fixture, py::arg("name"), py::arg("seed") = std::nullopt)
      .def("model", &Session::model)
      .def("history", &Session::history)
      .def("detect", &Session::detect)
      .def("candidates", &Session::candidates)
      .def("preview", &Session::preview)
      .def("apply", &Session::apply, py::arg("actions"), py::arg("scope") = "MODEL_AND_SYSTEM")
      .def("measure", &Session::measure)
      .def("batch", &Session::batch, py::arg("floor"), py::arg("max_iterations"))
      .def("comparison", &Session::comparison)
      .def("record_file", &Session::record_file)
      .def_property_readonly("iteration", &Session::iteration)
      .def_property_readonly("generation", &Session::generation)
      .def_property_readonly("warnings", &Session::warnings);
}
