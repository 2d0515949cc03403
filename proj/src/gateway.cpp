#include "perfloop/gateway.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>

#include "CLI11.hpp"
#include "httplib.h"
#include "perfloop/antipattern.hpp"
#include "perfloop/error.hpp"
#include "perfloop/fixtures.hpp"
#include "perfloop/perf_annotator.hpp"
#include "perfloop/trace_ingest.hpp"
#include "perfloop/traceability.hpp"

namespace perfloop::gateway {

using nlohmann::json;

std::string render(const json& doc) { return doc.dump(2) + "\n"; }

refactor::RefactoringAction parse_action(std::string_view text) {
  auto trimmed = std::string(text);
  if (!trimmed.empty() && trimmed.front() == '{') {
    try {
      return refactor::action_from_json(json::parse(trimmed));
    } catch (const json::exception& e) {
      throw ParseError(std::string("action: ") + e.what());
    }
  }
  refactor::RefactoringAction a;
  if (trimmed.starts_with("clone:")) {
    a.kind = refactor::ActionKind::Clone;
    a.component = trimmed.substr(6);
  } else if (trimmed.starts_with("move:")) {
    auto ref = arch::OperationRef::parse(trimmed.substr(5));
    a.kind = refactor::ActionKind::MoveOperation;
    a.component = ref.component;
    a.operation = ref.operation;
  } else {
    throw ParseError("action must be JSON, clone:<component> or move:<component>/<operation>");
  }
  if (a.component.empty()) throw ParseError("action: empty component");
  return a;
}

namespace {

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path);
  f << text;
}

json read_json(const std::string& path) {
  try {
    return json::parse(fixtures::read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

ingest::LogModel read_log(const std::string& spans, const std::string& util) {
  auto records = ingest::parse_spans(fixtures::read_file(spans));
  std::vector<ingest::UtilizationSample> samples;
  if (!util.empty()) samples = ingest::parse_utilization(fixtures::read_file(util));
  return ingest::build_log_model(records, samples);
}

antipattern::Bands bands_for(const arch::ArchModel& model, const std::string& path) {
  auto bands = antipattern::default_bands(model);
  if (!path.empty()) bands = antipattern::apply_overrides(bands, read_json(path));
  return bands;
}

std::vector<refactor::RefactoringAction> parse_actions(const std::vector<std::string>& texts) {
  std::vector<refactor::RefactoringAction> out;
  for (const auto& t : texts) out.push_back(parse_action(t));
  return out;
}

struct SessionInputs {
  std::string model;
  std::string fixture;
  std::string run;
  std::string bands;
  std::int64_t seed = -1;
};

session::SessionState open_session(const SessionInputs& in) {
  arch::ArchModel model;
  json run;
  if (!in.fixture.empty()) {
    auto f = fixtures::load_fixture(in.fixture);
    model = f.model;
    run = f.run_config;
  }
  if (!in.model.empty()) model = arch::load_model(fixtures::read_file(in.model));
  if (!in.run.empty()) run = read_json(in.run);
  if (model.components.empty()) throw ValidationError("session: give --model or --fixture");
  if (run.is_null()) throw ValidationError("session: give --run or --fixture");
  auto config = session::config_from_json(run);
  if (in.seed >= 0) config.seed = static_cast<std::uint64_t>(in.seed);
  if (!in.bands.empty()) config.band_overrides = read_json(in.bands);
  return session::start_session(model, config);
}

}  // namespace

int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"perfloop: trace-driven performance antipattern detection and refactoring"};
  app.require_subcommand(1);

  std::string model_path, spans_path, util_path, bands_path, run_path, out_path, scope_text = "MODEL_AND_SYSTEM";
  std::string replay_path;
  std::vector<std::string> action_texts;
  double floor = 0.1, window = 0.0;
  int max_iterations = 5, port = 8080;
  std::int64_t seed = -1;
  SessionInputs inputs;

  auto* ingest_cmd = app.add_subcommand("ingest", "Parse spans and utilization samples into a log model");
  ingest_cmd->add_option("--spans", spans_path, "Span file (JSON array or NDJSON)")->required();
  ingest_cmd->add_option("--util", util_path, "Utilization sample file");

  auto* link_cmd = app.add_subcommand("link", "Generate traceability links between a log and a model");
  link_cmd->add_option("--model", model_path, "Architecture model")->required();
  link_cmd->add_option("--spans", spans_path, "Span file")->required();
  link_cmd->add_option("--util", util_path, "Utilization sample file");

  auto* annotate_cmd = app.add_subcommand("annotate", "Estimate demands and indices and write them into the model");
  annotate_cmd->add_option("--model", model_path, "Architecture model")->required();
  annotate_cmd->add_option("--spans", spans_path, "Span file")->required();
  annotate_cmd->add_option("--util", util_path, "Utilization sample file");
  annotate_cmd->add_option("--window", window, "Observation window in seconds (default: span extent)");
  annotate_cmd->add_option("--out", out_path, "Annotated model output");

  auto* detect_cmd = app.add_subcommand("detect", "Detect Blob and Pipe-and-Filter occurrences");
  detect_cmd->add_option("--model", model_path, "Annotated architecture model")->required();
  detect_cmd->add_option("--bands", bands_path, "Threshold band overrides");
  detect_cmd->add_option("--floor", floor, "Report floor")->default_val(0.01);

  auto* preview_cmd = app.add_subcommand("preview", "Predict the effect of refactoring actions");
  preview_cmd->add_option("--model", model_path, "Annotated architecture model")->required();
  preview_cmd->add_option("--action", action_texts, "Action (repeatable)")->required();

  auto* refactor_cmd = app.add_subcommand("refactor", "Apply refactoring actions to a model");
  refactor_cmd->add_option("--model", model_path, "Architecture model")->required();
  refactor_cmd->add_option("--action", action_texts, "Action (repeatable)")->required();
  refactor_cmd->add_option("--out", out_path, "Refactored model output");

  auto* simulate_cmd = app.add_subcommand("simulate", "Run the simulated system and emit spans");
  simulate_cmd->add_option("--model", model_path, "Architecture model")->required();
  simulate_cmd->add_option("--run", run_path, "Run config")->required();
  simulate_cmd->add_option("--seed", seed, "Seed override");
  simulate_cmd->add_option("--out", out_path, "Span output (NDJSON)")->required();
  simulate_cmd->add_option("--util", util_path, "Utilization sample output (NDJSON)");

  auto add_session_inputs = [&](CLI::App* cmd) {
    cmd->add_option("--model", inputs.model, "Architecture model");
    cmd->add_option("--fixture", inputs.fixture, "Shipped fixture providing model and run config");
    cmd->add_option("--run", inputs.run, "Session or run config");
    cmd->add_option("--bands", inputs.bands, "Threshold band overrides");
    cmd->add_option("--seed", inputs.seed, "Session seed");
    cmd->add_option("--out", out_path, "Record file output");
  };
  auto* session_cmd = app.add_subcommand("session", "Start a session and apply actions");
  add_session_inputs(session_cmd);
  session_cmd->add_option("--action", action_texts, "Action (repeatable; applied in one call)");
  session_cmd->add_option("--scope", scope_text, "MODEL_ONLY or MODEL_AND_SYSTEM");
  session_cmd->add_option("--replay", replay_path, "Replay a record file and compare measurements");

  auto* batch_cmd = app.add_subcommand("batch", "Run the loop until no occurrence exceeds the floor");
  add_session_inputs(batch_cmd);
  batch_cmd->add_option("--floor", floor, "Probability floor")->default_val(0.1);
  batch_cmd->add_option("--max", max_iterations, "Iteration cap")->default_val(5);

  auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP API");
  serve_cmd->add_option("--port", port, "Listen port (PERFLOOP_PORT overrides)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (ingest_cmd->parsed()) {
      auto log = read_log(spans_path, util_path);
      out << render({{"summary", ingest::to_json(ingest::summarize(log))}, {"warnings", log.warnings}});
    } else if (link_cmd->parsed()) {
      auto log = read_log(spans_path, util_path);
      auto model = arch::load_model(fixtures::read_file(model_path));
      auto tm = trace::generate_links(log, model);
      out << render({{"trace_model", trace::to_json(tm)},
                     {"coverage", trace::to_json(trace::coverage_report(tm, log, model))}});
    } else if (annotate_cmd->parsed()) {
      auto log = read_log(spans_path, util_path);
      auto model = arch::load_model(fixtures::read_file(model_path));
      auto tm = trace::generate_links(log, model);
      auto demands = annotate::estimate_demands(log, tm, model);
      auto indices = annotate::measure_indices(log, tm, window > 0.0 ? window : ingest::observed_seconds(log));
      auto annotated = annotate::write_back(model, demands.estimates, indices);
      if (!out_path.empty()) write_file(out_path, arch::serialize(annotated));
      out << render({{"demands", annotate::to_json(demands)}, {"indices", annotate::to_json(indices)}});
    } else if (detect_cmd->parsed()) {
      auto model = arch::load_model(fixtures::read_file(model_path));
      auto bands = bands_for(model, bands_path);
      out << render(antipattern::to_json(antipattern::detect_all(model, bands, {floor})));
    } else if (preview_cmd->parsed()) {
      auto model = arch::load_model(fixtures::read_file(model_path));
      out << render(session::to_json(session::preview_model(model, parse_actions(action_texts))));
    } else if (refactor_cmd->parsed()) {
      auto model = arch::load_model(fixtures::read_file(model_path));
      auto refactored = model;
      std::vector<std::string> warnings;
      for (const auto& a : parse_actions(action_texts)) {
        refactor::check_action(refactored, a);
        refactored = refactor::apply_action(refactored, a, &warnings);
      }
      for (const auto& w : warnings) err << "warning: " << w << "\n";
      if (!out_path.empty()) write_file(out_path, arch::serialize(refactored));
      out << render(arch::to_json(arch::diff(model, refactored)));
    } else if (simulate_cmd->parsed()) {
      auto model = arch::load_model(fixtures::read_file(model_path));
      sim::ServiceMeans means;
      auto run = sim::run_from_json(read_json(run_path), &means);
      if (seed >= 0) run.seed = static_cast<std::uint64_t>(seed);
      auto result = sim::run(sim::instantiate(model, means), run);
      write_file(out_path, ingest::serialize_spans(result.spans));
      if (!util_path.empty()) write_file(util_path, ingest::serialize_utilization(result.utilization));
      out << render({{"stats", sim::to_json(result.stats)}, {"spans", result.spans.size()}});
    } else if (session_cmd->parsed()) {
      if (!replay_path.empty()) {
        auto result = session::replay(session::read_record_file(replay_path));
        out << render({{"identical", result.identical}, {"mismatches", result.mismatches}});
        return result.identical ? 0 : 1;
      }
      auto state = open_session(inputs);
      if (!action_texts.empty())
        session::apply(state, parse_actions(action_texts), session::scope_from_string(scope_text));
      if (!out_path.empty()) session::write_record_file(state, out_path);
      for (const auto& w : state.warnings) err << "warning: " << w << "\n";
      out << render({{"history", session::history_json(state)}, {"comparison", session::comparison_json(state)}});
    } else if (batch_cmd->parsed()) {
      auto state = open_session(inputs);
      auto result = session::run_batch(state, floor, max_iterations);
      if (!out_path.empty()) session::write_record_file(state, out_path);
      out << session::comparison_table(state);
      out << render({{"status", session::to_string(result.status)}, {"iterations", result.iterations}});
    } else if (serve_cmd->parsed()) {
      if (const char* env = std::getenv("PERFLOOP_PORT"); env && *env) {
        try {
          port = std::stoi(env);
        } catch (const std::exception&) {
          err << "PERFLOOP_PORT is not a port number\n";
          return 2;
        }
      }
      return serve(port, err);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

std::shared_ptr<ApiSession> SessionRegistry::create(session::SessionState state) {
  auto s = std::make_shared<ApiSession>();
  std::lock_guard lock(mutex_);
  std::mt19937_64 rng(std::random_device{}() ^ (++counter_ << 20));
  char id[24];
  std::snprintf(id, sizeof id, "s%016llx", static_cast<unsigned long long>(rng()));
  s->id = id;
  s->created_at = std::chrono::duration_cast<std::chrono::seconds>(
                      std::chrono::system_clock::now().time_since_epoch())
                      .count();
  s->publish(std::make_shared<const session::SessionState>(std::move(state)));
  sessions_[s->id] = s;
  return s;
}

std::shared_ptr<ApiSession> SessionRegistry::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::vector<std::string> SessionRegistry::ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, _] : sessions_) out.push_back(id);
  return out;
}

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(render(body), "application/json");
}

void fail(httplib::Response& res, int status, const std::string& message) { reply(res, status, {{"error", message}}); }

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("request body: ") + e.what());
  }
}

std::vector<refactor::RefactoringAction> body_actions(const json& body) {
  std::vector<refactor::RefactoringAction> actions;
  auto one = [&](const json& a) {
    actions.push_back(a.is_string() ? parse_action(a.get<std::string>()) : refactor::action_from_json(a));
  };
  if (auto it = body.find("actions"); it != body.end() && it->is_array())
    for (const auto& a : *it) one(a);
  else if (auto it2 = body.find("action"); it2 != body.end())
    one(*it2);
  if (actions.empty()) throw ParseError("request needs 'action' or 'actions'");
  return actions;
}

json session_summary(const ApiSession& s, const session::SessionState& st) {
  return {{"id", s.id},
          {"created_at", s.created_at},
          {"iteration", st.iteration()},
          {"model_version", st.model.version},
          {"generation", st.system.generation},
          {"warnings", st.warnings}};
}

// Resolves the session of a /sessions/{id}/... route or answers 404.
std::shared_ptr<ApiSession> lookup(SessionRegistry& registry, const httplib::Request& req, httplib::Response& res) {
  auto s = registry.find(req.matches[1]);
  if (!s) fail(res, 404, "unknown session " + std::string(req.matches[1]));
  return s;
}

// Runs `fn` on a private copy of the state under the session's writer lock
// and publishes the result; a concurrent writer gets 409.
template <typename Fn>
void mutate(ApiSession& s, httplib::Response& res, Fn&& fn) {
  std::unique_lock lock(s.writer, std::try_to_lock);
  if (!lock.owns_lock()) {
    fail(res, 409, "another mutation of session " + s.id + " is in progress");
    return;
  }
  auto next = std::make_shared<session::SessionState>(*s.snapshot());
  json body = fn(*next);
  s.publish(std::move(next));
  reply(res, 200, body);
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn, int action_status = 500) {
  try {
    fn();
  } catch (const ParseError& e) {
    fail(res, action_status == 500 ? 400 : action_status, e.what());
  } catch (const ValidationError& e) {
    fail(res, action_status == 500 ? 422 : action_status, e.what());
  } catch (const NotFoundError& e) {
    fail(res, action_status == 500 ? 404 : action_status, e.what());
  } catch (const Error& e) {
    fail(res, 500, e.what());
  } catch (const json::exception& e) {
    fail(res, 400, e.what());
  }
}

}  // namespace

void mount(httplib::Server& server, SessionRegistry& registry) {
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});

  server.Get("/health", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });

  server.Get("/sessions", [&registry](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, registry.ids());
  });

  server.Post("/sessions", [&registry](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto body = parse_body(req);
      arch::ArchModel model;
      json run;
      if (auto it = body.find("fixture"); it != body.end()) {
        auto f = fixtures::load_fixture(it->get<std::string>());
        model = f.model;
        run = f.run_config;
      }
      if (auto it = body.find("model"); it != body.end()) model = arch::model_from_json(*it);
      if (auto it = body.find("config"); it != body.end()) run = *it;
      if (model.components.empty() || run.is_null())
        throw ValidationError("POST /sessions needs 'fixture' or both 'model' and 'config'");
      auto config = session::config_from_json(run);
      if (auto it = body.find("seed"); it != body.end()) config.seed = it->get<std::uint64_t>();
      auto s = registry.create(session::start_session(model, config));
      reply(res, 201, session_summary(*s, *s->snapshot()));
    });
  });

  server.Get(R"(/sessions/([^/]+))", [&registry](const httplib::Request& req, httplib::Response& res) {
    if (auto s = lookup(registry, req, res)) reply(res, 200, session_summary(*s, *s->snapshot()));
  });

  server.Get(R"(/sessions/([^/]+)/model)", [&registry](const httplib::Request& req, httplib::Response& res) {
    if (auto s = lookup(registry, req, res)) reply(res, 200, arch::to_json(s->snapshot()->model));
  });

  server.Get(R"(/sessions/([^/]+)/indices)", [&registry](const httplib::Request& req, httplib::Response& res) {
    if (auto s = lookup(registry, req, res)) reply(res, 200, annotate::to_json(s->snapshot()->history.back().measured));
  });

  server.Get(R"(/sessions/([^/]+)/antipatterns)", [&registry](const httplib::Request& req, httplib::Response& res) {
    if (auto s = lookup(registry, req, res))
      guarded(res, [&] { reply(res, 200, antipattern::to_json(session::detect(*s->snapshot()))); });
  });

  server.Get(R"(/sessions/([^/]+)/history)", [&registry](const httplib::Request& req, httplib::Response& res) {
    if (auto s = lookup(registry, req, res)) reply(res, 200, session::history_json(*s->snapshot()));
  });

  server.Get(R"(/sessions/([^/]+)/candidates)", [&registry](const httplib::Request& req, httplib::Response& res) {
    auto s = lookup(registry, req, res);
    if (!s) return;
    guarded(res, [&] {
      auto st = s->snapshot();
      json out = json::array();
      for (const auto& c : refactor::enumerate_candidates(st->model, session::detect(*st))) {
        json entry = {{"action", refactor::to_json(c)}};
        try {
          entry["preview"] = session::to_json(session::preview(*st, {c}));
        } catch (const Error& e) {
          entry["error"] = e.what();
        }
        out.push_back(entry);
      }
      reply(res, 200, out);
    });
  });

  server.Post(R"(/sessions/([^/]+)/preview)", [&registry](const httplib::Request& req, httplib::Response& res) {
    auto s = lookup(registry, req, res);
    if (!s) return;
    guarded(
        res,
        [&] {
          auto actions = body_actions(parse_body(req));
          reply(res, 200, session::to_json(session::preview(*s->snapshot(), actions)));
        },
        422);
  });

  server.Post(R"(/sessions/([^/]+)/apply)", [&registry](const httplib::Request& req, httplib::Response& res) {
    auto s = lookup(registry, req, res);
    if (!s) return;
    std::vector<refactor::RefactoringAction> actions;
    session::Scope scope = session::Scope::ModelAndSystem;
    bool valid = false;
    guarded(
        res,
        [&] {
          auto body = parse_body(req);
          actions = body_actions(body);
          if (auto it = body.find("scope"); it != body.end()) scope = session::scope_from_string(it->get<std::string>());
          else if (req.has_param("scope")) scope = session::scope_from_string(req.get_param_value("scope"));
          auto st = s->snapshot();
          auto model = st->model;
          for (const auto& a : actions) {
            refactor::check_action(model, a);
            model = refactor::apply_action(model, a);
          }
          valid = true;
        },
        422);
    if (!valid) return;
    guarded(res, [&] {
      mutate(*s, res, [&](session::SessionState& st) {
        session::apply(st, actions, scope);
        // The record that carries the action; it holds the post-action indices
        // once the system was re-measured.
        return session::to_json(scope == session::Scope::ModelAndSystem ? st.history[st.history.size() - 2]
                                                                        : st.history.back());
      });
    });
  });

  server.Post(R"(/sessions/([^/]+)/measure)", [&registry](const httplib::Request& req, httplib::Response& res) {
    auto s = lookup(registry, req, res);
    if (!s) return;
    guarded(res, [&] {
      mutate(*s, res, [&](session::SessionState& st) {
        session::measure(st);
        return session::to_json(st.history.back());
      });
    });
  });
}

int serve(int port, std::ostream& log) {
  httplib::Server server;
  SessionRegistry registry;
  mount(server, registry);
  log << "perfloop listening on port " << port << std::endl;
  if (!server.listen("0.0.0.0", port)) {
    log << "error: cannot listen on port " << port << "\n";
    return 1;
  }
  return 0;
}

}  // namespace perfloop::gateway
