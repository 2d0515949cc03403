#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>
#include <unistd.h>

#include "doctest.h"
#include "httplib.h"
#include "perfloop/fixtures.hpp"
#include "perfloop/gateway.hpp"
#include "support/models.hpp"

using namespace perfloop;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "perfloop");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  int code = gateway::cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch() {
  static fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("perfloop-test-" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string write(const std::string& name, const std::string& text) {
  auto p = scratch() / name;
  std::ofstream(p) << text;
  return p.string();
}

json small_session_body() {
  json config = {{"seed", 5},
                 {"duration_s", 40.0},
                 {"warmup_s", 5.0},
                 {"sample_window_s", 5.0},
                 {"calibration_traces", 50},
                 {"arrivals", {{{"scenario", "Main"}, {"rate_per_s", 12.0}}}}};
  return {{"model", arch::to_json(models::three_tier())}, {"config", config}};
}

// Server on an ephemeral port, stopped on destruction.
struct TestServer {
  httplib::Server server;
  gateway::SessionRegistry registry;
  std::thread thread;
  int port = 0;

  TestServer() {
    gateway::mount(server, registry);
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~TestServer() {
    server.stop();
    thread.join();
  }
};

}  // namespace

TEST_SUITE("gateway") {
  TEST_CASE("usage errors exit with 2") {
    CHECK(cli({}).code == 2);
    CHECK(cli({"detect"}).code == 2);
    CHECK(cli({"bogus"}).code == 2);
    CHECK(cli({"--help"}).code == 0);
  }

  TEST_CASE("pipeline errors exit with 1 and name the problem") {
    auto r = cli({"detect", "--model", (scratch() / "missing.json").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("missing.json") != std::string::npos);
    auto bad = write("bad-model.json", R"({"components": [], "nodes": [{"name": "n", "hosts": ["ghost"]}]})");
    CHECK(cli({"detect", "--model", bad}).code == 1);
  }

  TEST_CASE("detect on a clean model reports nothing") {
    auto m = models::minimal();
    m.nodes[0].utilization = 0.3;
    auto r = cli({"detect", "--model", write("clean.json", arch::serialize(m))});
    CHECK(r.code == 0);
    CHECK(json::parse(r.out) == json::array());
  }

  TEST_CASE("simulate then ingest") {
    auto model = write("mm1-model.json", arch::serialize(fixtures::load_fixture("mm1").model));
    auto run = write("mm1-run.json", R"({"seed": 3, "duration_s": 20, "arrivals": [{"scenario": "Request", "rate_per_s": 10}],
                                          "service_means": {"server/serve": 0.01}})");
    auto spans = (scratch() / "spans.ndjson").string();
    auto util = (scratch() / "util.ndjson").string();
    auto sim = cli({"simulate", "--model", model, "--run", run, "--out", spans, "--util", util});
    REQUIRE(sim.code == 0);
    auto ingest = cli({"ingest", "--spans", spans, "--util", util});
    REQUIRE(ingest.code == 0);
    CHECK(json::parse(ingest.out)["summary"]["traces"].get<int>() > 0);
    auto annotated = (scratch() / "annotated.json").string();
    CHECK(cli({"annotate", "--model", model, "--spans", spans, "--util", util, "--out", annotated}).code == 0);
    CHECK(cli({"detect", "--model", annotated}).code == 0);
    CHECK(cli({"link", "--model", model, "--spans", spans}).code == 0);
  }

  TEST_CASE("refactor and preview from the command line") {
    auto model = write("three.json", arch::serialize(models::three_tier()));
    auto out = (scratch() / "refactored.json").string();
    auto r = cli({"refactor", "--model", model, "--action", "clone:api", "--action", "move:api/write", "--out", out});
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out)["added_components"].size() == 2);
    CHECK(arch::load_model(fixtures::read_file(out)).components.size() == 5);
    auto p = cli({"preview", "--model", model, "--action", R"({"kind":"CLONE","target":"api"})"});
    CHECK(p.code == 0);
    CHECK(cli({"refactor", "--model", model, "--action", "split:api"}).code == 1);
  }

  TEST_CASE("batch terminates and prints the iteration table") {
    auto r = cli({"batch", "--fixture", "two-station", "--floor", "0.1", "--max", "5"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("respT") != std::string::npos);
    CHECK(r.out.find("\"status\"") != std::string::npos);
  }

  TEST_CASE("session record replays identically") {
    auto rec = (scratch() / "session.jsonl").string();
    auto r = cli({"session", "--fixture", "two-station", "--action", "clone:back", "--out", rec});
    REQUIRE(r.code == 0);
    auto replay = cli({"session", "--replay", rec});
    CHECK(replay.code == 0);
    CHECK(json::parse(replay.out)["identical"] == true);
  }

  TEST_CASE("http api") {
    TestServer ts;
    httplib::Client client("127.0.0.1", ts.port);
    client.set_read_timeout(60, 0);

    auto health = client.Get("/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(health->body == "ok");

    CHECK(client.Get("/sessions/s0000/model")->status == 404);
    CHECK(client.Post("/sessions", "{}", "application/json")->status == 422);
    CHECK(client.Post("/sessions", "{nope", "application/json")->status == 400);
    CHECK(client.Post("/sessions", R"({"fixture": "nope"})", "application/json")->status == 404);

    auto created = client.Post("/sessions", small_session_body().dump(), "application/json");
    REQUIRE(created);
    REQUIRE(created->status == 201);
    auto id = json::parse(created->body)["id"].get<std::string>();
    auto base = "/sessions/" + id;
    CHECK(json::parse(client.Get("/sessions")->body).size() == 1);

    CHECK(json::parse(client.Get(base + "/model")->body)["components"].size() == 3);
    CHECK(json::parse(client.Get(base + "/indices")->body)["scenarios"].size() == 1);
    CHECK(client.Get(base + "/antipatterns")->status == 200);
    CHECK(json::parse(client.Get(base + "/candidates")->body).is_array());

    auto preview = client.Post(base + "/preview", R"({"action": "clone:api"})", "application/json");
    CHECK(preview->status == 200);
    CHECK(json::parse(preview->body)["delta"]["respT"]["Main"].get<double>() < 0.0);
    CHECK(client.Post(base + "/preview", R"({"action": "clone:ghost"})", "application/json")->status == 422);
    CHECK(client.Post(base + "/preview", R"({})", "application/json")->status == 422);
    CHECK(client.Post(base + "/apply", R"({"action": "move:db/query"})", "application/json")->status == 422);

    {
      // A writer in flight makes concurrent mutations fail fast.
      auto s = ts.registry.find(id);
      std::lock_guard hold(s->writer);
      CHECK(client.Post(base + "/apply", R"({"action": "clone:api"})", "application/json")->status == 409);
      CHECK(client.Post(base + "/measure", "", "application/json")->status == 409);
    }

    auto applied = client.Post(base + "/apply", R"({"action": "clone:api", "scope": "MODEL_AND_SYSTEM"})",
                               "application/json");
    REQUIRE(applied->status == 200);
    CHECK(json::parse(applied->body)["applied"].size() == 1);
    auto history = json::parse(client.Get(base + "/history")->body);
    REQUIRE(history.size() == 2);
    const auto& last = history.back();
    bool sees_replica = false;
    for (const auto& svc : last["measured"]["services"]) sees_replica |= svc["service"] == "cloned-api";
    CHECK(sees_replica);
    auto summary = json::parse(client.Get(base)->body);
    CHECK(summary["iteration"] == 1);
    CHECK(summary["generation"] == 1);

    auto model_only = client.Post(base + "/apply", R"({"action": "clone:db", "scope": "MODEL_ONLY"})", "application/json");
    CHECK(model_only->status == 200);
    CHECK(json::parse(client.Get(base)->body)["generation"] == 1);
    CHECK(client.Post(base + "/measure", "", "application/json")->status == 200);
    CHECK(json::parse(client.Get(base)->body)["generation"] == 2);
  }
}
