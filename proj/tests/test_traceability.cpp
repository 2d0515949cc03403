#include <random>

#include "doctest.h"
#include "perfloop/error.hpp"
#include "perfloop/traceability.hpp"
#include "support/models.hpp"
#include "support/random_models.hpp"
#include "support/trace_oracle.hpp"

using namespace perfloop;
using namespace perfloop::trace;
using ingest::SpanKind;
using ingest::SpanRecord;

namespace {

// Two traces walking gw -> api -> db through three matching spans each.
std::vector<SpanRecord> three_span_traces() {
  std::vector<SpanRecord> spans;
  for (std::string t : {"t1", "t2"}) {
    spans.push_back({t, "a", std::nullopt, "http://gw/entry", 0, 100, SpanKind::Server, "gw"});
    spans.push_back({t, "b", std::string("a"), "http://api/read", 10, 50, SpanKind::Server, "api"});
    spans.push_back({t, "c", std::string("b"), "query", 20, 10, SpanKind::Server, "db"});
  }
  return spans;
}

arch::ArchModel three_step_model() {
  auto m = models::three_tier();
  m.scenarios[0].steps.resize(3);
  return m;
}

std::size_t count(const TraceModel& tm, Rule r) {
  return std::count_if(tm.links.begin(), tm.links.end(), [&](const TraceLink& l) { return l.rule == r; });
}

}  // namespace

TEST_SUITE("traceability") {
  TEST_CASE("empty log yields no links") {
    auto tm = generate_links(ingest::build_log_model({}, {}), models::three_tier());
    CHECK(tm.links.empty());
  }

  TEST_CASE("service name equality gives one component link") {
    auto log = ingest::build_log_model({{"t", "a", std::nullopt, "none", 0, 1, SpanKind::Server, "web"}}, {});
    auto tm = generate_links(log, models::minimal());
    CHECK(count(tm, Rule::Service2Component) == 1);
  }

  TEST_CASE("two traces of three matching spans") {
    auto tm = generate_links(ingest::build_log_model(three_span_traces(), {}), three_step_model());
    CHECK(count(tm, Rule::Trace2UseCase) == 2);
    CHECK(count(tm, Rule::Span2Message) == 6);
    CHECK(count(tm, Rule::EndPoint2Signature) <= 3);
    CHECK(count(tm, Rule::Service2Component) == 3);
    CHECK(tm.unmatched.empty());
  }

  TEST_CASE("links_for queries") {
    auto tm = generate_links(ingest::build_log_model(three_span_traces(), {}), three_step_model());
    auto op = ElementRef{Side::Right, "Operation", "api/write"};
    CHECK(links_for(tm, op).empty());
    auto comp = ElementRef{Side::Right, "Component", "api"};
    auto links = links_for(tm, comp);
    REQUIRE(links.size() == 1);
    auto svc = links[0].left_ends[0];
    CHECK(links_for(tm, svc) == links);
    CHECK(links_for(tm, ElementRef{Side::Right, "Message", "Main#0"}).size() == 2);
    CHECK_THROWS_AS(links_for(tm, ElementRef{Side::Left, "Service", "ghost"}), NotFoundError);
  }

  TEST_CASE("coverage lists renamed components and unknown endpoints") {
    auto spans = three_span_traces();
    spans.push_back({"t3", "a", std::nullopt, "http://gw/mystery", 0, 1, SpanKind::Server, "gw"});
    auto m = three_step_model();
    m.components[2].name = "database";
    m.nodes[2].hosts = {"database"};
    m.scenarios[0].steps[2].callee = "database";
    auto tm = generate_links(ingest::build_log_model(spans, {}), m);
    CHECK(tm.unmatched.unmatched_services == std::vector<std::string>{"db"});
    CHECK(tm.unmatched.unmatched_endpoints == std::vector<std::string>{"gw|http://gw/mystery"});
    CHECK(tm.unmatched.unmatched_traces == std::vector<std::string>{"t3"});
  }

  TEST_CASE("client spans are distinct elements") {
    std::vector<SpanRecord> spans{{"t", "a", std::nullopt, "entry", 0, 10, SpanKind::Server, "gw"},
                                  {"t", "b", std::string("a"), "read", 1, 5, SpanKind::Client, "gw"},
                                  {"t", "b", std::string("a"), "read", 2, 3, SpanKind::Server, "api"}};
    auto tm = generate_links(ingest::build_log_model(spans, {}), three_step_model());
    CHECK(tm.elements.contains(ElementRef{Side::Left, "Span", "t/b@client"}));
    CHECK(tm.elements.contains(ElementRef{Side::Left, "Span", "t/b"}));
  }

  TEST_CASE("generated links equal the brute-force pairing on random models") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      std::mt19937_64 rng(seed);
      auto m = gen::random_model(rng);
      auto spans = gen::random_spans(rng, m);
      auto tm = generate_links(ingest::build_log_model(spans, {}), m);
      INFO("seed " << seed);
      CHECK(oracle::flatten_links(tm) == oracle::brute_force_links(spans, m));
    }
  }
}
