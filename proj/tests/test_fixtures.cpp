#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "doctest.h"
#include "perfloop/error.hpp"
#include "perfloop/fixtures.hpp"

using namespace perfloop;
namespace fs = std::filesystem;

TEST_SUITE("fixtures") {
  TEST_CASE("every shipped fixture loads and validates") {
    for (const auto& name : fixtures::fixture_names()) {
      auto f = fixtures::load_fixture(name);
      CHECK(f.name == name);
      CHECK_NOTHROW(f.model.validate());
      CHECK_NOTHROW(f.session_config());
      for (const auto& [key, entry] : f.expected.items()) {
        INFO(name << "." << key);
        CHECK(entry.contains("basis"));
      }
    }
  }

  TEST_CASE("eshopper and trainticket workloads") {
    auto e = fixtures::load_fixture("eshopper");
    CHECK(e.model.components.size() == 9);
    CHECK(e.model.find_scenario("Desktop")->workload.rate == 3.8);
    auto t = fixtures::load_fixture("trainticket-subset");
    CHECK(t.model.find_scenario("Rebook Ticket")->workload.rate == 4.5);
    auto m = fixtures::load_fixture("mm1");
    CHECK(m.model.components.size() == 1);
    CHECK(m.expected.at("utilization").at("value") == 0.5);
    CHECK_THROWS_AS(fixtures::load_fixture("nope"), NotFoundError);
  }

  TEST_CASE("sha256 of known inputs") {
    CHECK(fixtures::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(fixtures::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }

  TEST_CASE("tampered fixture is rejected") {
    auto copy = fs::temp_directory_path() / ("perfloop-fixtures-" + std::to_string(::getpid()));
    fs::remove_all(copy);
    fs::copy(fixtures::fixture_dir(), copy, fs::copy_options::recursive);
    std::ofstream(copy / "mm1" / "model.json", std::ios::app) << " ";
    ::setenv("PERFLOOP_FIXTURES", copy.c_str(), 1);
    CHECK_THROWS_WITH_AS(fixtures::load_fixture("mm1"), doctest::Contains("checksum"), ValidationError);
    CHECK_NOTHROW(fixtures::load_fixture("two-station"));
    ::unsetenv("PERFLOOP_FIXTURES");
    fs::remove_all(copy);
  }
}
