#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "perfloop/arch_model.hpp"
#include "perfloop/session_engine.hpp"

namespace perfloop::fixtures {

struct Fixture {
  std::string name;
  arch::ArchModel model;
  nlohmann::json run_config;  // sim run document, including service_means
  nlohmann::json expected;    // expected-values table

  session::SessionConfig session_config() const;
};

// Directory holding the shipped fixtures; PERFLOOP_FIXTURES overrides it.
std::string fixture_dir();
std::vector<std::string> fixture_names();

// Loads a fixture after checking every file against the manifest.
Fixture load_fixture(const std::string& name);

std::string sha256_hex(std::string_view data);
std::string read_file(const std::string& path);

}  // namespace perfloop::fixtures
