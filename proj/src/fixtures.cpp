#include "perfloop/fixtures.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "perfloop/error.hpp"

#ifndef PERFLOOP_FIXTURE_DIR
#define PERFLOOP_FIXTURE_DIR "fixtures"
#endif

namespace perfloop::fixtures {

using nlohmann::json;

std::string fixture_dir() {
  if (const char* env = std::getenv("PERFLOOP_FIXTURES"); env && *env) return env;
  return PERFLOOP_FIXTURE_DIR;
}

std::vector<std::string> fixture_names() { return {"eshopper", "trainticket-subset", "mm1", "two-station"}; }

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw NotFoundError("cannot read " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

session::SessionConfig Fixture::session_config() const { return session::config_from_json(run_config); }

Fixture load_fixture(const std::string& name) {
  auto names = fixture_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) throw NotFoundError("unknown fixture " + name);

  auto dir = fixture_dir();
  json manifest;
  try {
    manifest = json::parse(read_file(dir + "/manifest.json"));
  } catch (const json::exception& e) {
    throw ParseError(std::string("fixture manifest: ") + e.what());
  }

  auto checked = [&](const std::string& file) {
    auto rel = name + "/" + file;
    auto text = read_file(dir + "/" + rel);
    auto expected = manifest.at("files").value(rel, "");
    if (expected.empty()) throw ValidationError("fixture manifest has no entry for " + rel);
    if (sha256_hex(text) != expected) throw ValidationError("fixture " + rel + " does not match its manifest checksum");
    return text;
  };

  Fixture f;
  f.name = name;
  f.model = arch::load_model(checked("model.json"));
  try {
    f.run_config = json::parse(checked("run.json"));
    f.expected = json::parse(checked("expected.json"));
  } catch (const json::exception& e) {
    throw ParseError("fixture " + name + ": " + e.what());
  }
  return f;
}

}  // namespace perfloop::fixtures
