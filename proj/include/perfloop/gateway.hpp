#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "perfloop/refactor_model.hpp"
#include "perfloop/session_engine.hpp"

namespace httplib {
class Server;
}

namespace perfloop::gateway {

// Canonical text of every response body and CLI record.
std::string render(const nlohmann::json& doc);

// Accepts a JSON action object or the shorthands "clone:<component>" and
// "move:<component>/<operation>".
refactor::RefactoringAction parse_action(std::string_view text);

// CLI entry point; returns the process exit status.
int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err);

struct ApiSession {
  std::string id;
  std::int64_t created_at = 0;  // unix seconds
  std::mutex writer;            // held for the duration of a mutation
  std::shared_ptr<const session::SessionState> state;

  std::shared_ptr<const session::SessionState> snapshot() const { return std::atomic_load(&state); }
  void publish(std::shared_ptr<const session::SessionState> next) { std::atomic_store(&state, std::move(next)); }
};

class SessionRegistry {
 public:
  std::shared_ptr<ApiSession> create(session::SessionState state);
  std::shared_ptr<ApiSession> find(const std::string& id) const;
  std::vector<std::string> ids() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<ApiSession>> sessions_;
  std::uint64_t counter_ = 0;
};

// Installs every route on `server`.
void mount(httplib::Server& server, SessionRegistry& registry);

// Blocking HTTP server.
int serve(int port, std::ostream& log);

}  // namespace perfloop::gateway
