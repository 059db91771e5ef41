#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>

#include "rlfa/audit_session.hpp"
#include "rlfa/errors.hpp"
#include "rlfa/population.hpp"

namespace rlfa {

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

// HTTP status used for an engine error of `kind`.
int http_status(ErrorKind kind) noexcept;

// Session registry behind the HTTP endpoints. Requests on different sessions
// run concurrently; requests on one session are serialized.
class SessionStore {
 public:
  // With a persistence directory, populations and sessions found there are
  // loaded and every mutation is written back.
  explicit SessionStore(std::optional<std::filesystem::path> persist_dir = std::nullopt);

  // `target` is the request path including any query string.
  ApiResponse handle_request(std::string_view method, std::string_view target,
                             std::string_view body);

  std::size_t session_count() const;
  std::size_t population_count() const;

 private:
  struct Slot {
    std::mutex mutex;
    std::unique_ptr<AuditSession> session;
  };

  ApiResponse create_population(std::string_view body);
  ApiResponse create_session(std::string_view body);
  ApiResponse get_session(Slot& slot);
  ApiResponse draw(Slot& slot);
  ApiResponse observe(Slot& slot, std::string_view body);
  ApiResponse trace(Slot& slot);
  ApiResponse remaining(Slot& slot);
  ApiResponse test(Slot& slot, std::string_view query);

  std::shared_ptr<Slot> find_session(const std::string& id) const;
  void persist(const AuditSession& session) const;
  void load_persisted();

  std::optional<std::filesystem::path> persist_dir_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<const Population>> populations_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
  std::uint64_t next_population_ = 1;
  std::uint64_t next_session_ = 1;
};

// Serves `store` over HTTP/1.1 until the process is stopped.
void serve(SessionStore& store, const std::string& host, int port);

}  // namespace rlfa
