#include "rlfa/api_server.hpp"

#include <httplib.h>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

namespace rlfa {

using nlohmann::json;

namespace {

json interval_json(const Interval& iv) {
  if (iv.empty) return nullptr;
  return json::array({iv.lo, iv.hi});
}

ApiResponse error_response(int status, ErrorKind kind, const std::string& detail) {
  return ApiResponse{status, json{{"error", {{"kind", to_string(kind)}, {"detail", detail}}}}};
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (pos <= path.size()) {
    const std::size_t next = std::min(path.find('/', pos), path.size());
    if (next > pos) parts.emplace_back(path.substr(pos, next - pos));
    pos = next + 1;
  }
  return parts;
}

std::optional<std::string> query_value(std::string_view query, std::string_view key) {
  std::size_t pos = 0;
  while (pos < query.size()) {
    const std::size_t amp = std::min(query.find('&', pos), query.size());
    const std::string_view pair = query.substr(pos, amp - pos);
    const std::size_t eq = pair.find('=');
    if (pair.substr(0, eq) == key) {
      return eq == std::string_view::npos ? std::string() : std::string(pair.substr(eq + 1));
    }
    pos = amp + 1;
  }
  return std::nullopt;
}

json parse_body(std::string_view body) {
  if (body.empty()) return json::object();
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::validation, std::string("malformed JSON body: ") + e.what());
  }
}

json transaction_json(const Population& pop, std::size_t index) {
  return json{{"index", index},
              {"id", pop.ids()[index]},
              {"reported", pop.reported()[index]},
              {"weight", pop.weights()[index]}};
}

void write_atomic(const std::filesystem::path& path, const std::string& contents) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write '" + tmp + "'");
    out << contents;
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::uint64_t id_number(const std::string& id) {
  const auto dash = id.rfind('-');
  std::uint64_t n = 0;
  if (dash != std::string::npos) {
    std::from_chars(id.data() + dash + 1, id.data() + id.size(), n);
  }
  return n;
}

}  // namespace

int http_status(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::validation:
    case ErrorKind::format:
    case ErrorKind::configuration:
      return 400;
    case ErrorKind::not_found:
      return 404;
    case ErrorKind::sequencing:
    case ErrorKind::exhausted:
    case ErrorKind::degenerate_distribution:
    case ErrorKind::impossible_draw:
      return 409;
    case ErrorKind::invariant:
    case ErrorKind::io:
      return 500;
  }
  return 500;
}

SessionStore::SessionStore(std::optional<std::filesystem::path> persist_dir)
    : persist_dir_(std::move(persist_dir)) {
  if (persist_dir_) load_persisted();
}

std::size_t SessionStore::session_count() const {
  std::shared_lock lock(mutex_);
  return sessions_.size();
}

std::size_t SessionStore::population_count() const {
  std::shared_lock lock(mutex_);
  return populations_.size();
}

void SessionStore::load_persisted() {
  namespace fs = std::filesystem;
  fs::create_directories(*persist_dir_ / "populations");
  fs::create_directories(*persist_dir_ / "sessions");
  for (const auto& entry : fs::directory_iterator(*persist_dir_ / "populations")) {
    if (entry.path().extension() != ".csv") continue;
    const std::string id = entry.path().stem().string();
    populations_[id] =
        std::make_shared<const Population>(parse_population_csv(read_file(entry.path())));
    next_population_ = std::max(next_population_, id_number(id) + 1);
  }
  for (const auto& entry : fs::directory_iterator(*persist_dir_ / "sessions")) {
    if (entry.path().extension() != ".json") continue;
    json j;
    try {
      j = json::parse(read_file(entry.path()));
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::format, entry.path().string() + ": " + e.what());
    }
    auto slot = std::make_shared<Slot>();
    slot->session = std::make_unique<AuditSession>(AuditSession::from_json(j));
    const std::string id = slot->session->id();
    next_session_ = std::max(next_session_, id_number(id) + 1);
    sessions_[id] = std::move(slot);
  }
}

void SessionStore::persist(const AuditSession& session) const {
  if (!persist_dir_) return;
  write_atomic(*persist_dir_ / "sessions" / (session.id() + ".json"), session.to_json().dump());
}

std::shared_ptr<SessionStore::Slot> SessionStore::find_session(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorKind::not_found, "unknown session '" + id + "'");
  return it->second;
}

ApiResponse SessionStore::handle_request(std::string_view method, std::string_view target,
                                         std::string_view body) {
  const std::size_t qmark = target.find('?');
  const std::string_view path = target.substr(0, qmark);
  const std::string_view query =
      qmark == std::string_view::npos ? std::string_view() : target.substr(qmark + 1);
  const auto parts = split_path(path);

  try {
    if (parts.size() == 1 && parts[0] == "populations" && method == "POST") {
      return create_population(body);
    }
    if (parts.size() == 1 && parts[0] == "sessions" && method == "POST") {
      return create_session(body);
    }
    if (parts.size() >= 2 && parts.size() <= 3 && parts[0] == "sessions") {
      const std::string action = parts.size() == 3 ? parts[2] : "";
      const bool is_get = method == "GET";
      const bool is_post = method == "POST";
      const bool known = (action.empty() && is_get) || (action == "draw" && is_post) ||
                         (action == "observe" && is_post) || (action == "trace" && is_get) ||
                         (action == "remaining" && is_get) || (action == "test" && is_get);
      if (known) {
        auto slot = find_session(parts[1]);
        std::lock_guard lock(slot->mutex);
        if (action.empty()) return get_session(*slot);
        if (action == "draw") return draw(*slot);
        if (action == "observe") return observe(*slot, body);
        if (action == "trace") return trace(*slot);
        if (action == "remaining") return remaining(*slot);
        return test(*slot, query);
      }
    }
    return error_response(404, ErrorKind::not_found,
                          "no route for " + std::string(method) + " " + std::string(path));
  } catch (const Error& e) {
    return error_response(http_status(e.kind()), e.kind(), e.what());
  } catch (const std::exception& e) {
    return error_response(500, ErrorKind::invariant, e.what());
  }
}

ApiResponse SessionStore::create_population(std::string_view body) {
  auto pop = std::make_shared<const Population>(parse_population_csv(body));
  std::string id;
  {
    std::unique_lock lock(mutex_);
    id = "pop-" + std::to_string(next_population_++);
    populations_[id] = pop;
  }
  if (persist_dir_) write_atomic(*persist_dir_ / "populations" / (id + ".csv"), to_csv(*pop));
  return ApiResponse{201, json{{"population_id", id},
                               {"n", pop->size()},
                               {"total_value", pop->total_value()},
                               {"has_scores", pop->has_scores()},
                               {"has_truth", pop->has_truth()}}};
}

ApiResponse SessionStore::create_session(std::string_view body) {
  const json j = parse_body(body);
  if (!j.is_object() || !j.contains("population_id") || !j["population_id"].is_string()) {
    throw Error(ErrorKind::validation, "population_id is required");
  }
  const std::string pop_id = j["population_id"].get<std::string>();
  std::shared_ptr<const Population> pop;
  {
    std::shared_lock lock(mutex_);
    auto it = populations_.find(pop_id);
    if (it == populations_.end())
      throw Error(ErrorKind::not_found, "unknown population '" + pop_id + "'");
    pop = it->second;
  }
  SessionConfig config = config_from_json(j);
  if (!j.contains("seed")) config.seed = entropy_seed();

  auto slot = std::make_shared<Slot>();
  std::string id;
  {
    std::unique_lock lock(mutex_);
    id = "ses-" + std::to_string(next_session_++);
  }
  slot->session = std::make_unique<AuditSession>(pop, config, id);
  persist(*slot->session);
  {
    std::unique_lock lock(mutex_);
    sessions_[id] = slot;
  }
  return ApiResponse{201, json{{"session_id", id},
                               {"interval", interval_json(slot->session->intervals().combined)},
                               {"seed", config.seed},
                               {"n", pop->size()}}};
}

ApiResponse SessionStore::get_session(Slot& slot) {
  const AuditSession& s = *slot.session;
  json audited = json::array();
  for (const auto& h : s.history().entries()) {
    audited.push_back({{"index", h.index}, {"f", h.f_obs}});
  }
  json pending = json::array();
  for (std::size_t i : s.pending()) pending.push_back(transaction_json(s.population(), i));
  const auto& combined = s.intervals().combined;
  json stopped_at = nullptr;
  if (s.stopped_at()) stopped_at = *s.stopped_at();
  return ApiResponse{200, json{{"session_id", s.id()},
                               {"t", s.t()},
                               {"n", s.population().size()},
                               {"interval", interval_json(combined)},
                               {"width", combined.width()},
                               {"status", to_string(s.status())},
                               {"stopped_at", stopped_at},
                               {"epsilon", s.config().epsilon},
                               {"config", config_to_json(s.config())},
                               {"audited", audited},
                               {"pending", pending}}};
}

ApiResponse SessionStore::draw(Slot& slot) {
  AuditSession& s = *slot.session;
  const auto indices = s.next_draw();
  persist(s);
  json transactions = json::array();
  for (std::size_t i : indices) transactions.push_back(transaction_json(s.population(), i));
  return ApiResponse{200, json{{"indices", indices}, {"t", s.t()}, {"transactions", transactions}}};
}

ApiResponse SessionStore::observe(Slot& slot, std::string_view body) {
  AuditSession& s = *slot.session;
  const json j = parse_body(body);
  if (!j.is_object() || !j.contains("observations") || !j["observations"].is_array()) {
    throw Error(ErrorKind::validation, "observations array is required");
  }
  std::vector<std::pair<std::size_t, double>> obs;
  for (const auto& o : j["observations"]) {
    if (!o.is_object() || !o.contains("index") || !o.contains("f") ||
        !o["index"].is_number_unsigned() || !o["f"].is_number()) {
      throw Error(ErrorKind::validation, "each observation needs integer index and numeric f");
    }
    const double f = o["f"].get<double>();
    if (!(f >= 0.0 && f <= 1.0)) {
      return error_response(422, ErrorKind::validation, "f must lie in [0,1]");
    }
    obs.emplace_back(o["index"].get<std::size_t>(), f);
  }
  const SessionUpdate update = s.record_observation(obs);
  persist(s);
  return ApiResponse{200, json{{"interval", interval_json(update.combined)},
                               {"width", update.width},
                               {"stopped", update.stopped},
                               {"status", to_string(s.status())},
                               {"t", update.t}}};
}

ApiResponse SessionStore::trace(Slot& slot) {
  json steps = json::array();
  for (const auto& e : slot.session->trace()) {
    steps.push_back({{"t", e.t},
                     {"interval", interval_json(e.intervals.combined)},
                     {"width", e.intervals.combined.width()},
                     {"probabilistic", interval_json(e.intervals.prob)},
                     {"logical", interval_json(e.intervals.logical)}});
  }
  return ApiResponse{200, json{{"session_id", slot.session->id()}, {"trace", steps}}};
}

ApiResponse SessionStore::remaining(Slot& slot) {
  const AuditSession& s = *slot.session;
  return ApiResponse{200, json{{"t", s.t()},
                               {"interval", interval_json(s.remaining_fraction_interval())},
                               {"audited_mass", s.history().audited_mass()}}};
}

ApiResponse SessionStore::test(Slot& slot, std::string_view query) {
  const AuditSession& s = *slot.session;
  double epsilon = s.config().epsilon;
  if (auto raw = query_value(query, "epsilon")) {
    char* end = nullptr;
    epsilon = std::strtod(raw->c_str(), &end);
    if (raw->empty() || end != raw->c_str() + raw->size() || !(epsilon >= 0.0 && epsilon <= 1.0)) {
      throw Error(ErrorKind::validation, "epsilon must be a number in [0,1]");
    }
  }
  return ApiResponse{200, json{{"decision", to_string(s.test_assertion(epsilon))},
                               {"epsilon", epsilon},
                               {"t", s.t()}}};
}

void serve(SessionStore& store, const std::string& host, int port) {
  httplib::Server server;
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  auto handler = [&store](const httplib::Request& req, httplib::Response& res) {
    std::string body = req.body;
    if (req.is_multipart_form_data() && !req.files.empty()) {
      body = req.has_file("file") ? req.get_file_value("file").content
                                  : req.files.begin()->second.content;
    }
    const ApiResponse r = store.handle_request(req.method, req.target, body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.Get(".*", handler);
  server.Post(".*", handler);
  server.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  if (!server.listen(host, port)) {
    throw Error(ErrorKind::io, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

}  // namespace rlfa
