#include "dfx/service.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dfx/error.hpp"
#include "dfx/random.hpp"

namespace dfx {

using nlohmann::json;

DeviceClass classify_device(std::string_view hint) {
  std::string h(hint);
  std::transform(h.begin(), h.end(), h.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (h.empty()) return DeviceClass::unknown;
  for (const char* tok : {"mobile", "iphone", "ipad", "ipod", "android", "windows phone", "blackberry"})
    if (h.find(tok) != std::string::npos) return DeviceClass::mobile;
  for (const char* tok : {"desktop", "windows nt", "macintosh", "x11", "linux", "cros"})
    if (h.find(tok) != std::string::npos) return DeviceClass::desktop;
  return DeviceClass::unknown;
}

TimestampMs utc_now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

ExperimentService::ExperimentService(ServiceConfig config)
    : config_(std::move(config)),
      log_(config_.log_path) {
  config_.pools.validate();
  token_counter_ = log_.inspect([](const LogState& s) { return s.sessions().size(); });
}

std::mutex& ExperimentService::session_lock(const SessionId& token) {
  std::lock_guard lock(locks_mutex_);
  auto& slot = session_locks_[token];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

SessionState ExperimentService::require_session(const SessionId& token) const {
  auto s = log_.inspect([&](const LogState& st) -> std::optional<SessionState> {
    const auto* found = st.find_session(token);
    return found ? std::optional<SessionState>(*found) : std::nullopt;
  });
  if (!s) fail(Errc::auth, "unknown session token");
  return *s;
}

SessionId ExperimentService::create_session(std::string_view device_hint) {
  std::lock_guard lock(token_mutex_);
  const auto key = derive_key(config_.pools.rng_seed, fnv1a64("session-token"));
  SessionId id;
  do {
    char buf[24];
    std::snprintf(buf, sizeof buf, "s%016llx",
                  static_cast<unsigned long long>(mix64(key ^ token_counter_++)));
    id = SessionId(buf);
  } while (log_.inspect([&](const LogState& s) { return s.find_session(id) != nullptr; }));
  log_.append(Session{id, classify_device(device_hint), 0, config_.clock()});
  return id;
}

ApiTrialPayload ExperimentService::get_trial(const SessionId& token) {
  require_session(token);
  std::lock_guard lock(session_lock(token));
  auto state = require_session(token);
  if (state.outstanding) {
    log_.append(AbandonRecord{*state.outstanding, config_.clock()});
    state = require_session(token);
  }
  const auto trial = next_trial(state.session, config_.pools, config_.clock(), state.trials_abandoned);
  log_.append(trial);

  ApiTrialPayload p;
  p.trial_id = trial.trial_id;
  p.position = trial.position;
  const auto designated = config_.asset_prefix + trial.manipulated_image_id.str();
  const auto original = config_.asset_prefix + trial.control_image_id.str();
  const bool left = trial.placement == Placement::manipulated_left;
  p.left_image_url = left ? designated : original;
  p.right_image_url = left ? original : designated;
  return p;
}

ApiGuessResult ExperimentService::post_guess(const SessionId& token, const TrialId& trial_id,
                                             Side chosen_side, std::int64_t elapsed_ms) {
  require_session(token);
  std::lock_guard lock(session_lock(token));
  const auto trial = log_.inspect([&](const LogState& s) -> std::optional<TrialRecord> {
    const auto* t = s.find_trial(trial_id);
    return t ? std::optional<TrialRecord>(*t) : std::nullopt;
  });
  if (!trial || trial->session_id != token)
    fail(Errc::rejected, "trial does not belong to this session");
  const auto [scored, is_current] = log_.inspect([&](const LogState& s) {
    auto sg = score_guess(*trial, chosen_side, elapsed_ms, config_.clock(), s);
    const auto* st = s.find_session(token);
    return std::make_pair(sg, st->outstanding == trial_id);
  });
  if (!is_current) fail(Errc::rejected, "trial is no longer the session's current trial");
  log_.append(scored.guess);
  const auto state = require_session(token);
  return ApiGuessResult{scored.guess.correct, scored.manipulated_side, state.running_accuracy(),
                        trial->position};
}

LogSummary ExperimentService::get_stats() const {
  return log_.inspect([](const LogState& s) { return summarize(s); });
}

std::optional<std::filesystem::path> ExperimentService::asset_path(const ImageId& id) const {
  const auto* e = config_.pools.find(id);
  if (!e || e->path.empty()) return std::nullopt;
  return std::filesystem::path(e->path);
}

// ---------------------------------------------------------------------------

namespace {

int status_for(Errc kind) {
  switch (kind) {
    case Errc::auth: return 401;
    case Errc::duplicate:
    case Errc::rejected: return 409;
    case Errc::validation:
    case Errc::parse: return 400;
    default: return 500;
  }
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e) {
  send_json(res, {{"error", std::string(to_string(e.kind()))}, {"message", e.what()}},
            status_for(e.kind()));
}

SessionId bearer(const httplib::Request& req) {
  const auto auth = req.get_header_value("Authorization");
  constexpr std::string_view prefix = "Bearer ";
  if (auth.size() <= prefix.size() || auth.compare(0, prefix.size(), prefix) != 0)
    fail(Errc::auth, "missing bearer token");
  return SessionId(auth.substr(prefix.size()));
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    auto j = json::parse(req.body);
    if (!j.is_object()) fail(Errc::parse, "request body must be an object");
    return j;
  } catch (const json::exception& e) {
    fail(Errc::parse, std::string("malformed request body: ") + e.what());
  }
}

json summary_json(const LogSummary& s) {
  json per = json::array();
  for (const auto& p : s.per_position)
    per.push_back({{"position", p.position}, {"guesses", p.guesses}, {"accuracy", p.accuracy}});
  return {{"guess_count", s.guess_count},
          {"unique_sessions", s.unique_sessions},
          {"mean_accuracy", s.mean_accuracy},
          {"per_position", per}};
}

std::string content_type_for(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".pgm" || ext == ".ppm") return "image/x-portable-anymap";
  return "application/octet-stream";
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    send_error(res, e);
  } catch (const json::exception& e) {
    send_error(res, Error(Errc::parse, e.what()));
  } catch (const std::exception& e) {
    send_json(res, {{"error", "internal"}, {"message", e.what()}}, 500);
  }
}

}  // namespace

struct HttpServer::Impl {
  ExperimentService& service;
  httplib::Server server;

  explicit Impl(ExperimentService& s) : service(s) {
    server.Post("/api/session", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto body = parse_body(req);
        std::string hint = body.value("device_hint", std::string());
        if (hint.empty()) hint = req.get_header_value("User-Agent");
        send_json(res, {{"token", service.create_session(hint).str()}});
      });
    });
    server.Get("/api/trial", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto p = service.get_trial(bearer(req));
        send_json(res, {{"trial_id", p.trial_id.str()},
                        {"left_image_url", p.left_image_url},
                        {"right_image_url", p.right_image_url},
                        {"position", p.position}});
      });
    });
    server.Post("/api/guess", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto token = bearer(req);
        const auto body = parse_body(req);
        if (!body.contains("trial_id") || !body.contains("chosen_side"))
          fail(Errc::validation, "guess needs trial_id and chosen_side");
        const auto r = service.post_guess(token, TrialId(body.at("trial_id").get<std::string>()),
                                          parse_side(body.at("chosen_side").get<std::string>()),
                                          body.value("elapsed_ms", std::int64_t{0}));
        send_json(res, {{"correct", r.correct},
                        {"manipulated_side", std::string(to_string(r.manipulated_side))},
                        {"running_accuracy", r.running_accuracy},
                        {"position", r.position}});
      });
    });
    server.Get("/api/stats", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] { send_json(res, summary_json(service.get_stats())); });
    });
    server.Get(R"(/assets/([A-Za-z0-9_.\-]+))",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] {
                   const auto path = service.asset_path(ImageId(req.matches[1].str()));
                   std::ifstream in(path.value_or(""), std::ios::binary);
                   if (!path || !in) {
                     send_json(res, {{"error", "not_found"}}, 404);
                     return;
                   }
                   std::ostringstream buf;
                   buf << in.rdbuf();
                   res.set_content(buf.str(), content_type_for(*path));
                 });
               });
  }
};

HttpServer::HttpServer(ExperimentService& service) : impl_(std::make_unique<Impl>(service)) {}
HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::listen_after_bind() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace dfx
