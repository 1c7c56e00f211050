#pragma once

// Live experiment host. ExperimentService holds the session state machine and
// is usable in-process; HttpServer exposes it over HTTP:
//
//   POST /api/session              -> {"token"}
//   GET  /api/trial   (Bearer)     -> {"trial_id","left_image_url","right_image_url","position"}
//   POST /api/guess   (Bearer)     -> {"correct","manipulated_side","running_accuracy","position"}
//   GET  /api/stats                -> {"guess_count","unique_sessions","mean_accuracy","per_position"}
//   GET  /assets/{image_id}        -> image bytes

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "dfx/log.hpp"
#include "dfx/randomizer.hpp"

namespace dfx {

/// Coarse user-agent classification: phone/tablet tokens map to mobile,
/// desktop OS tokens to desktop, anything else (including empty) to unknown.
/// The literal hints "mobile" and "desktop" are accepted as well.
DeviceClass classify_device(std::string_view hint);

TimestampMs utc_now_ms();

struct ServiceConfig {
  DyadPools pools;
  std::optional<std::filesystem::path> log_path;  // in-memory log when unset
  std::function<TimestampMs()> clock = utc_now_ms;
  std::string asset_prefix = "/assets/";
};

struct ApiTrialPayload {
  TrialId trial_id;
  std::string left_image_url;
  std::string right_image_url;
  std::uint32_t position = 0;
};

struct ApiGuessResult {
  bool correct = false;
  Side manipulated_side = Side::left;
  double running_accuracy = 0.0;
  std::uint32_t position = 0;
};

class ExperimentService {
 public:
  /// Validates the pools and replays the log file when one exists.
  explicit ExperimentService(ServiceConfig config);

  SessionId create_session(std::string_view device_hint = {});
  /// Serves the next dyad. An unanswered previous trial is abandoned first.
  /// Unknown tokens throw Errc::auth.
  ApiTrialPayload get_trial(const SessionId& token);
  /// Answers the session's outstanding trial. Foreign or superseded trials
  /// throw Errc::rejected, a second answer throws Errc::duplicate.
  ApiGuessResult post_guess(const SessionId& token, const TrialId& trial_id, Side chosen_side,
                            std::int64_t elapsed_ms);
  LogSummary get_stats() const;

  std::optional<std::filesystem::path> asset_path(const ImageId& id) const;
  const ExperimentLog& log() const noexcept { return log_; }

 private:
  std::mutex& session_lock(const SessionId& token);
  SessionState require_session(const SessionId& token) const;

  ServiceConfig config_;
  ExperimentLog log_;
  std::mutex locks_mutex_;
  std::map<SessionId, std::unique_ptr<std::mutex>> session_locks_;
  std::mutex token_mutex_;
  std::uint64_t token_counter_ = 0;
};

/// HTTP front end over an ExperimentService (which must outlive it).
class HttpServer {
 public:
  explicit HttpServer(ExperimentService& service);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds without serving; port 0 picks a free port. Returns the bound port
  /// or -1.
  int bind(const std::string& host, int port);
  /// Blocks serving requests until stop().
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dfx
