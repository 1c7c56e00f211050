#pragma once

// Append-only experiment log. Each line of the backing file is one JSON object
// with a `record_type` discriminator (session, trial, guess, abandon) and the
// record's fields under their lowercase names.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dfx/model.hpp"

namespace dfx {

std::string serialize(const LogRecord& record);
LogRecord parse_record(std::string_view line);

struct SessionState {
  Session session;  // trials_served counts live (non-abandoned) trials
  std::uint32_t trials_abandoned = 0;
  std::optional<TrialId> outstanding;
  std::uint32_t guesses = 0;
  std::uint32_t correct = 0;

  /// Running accuracy over answered trials; 0 before the first guess.
  double running_accuracy() const noexcept {
    return guesses == 0 ? 0.0 : static_cast<double>(correct) / guesses;
  }

  friend bool operator==(const SessionState&, const SessionState&) = default;
};

/// State reconstructed by folding log records in order.
class LogState {
 public:
  /// Throws without modifying state if `record` would violate an invariant.
  void check(const LogRecord& record) const;
  void apply(const LogRecord& record);

  const SessionState* find_session(const SessionId& id) const;
  const TrialRecord* find_trial(const TrialId& id) const;
  const GuessRecord* find_guess(const TrialId& id) const;
  bool is_abandoned(const TrialId& id) const { return abandoned_.contains(id); }

  const std::map<SessionId, SessionState>& sessions() const { return sessions_; }
  const std::map<TrialId, TrialRecord>& trials() const { return trials_; }
  const std::map<TrialId, GuessRecord>& guesses() const { return guesses_; }
  /// Trial ids in the order their guesses were logged.
  const std::vector<TrialId>& guess_order() const { return guess_order_; }
  std::size_t record_count() const noexcept { return record_count_; }

  friend bool operator==(const LogState&, const LogState&) = default;

 private:
  std::map<SessionId, SessionState> sessions_;
  std::map<TrialId, TrialRecord> trials_;
  std::map<TrialId, GuessRecord> guesses_;
  std::vector<TrialId> guess_order_;
  std::set<TrialId> abandoned_;
  std::size_t record_count_ = 0;
};

/// Folds records in order into a fresh state.
LogState fold(const std::vector<LogRecord>& records);

/// Reads a log file and folds it; throws on malformed lines or invariant
/// violations, reporting the offending line number.
LogState replay(const std::filesystem::path& path);
std::vector<LogRecord> read_log(const std::filesystem::path& path);
void write_log(const std::filesystem::path& path,
               const std::vector<LogRecord>& records);

struct Ack {
  std::size_t sequence = 0;  // 1-based index of the appended record
};

/// Single-writer log. Appends are serialized and validated against the
/// current state before being written and flushed.
class ExperimentLog {
 public:
  ExperimentLog() = default;
  /// Replays an existing file (if any) and appends subsequent records to it.
  /// An empty optional gives an in-memory log.
  explicit ExperimentLog(std::optional<std::filesystem::path> path);

  ExperimentLog(const ExperimentLog&) = delete;
  ExperimentLog& operator=(const ExperimentLog&) = delete;

  Ack append(const LogRecord& record);

  LogState snapshot() const;
  std::vector<LogRecord> records() const;
  std::size_t size() const;

  /// Runs `fn(const LogState&)` under the writer lock.
  template <typename Fn>
  decltype(auto) inspect(Fn&& fn) const {
    std::lock_guard lock(mutex_);
    return fn(state_);
  }

 private:
  mutable std::mutex mutex_;
  LogState state_;
  std::vector<LogRecord> records_;
  std::optional<std::filesystem::path> path_;
  std::ofstream out_;
};

struct PositionStat {
  std::uint32_t position = 0;
  std::uint64_t guesses = 0;
  std::uint64_t correct = 0;
  double accuracy = 0.0;

  friend bool operator==(const PositionStat&, const PositionStat&) = default;
};

struct LogSummary {
  std::uint64_t guess_count = 0;
  std::uint64_t unique_sessions = 0;  // sessions with at least one guess
  double mean_accuracy = 0.0;
  std::vector<PositionStat> per_position;  // ascending, observed positions only

  friend bool operator==(const LogSummary&, const LogSummary&) = default;
};

LogSummary summarize(const LogState& state);

}  // namespace dfx
