#include "dfx/log.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <type_traits>

#include "dfx/error.hpp"

namespace dfx {

using nlohmann::json;

namespace {

template <typename... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

json to_json_object(const LogRecord& record) {
  return std::visit(
      overloaded{
          [](const Session& s) {
            return json{{"record_type", "session"},
                        {"session_id", s.session_id.str()},
                        {"device_class", to_string(s.device_class)},
                        {"trials_served", s.trials_served},
                        {"created_at", s.created_at}};
          },
          [](const TrialRecord& t) {
            return json{{"record_type", "trial"},
                        {"trial_id", t.trial_id.str()},
                        {"session_id", t.session_id.str()},
                        {"manipulated_image_id", t.manipulated_image_id.str()},
                        {"control_image_id", t.control_image_id.str()},
                        {"placement", to_string(t.placement)},
                        {"position", t.position},
                        {"served_at", t.served_at}};
          },
          [](const GuessRecord& g) {
            return json{{"record_type", "guess"},
                        {"trial_id", g.trial_id.str()},
                        {"chosen_side", to_string(g.chosen_side)},
                        {"correct", g.correct},
                        {"elapsed_ms", g.elapsed_ms},
                        {"recorded_at", g.recorded_at}};
          },
          [](const AbandonRecord& a) {
            return json{{"record_type", "abandon"},
                        {"trial_id", a.trial_id.str()},
                        {"recorded_at", a.recorded_at}};
          },
      },
      record);
}

template <typename T>
T field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end())
    fail(Errc::parse, std::string("log record missing field '") + name + "'");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    fail(Errc::parse, std::string("log field '") + name + "': " + e.what());
  }
}

}  // namespace

std::string serialize(const LogRecord& record) {
  return to_json_object(record).dump();
}

LogRecord parse_record(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    fail(Errc::parse, std::string("malformed log line: ") + e.what());
  }
  if (!j.is_object()) fail(Errc::parse, "log line is not an object");
  const auto type = field<std::string>(j, "record_type");
  if (type == "session") {
    Session s;
    s.session_id = SessionId(field<std::string>(j, "session_id"));
    s.device_class = parse_device_class(field<std::string>(j, "device_class"));
    s.trials_served = field<std::uint32_t>(j, "trials_served");
    s.created_at = field<TimestampMs>(j, "created_at");
    return s;
  }
  if (type == "trial") {
    TrialRecord t;
    t.trial_id = TrialId(field<std::string>(j, "trial_id"));
    t.session_id = SessionId(field<std::string>(j, "session_id"));
    t.manipulated_image_id = ImageId(field<std::string>(j, "manipulated_image_id"));
    t.control_image_id = ImageId(field<std::string>(j, "control_image_id"));
    t.placement = parse_placement(field<std::string>(j, "placement"));
    t.position = field<std::uint32_t>(j, "position");
    t.served_at = field<TimestampMs>(j, "served_at");
    return t;
  }
  if (type == "guess") {
    GuessRecord g;
    g.trial_id = TrialId(field<std::string>(j, "trial_id"));
    g.chosen_side = parse_side(field<std::string>(j, "chosen_side"));
    g.correct = field<bool>(j, "correct");
    g.elapsed_ms = field<std::int64_t>(j, "elapsed_ms");
    g.recorded_at = field<TimestampMs>(j, "recorded_at");
    return g;
  }
  if (type == "abandon") {
    AbandonRecord a;
    a.trial_id = TrialId(field<std::string>(j, "trial_id"));
    a.recorded_at = field<TimestampMs>(j, "recorded_at");
    return a;
  }
  fail(Errc::parse, "unknown record_type '" + type + "'");
}

// ---------------------------------------------------------------------------

const SessionState* LogState::find_session(const SessionId& id) const {
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : &it->second;
}

const TrialRecord* LogState::find_trial(const TrialId& id) const {
  auto it = trials_.find(id);
  return it == trials_.end() ? nullptr : &it->second;
}

const GuessRecord* LogState::find_guess(const TrialId& id) const {
  auto it = guesses_.find(id);
  return it == guesses_.end() ? nullptr : &it->second;
}

void LogState::check(const LogRecord& record) const {
  std::visit(
      overloaded{
          [&](const Session& s) {
            if (s.session_id.empty()) fail(Errc::validation, "session with empty id");
            if (s.trials_served != 0)
              fail(Errc::validation, "new session " + s.session_id.str() +
                                         " must have trials_served = 0");
            if (sessions_.contains(s.session_id))
              fail(Errc::duplicate, "session " + s.session_id.str() + " already exists");
          },
          [&](const TrialRecord& t) {
            if (t.trial_id.empty()) fail(Errc::validation, "trial with empty id");
            if (trials_.contains(t.trial_id))
              fail(Errc::duplicate, "trial " + t.trial_id.str() + " already exists");
            if (t.manipulated_image_id.empty() || t.control_image_id.empty())
              fail(Errc::validation, "trial " + t.trial_id.str() + " lacks an image");
            if (t.manipulated_image_id == t.control_image_id)
              fail(Errc::validation, "trial " + t.trial_id.str() + " pairs an image with itself");
            const auto* s = find_session(t.session_id);
            if (!s)
              fail(Errc::integrity, "trial " + t.trial_id.str() +
                                        " references unknown session " + t.session_id.str());
            if (s->outstanding)
              fail(Errc::validation, "session " + t.session_id.str() +
                                         " has an unanswered trial " + s->outstanding->str());
            if (t.position != s->session.trials_served + 1)
              fail(Errc::validation,
                   "trial " + t.trial_id.str() + " has position " +
                       std::to_string(t.position) + ", expected " +
                       std::to_string(s->session.trials_served + 1));
          },
          [&](const GuessRecord& g) {
            const auto* t = find_trial(g.trial_id);
            if (!t)
              fail(Errc::integrity, "guess references unknown trial " + g.trial_id.str());
            if (guesses_.contains(g.trial_id))
              fail(Errc::duplicate, "trial " + g.trial_id.str() + " already answered");
            if (abandoned_.contains(g.trial_id))
              fail(Errc::rejected, "trial " + g.trial_id.str() + " was abandoned");
            if (g.elapsed_ms < 0)
              fail(Errc::validation, "guess for " + g.trial_id.str() + " has negative elapsed_ms");
            if (g.correct != (g.chosen_side == manipulated_side(t->placement)))
              fail(Errc::validation,
                   "guess for " + g.trial_id.str() + " has inconsistent correctness");
          },
          [&](const AbandonRecord& a) {
            const auto* t = find_trial(a.trial_id);
            if (!t)
              fail(Errc::integrity, "abandon references unknown trial " + a.trial_id.str());
            if (guesses_.contains(a.trial_id))
              fail(Errc::validation, "answered trial " + a.trial_id.str() + " cannot be abandoned");
            if (abandoned_.contains(a.trial_id))
              fail(Errc::duplicate, "trial " + a.trial_id.str() + " already abandoned");
          },
      },
      record);
}

void LogState::apply(const LogRecord& record) {
  check(record);
  std::visit(
      overloaded{
          [&](const Session& s) { sessions_.emplace(s.session_id, SessionState{s, 0, std::nullopt, 0, 0}); },
          [&](const TrialRecord& t) {
            auto& s = sessions_.at(t.session_id);
            s.session.trials_served += 1;
            s.outstanding = t.trial_id;
            trials_.emplace(t.trial_id, t);
          },
          [&](const GuessRecord& g) {
            const auto& t = trials_.at(g.trial_id);
            auto& s = sessions_.at(t.session_id);
            if (s.outstanding == g.trial_id) s.outstanding.reset();
            s.guesses += 1;
            s.correct += g.correct ? 1 : 0;
            guesses_.emplace(g.trial_id, g);
            guess_order_.push_back(g.trial_id);
          },
          [&](const AbandonRecord& a) {
            const auto& t = trials_.at(a.trial_id);
            auto& s = sessions_.at(t.session_id);
            if (s.outstanding == a.trial_id) s.outstanding.reset();
            s.session.trials_served -= 1;
            s.trials_abandoned += 1;
            abandoned_.insert(a.trial_id);
          },
      },
      record);
  ++record_count_;
}

LogState fold(const std::vector<LogRecord>& records) {
  LogState state;
  for (const auto& r : records) state.apply(r);
  return state;
}

std::vector<LogRecord> read_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io, "cannot open log " + path.string());
  std::vector<LogRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      records.push_back(parse_record(line));
    } catch (const Error& e) {
      fail(e.kind(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

LogState replay(const std::filesystem::path& path) {
  LogState state;
  std::size_t n = 0;
  for (const auto& r : read_log(path)) {
    ++n;
    try {
      state.apply(r);
    } catch (const Error& e) {
      fail(e.kind(), path.string() + ": record " + std::to_string(n) + ": " + e.what());
    }
  }
  return state;
}

void write_log(const std::filesystem::path& path, const std::vector<LogRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io, "cannot write log " + path.string());
  for (const auto& r : records) out << serialize(r) << '\n';
  if (!out) fail(Errc::io, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------

ExperimentLog::ExperimentLog(std::optional<std::filesystem::path> path) : path_(std::move(path)) {
  if (!path_) return;
  if (std::filesystem::exists(*path_)) {
    records_ = read_log(*path_);
    for (const auto& r : records_) state_.apply(r);
  }
  out_.open(*path_, std::ios::binary | std::ios::app);
  if (!out_) fail(Errc::io, "cannot open log " + path_->string() + " for append");
}

Ack ExperimentLog::append(const LogRecord& record) {
  std::lock_guard lock(mutex_);
  state_.check(record);
  if (path_) {
    out_ << serialize(record) << '\n';
    out_.flush();
    if (!out_) fail(Errc::io, "append failed for " + path_->string());
  }
  state_.apply(record);
  records_.push_back(record);
  return Ack{records_.size()};
}

LogState ExperimentLog::snapshot() const {
  std::lock_guard lock(mutex_);
  return state_;
}

std::vector<LogRecord> ExperimentLog::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::size_t ExperimentLog::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

// ---------------------------------------------------------------------------

LogSummary summarize(const LogState& state) {
  LogSummary out;
  std::map<std::uint32_t, PositionStat> by_position;
  std::set<SessionId> active;
  std::uint64_t correct = 0;
  for (const auto& [trial_id, guess] : state.guesses()) {
    const auto& trial = *state.find_trial(trial_id);
    active.insert(trial.session_id);
    auto& p = by_position[trial.position];
    p.position = trial.position;
    p.guesses += 1;
    p.correct += guess.correct ? 1 : 0;
    correct += guess.correct ? 1 : 0;
  }
  out.guess_count = state.guesses().size();
  out.unique_sessions = active.size();
  out.mean_accuracy = out.guess_count == 0
                          ? 0.0
                          : static_cast<double>(correct) / static_cast<double>(out.guess_count);
  for (auto& [pos, p] : by_position) {
    p.accuracy = static_cast<double>(p.correct) / static_cast<double>(p.guesses);
    out.per_position.push_back(p);
  }
  return out;
}

}  // namespace dfx
