#include "dfx/observations.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "dfx/csv.hpp"
#include "dfx/error.hpp"
#include "dfx/features.hpp"

namespace dfx {

namespace {

using Moderator = std::optional<double>;

Moderator indicator(bool v) { return v ? 1.0 : 0.0; }

Moderator from_band(const std::map<std::string, Band>& bands, const std::string& key) {
  auto it = bands.find(key);
  if (it == bands.end()) return std::nullopt;
  switch (it->second) {
    case Band::low_quartile: return 1.0;
    case Band::high_quartile: return 0.0;
    case Band::middle: return std::nullopt;
  }
  return std::nullopt;
}

// A split that cannot be formed leaves every row missing for that moderator.
std::map<std::string, Band> try_split(const std::map<std::string, double>& values) {
  try {
    return percentile_split(values);
  } catch (const Error& e) {
    if (e.kind() != Errc::sample_size) throw;
    return {};
  }
}

struct Pending {
  const TrialRecord* trial;
  const GuessRecord* guess;
  const Session* session;
  const ImageRecord* image;
};

}  // namespace

std::vector<ObservationRow> build_observations(const LogState& log,
                                               const FeatureTable& features,
                                               const BuildOptions& options) {
  std::vector<Pending> pending;
  pending.reserve(log.guesses().size());
  for (const auto& trial_id : log.guess_order()) {
    const auto* guess = log.find_guess(trial_id);
    const auto* trial = log.find_trial(trial_id);
    if (!trial || !guess)
      fail(Errc::integrity, "guess references unknown trial " + trial_id.str());
    const auto* session = log.find_session(trial->session_id);
    if (!session)
      fail(Errc::integrity, "trial " + trial_id.str() + " references unknown session");
    auto img = features.find(trial->manipulated_image_id);
    if (img == features.end())
      fail(Errc::integrity, "feature table has no entry for image " +
                                trial->manipulated_image_id.str());
    if (img->second.kind == ImageKind::control_original)
      fail(Errc::integrity, "image " + img->first.str() +
                                " is an original but occupies the designated slot");
    if (auto ctl = features.find(trial->control_image_id);
        ctl != features.end() && ctl->second.kind != ImageKind::control_original)
      fail(Errc::integrity, "image " + ctl->first.str() + " is not an original");
    if (img->second.kind == ImageKind::control_untouched && !options.include_control_untouched)
      continue;
    pending.push_back({trial, guess, &session->session, &img->second});
  }
  std::sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) {
    return std::tie(a.trial->session_id, a.trial->position) <
           std::tie(b.trial->session_id, b.trial->position);
  });

  // Image-level and participant-level aggregates.
  std::map<std::string, std::pair<double, double>> image_hits;  // correct, total
  std::map<std::string, double> mask_by_image, entropy_by_image;
  std::map<std::string, std::uint32_t> guesses_by_participant;
  std::map<std::string, double> time_first_ten;
  std::map<std::string, bool> first_correct;
  for (const auto& p : pending) {
    const auto& pid = p.trial->session_id.str();
    guesses_by_participant[pid] += 1;
    if (p.trial->position <= 10) time_first_ten[pid] += static_cast<double>(p.guess->elapsed_ms);
    if (p.trial->position == 1) first_correct[pid] = p.guess->correct;
    if (p.image->kind != ImageKind::manipulated) continue;
    const auto& iid = p.image->image_id.str();
    auto& hits = image_hits[iid];
    hits.first += p.guess->correct ? 1.0 : 0.0;
    hits.second += 1.0;
    mask_by_image[iid] = p.image->mask_fraction;
    entropy_by_image[iid] = p.image->delentropy;
  }
  std::map<std::string, double> accuracy_by_image;
  for (const auto& [iid, h] : image_hits) accuracy_by_image[iid] = h.first / h.second;
  for (auto it = time_first_ten.begin(); it != time_first_ten.end();) {
    if (guesses_by_participant[it->first] < 10) it = time_first_ten.erase(it);
    else ++it;
  }
  const auto accuracy_bands = try_split(accuracy_by_image);
  const auto mask_bands = try_split(mask_by_image);
  const auto entropy_bands = try_split(entropy_by_image);
  const auto time_bands = try_split(time_first_ten);

  std::vector<ObservationRow> rows;
  rows.reserve(pending.size());
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& p : pending) {
    ObservationRow row;
    const auto& pid = p.trial->session_id.str();
    const auto& iid = p.image->image_id.str();
    row.accuracy = p.guess->correct ? 1 : 0;
    row.position = p.trial->position;
    row.participant_key = pid;
    row.image_key = iid;
    row.control_untouched = p.image->kind == ImageKind::control_untouched;
    row.repeat_view = !seen.emplace(pid, iid).second;

    const bool manipulated = p.image->kind == ImageKind::manipulated;
    auto& m = row.moderators;
    m["subjective_quality_high"] =
        p.image->subjective_quality ? indicator(*p.image->subjective_quality == Quality::high)
                                    : std::nullopt;
    m["low_accuracy_image"] = manipulated ? from_band(accuracy_bands, iid) : std::nullopt;
    m["small_mask"] = manipulated ? from_band(mask_bands, iid) : std::nullopt;
    m["low_entropy"] = manipulated ? from_band(entropy_bands, iid) : std::nullopt;
    m["one_object"] = p.image->object_count == 0 ? std::nullopt
                                                 : indicator(p.image->object_count == 1);
    auto fc = first_correct.find(pid);
    m["first_correct"] = fc == first_correct.end() ? std::nullopt : indicator(fc->second);
    m["has_person"] = indicator(p.image->has_person);
    m["fast_completion"] = from_band(time_bands, pid);
    switch (p.session->device_class) {
      case DeviceClass::mobile: m["mobile"] = 1.0; break;
      case DeviceClass::desktop: m["mobile"] = 0.0; break;
      case DeviceClass::unknown: m["mobile"] = std::nullopt; break;
    }
    m["right_placement"] = indicator(p.trial->placement == Placement::manipulated_right);
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kFixedColumns[] = {"participant_key", "image_key", "position",
                                         "accuracy", "repeat_view", "control_untouched"};

}  // namespace

std::string format_observations(const std::vector<ObservationRow>& rows) {
  std::set<std::string, std::less<>> names(std::begin(kModerators), std::end(kModerators));
  for (const auto& r : rows)
    for (const auto& [k, v] : r.moderators) names.insert(k);
  std::vector<std::string> ordered(std::begin(kModerators), std::end(kModerators));
  for (const auto& n : names)
    if (!is_known_moderator(n)) ordered.push_back(n);

  std::ostringstream out;
  for (const char* c : kFixedColumns) out << c << ',';
  for (std::size_t i = 0; i < ordered.size(); ++i) out << ordered[i] << (i + 1 < ordered.size() ? "," : "\n");
  for (const auto& r : rows) {
    out << r.participant_key << ',' << r.image_key << ',' << r.position << ',' << r.accuracy
        << ',' << (r.repeat_view ? 1 : 0) << ',' << (r.control_untouched ? 1 : 0);
    for (const auto& n : ordered) {
      const auto v = r.moderator(n);
      out << ',' << (v ? csv::format(*v) : "NA");
    }
    out << '\n';
  }
  return out.str();
}

std::vector<ObservationRow> parse_observations(std::string_view text, std::string_view source) {
  const auto t = csv::parse(text, source);
  std::vector<std::size_t> fixed;
  for (const char* c : kFixedColumns) fixed.push_back(t.require(c));
  std::vector<std::pair<std::size_t, std::string>> moderator_cols;
  for (std::size_t i = 0; i < t.header.size(); ++i)
    if (std::find(fixed.begin(), fixed.end(), i) == fixed.end())
      moderator_cols.emplace_back(i, t.header[i]);

  std::vector<ObservationRow> rows;
  rows.reserve(t.rows.size());
  for (const auto& f : t.rows) {
    ObservationRow r;
    r.participant_key = f[fixed[0]];
    r.image_key = f[fixed[1]];
    const auto pos = csv::parse_int(f[fixed[2]], "position");
    if (pos < 1) fail(Errc::validation, "position must be >= 1");
    r.position = static_cast<std::uint32_t>(pos);
    const auto acc = csv::parse_int(f[fixed[3]], "accuracy");
    if (acc != 0 && acc != 1) fail(Errc::validation, "accuracy must be 0 or 1");
    r.accuracy = static_cast<int>(acc);
    r.repeat_view = csv::parse_bool(f[fixed[4]], "repeat_view");
    r.control_untouched = csv::parse_bool(f[fixed[5]], "control_untouched");
    for (const auto& [idx, name] : moderator_cols) {
      const auto& cell = f[idx];
      r.moderators[name] = (cell == "NA" || cell.empty())
                               ? std::nullopt
                               : std::optional<double>(csv::parse_double(cell, name));
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_observations(const std::filesystem::path& path,
                        const std::vector<ObservationRow>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io, "cannot write " + path.string());
  out << format_observations(rows);
}

std::vector<ObservationRow> read_observations(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_observations(buf.str(), path.string());
}

}  // namespace dfx
