#include "dfx/randomizer.hpp"

#include <fstream>
#include <set>

#include "dfx/csv.hpp"
#include "dfx/error.hpp"
#include "dfx/random.hpp"

namespace dfx {

void DyadPools::validate() const {
  if (manipulated_pool.empty()) fail(Errc::configuration, "manipulated pool is empty");
  if (original_pool.empty()) fail(Errc::configuration, "original pool is empty");
  std::set<ImageId> ids;
  for (const auto& e : manipulated_pool) {
    if (e.kind == ImageKind::control_original)
      fail(Errc::configuration, "original " + e.image_id.str() + " listed in manipulated pool");
    if (!ids.insert(e.image_id).second)
      fail(Errc::configuration, "image " + e.image_id.str() + " listed twice");
  }
  for (const auto& e : original_pool) {
    if (e.kind != ImageKind::control_original)
      fail(Errc::configuration, "image " + e.image_id.str() + " in original pool is not an original");
    if (!ids.insert(e.image_id).second)
      fail(Errc::configuration, "image " + e.image_id.str() + " appears in both pools");
  }
  if (control_untouched_weight &&
      !(*control_untouched_weight >= 0.0 && *control_untouched_weight <= 1.0))
    fail(Errc::configuration, "control_untouched weight must lie in [0, 1]");
}

const PoolEntry* DyadPools::find(const ImageId& id) const {
  for (const auto* pool : {&manipulated_pool, &original_pool})
    for (const auto& e : *pool)
      if (e.image_id == id) return &e;
  return nullptr;
}

std::vector<PoolEntry> read_manifest(const std::filesystem::path& path, ImageKind default_kind) {
  const auto t = csv::read(path);
  const auto c_id = t.require("image_id");
  const auto c_path = t.require("path");
  const auto c_kind = t.column("kind");
  std::vector<PoolEntry> out;
  out.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    PoolEntry e;
    e.image_id = ImageId(row[c_id]);
    e.path = row[c_path];
    e.kind = (c_kind && !row[*c_kind].empty()) ? parse_image_kind(row[*c_kind]) : default_kind;
    out.push_back(std::move(e));
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const std::vector<PoolEntry>& entries) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io, "cannot write " + path.string());
  out << "image_id,path,kind\n";
  for (const auto& e : entries) out << e.image_id.str() << ',' << e.path << ',' << to_string(e.kind) << '\n';
}

namespace {

const PoolEntry& draw_designated(const DyadPools& pools, CounterRng& rng) {
  const auto& pool = pools.manipulated_pool;
  if (!pools.control_untouched_weight) return pool[rng.below(pool.size())];
  std::uint64_t n_untouched = 0;
  for (const auto& e : pool) n_untouched += e.kind == ImageKind::control_untouched ? 1 : 0;
  const std::uint64_t n_altered = pool.size() - n_untouched;
  const bool want_control = rng.bernoulli(*pools.control_untouched_weight);
  const bool from_untouched = (want_control && n_untouched > 0) || n_altered == 0;
  auto k = rng.below(from_untouched ? n_untouched : n_altered);
  for (const auto& e : pool) {
    if ((e.kind == ImageKind::control_untouched) != from_untouched) continue;
    if (k-- == 0) return e;
  }
  return pool.front();
}

}  // namespace

TrialRecord next_trial(const Session& session, const DyadPools& pools, TimestampMs served_at,
                       std::uint32_t abandoned) {
  if (pools.manipulated_pool.empty() || pools.original_pool.empty())
    fail(Errc::configuration, "cannot draw a dyad from an empty pool");
  const std::uint32_t position = session.trials_served + 1;
  CounterRng rng(derive_key(pools.rng_seed, fnv1a64(session.session_id.str()), position, abandoned));

  TrialRecord t;
  t.session_id = session.session_id;
  t.position = position;
  t.served_at = served_at;
  t.manipulated_image_id = draw_designated(pools, rng).image_id;
  t.control_image_id = pools.original_pool[rng.below(pools.original_pool.size())].image_id;
  t.placement = rng.below(2) == 0 ? Placement::manipulated_left : Placement::manipulated_right;
  std::string id = session.session_id.str() + "-" + std::to_string(position);
  if (abandoned > 0) id += "-r" + std::to_string(abandoned);
  t.trial_id = TrialId(std::move(id));
  return t;
}

ScoredGuess score_guess(const TrialRecord& trial, Side chosen_side, std::int64_t elapsed_ms,
                        TimestampMs recorded_at, const LogState& log) {
  if (log.find_guess(trial.trial_id))
    fail(Errc::duplicate, "trial " + trial.trial_id.str() + " already answered");
  if (log.is_abandoned(trial.trial_id))
    fail(Errc::rejected, "trial " + trial.trial_id.str() + " was superseded");
  if (elapsed_ms < 0) fail(Errc::validation, "elapsed_ms must be nonnegative");
  ScoredGuess out;
  out.manipulated_side = manipulated_side(trial.placement);
  out.manipulated_image_id = trial.manipulated_image_id;
  out.guess.trial_id = trial.trial_id;
  out.guess.chosen_side = chosen_side;
  out.guess.correct = chosen_side == out.manipulated_side;
  out.guess.elapsed_ms = elapsed_ms;
  out.guess.recorded_at = recorded_at;
  return out;
}

}  // namespace dfx
