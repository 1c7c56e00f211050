#pragma once

// Dyad sampling: each trial pairs a designated image drawn uniformly with
// replacement from the manipulated pool with an original drawn uniformly from
// the original pool, and places the designated image left or right with
// probability 1/2. Draws are keyed by (seed, session, position, abandonments)
// and never look at what the session has already seen.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dfx/log.hpp"
#include "dfx/model.hpp"

namespace dfx {

struct PoolEntry {
  ImageId image_id;
  ImageKind kind = ImageKind::manipulated;
  std::string path;

  friend bool operator==(const PoolEntry&, const PoolEntry&) = default;
};

struct DyadPools {
  std::vector<PoolEntry> manipulated_pool;  // manipulated or control_untouched
  std::vector<PoolEntry> original_pool;     // control_original
  std::uint64_t rng_seed = 0;
  /// Probability that the designated slot holds a control_untouched image.
  /// Unset: uniform over the whole manipulated pool.
  std::optional<double> control_untouched_weight;

  /// Throws Errc::configuration on empty or overlapping pools, wrong kinds, or
  /// a weight outside [0, 1].
  void validate() const;
  const PoolEntry* find(const ImageId& id) const;
};

/// Pool manifest: header `image_id,path` with an optional `kind` column.
/// Rows without a kind take `default_kind`.
std::vector<PoolEntry> read_manifest(const std::filesystem::path& path, ImageKind default_kind);
void write_manifest(const std::filesystem::path& path, const std::vector<PoolEntry>& entries);

/// Draws the dyad for the session's next position. `abandoned` is the number
/// of trials the session has abandoned so far; it re-keys the draw so a
/// superseding trial at the same position is fresh. Pools are assumed
/// validated; an empty pool throws Errc::configuration.
TrialRecord next_trial(const Session& session, const DyadPools& pools, TimestampMs served_at,
                       std::uint32_t abandoned = 0);

struct ScoredGuess {
  GuessRecord guess;
  Side manipulated_side = Side::left;
  ImageId manipulated_image_id;
};

/// Scores a response. `log` supplies the answered/abandoned status of the trial:
/// already answered throws Errc::duplicate, abandoned throws Errc::rejected.
ScoredGuess score_guess(const TrialRecord& trial, Side chosen_side, std::int64_t elapsed_ms,
                        TimestampMs recorded_at, const LogState& log);

}  // namespace dfx
