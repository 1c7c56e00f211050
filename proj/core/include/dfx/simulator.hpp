#pragma once

// Synthetic participants following a planted linear probability model:
//
//   P(correct) = alpha0 + g(position) + mu_image + nu_participant
//                + sum_m (main_m * m + interaction_m * m * ln(position))
//
// with g(position) = beta_log * ln(position) unless a per-position profile is
// given. Effects mu and nu are centred uniforms with the configured standard
// deviations. Probabilities are clipped to [0.01, 0.99] and clipping is
// counted.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dfx/feature_table.hpp"
#include "dfx/log.hpp"
#include "dfx/randomizer.hpp"

namespace dfx {

struct ModeratorEffect {
  double prevalence = 0.25;
  double main_effect = 0.0;
  double interaction_effect = 0.0;

  friend bool operator==(const ModeratorEffect&, const ModeratorEffect&) = default;
};

struct DgpConfig {
  std::uint32_t n_participants = 1000;
  std::uint32_t trials_per_participant = 10;
  double alpha0 = 0.73;
  double beta_log = 0.065;
  double participant_effect_sd = 0.0;
  double image_effect_sd = 0.0;
  std::map<std::string, ModeratorEffect> moderator_configs;
  std::uint64_t seed = 0;
  /// Optional planted marginal effect per position: entry p-1 applies at
  /// position p, the last entry to every later position. Replaces beta_log.
  std::vector<double> position_profile;
  /// Clip rate above which the configuration is rejected.
  double max_clip_rate = 0.2;

  /// Throws Errc::configuration for out-of-range fields or unknown moderators.
  void validate() const;

  friend bool operator==(const DgpConfig&, const DgpConfig&) = default;
};

DgpConfig parse_dgp_config(std::string_view json_text);
DgpConfig read_dgp_config(const std::filesystem::path& path);
std::string format_dgp_config(const DgpConfig& config);

struct SimulationResult {
  std::vector<LogRecord> records;
  /// Features for every pool image, with planted image-level traits.
  FeatureTable features;
  std::uint64_t trials = 0;
  std::uint64_t clipped = 0;

  double clip_rate() const noexcept {
    return trials == 0 ? 0.0 : static_cast<double>(clipped) / static_cast<double>(trials);
  }
};

/// Planted success probability before clipping.
double planted_probability(const DgpConfig& config, std::uint32_t position);

/// Throws Errc::configuration when the clip rate exceeds `max_clip_rate` or the
/// manipulated pool has fewer than two images.
SimulationResult simulate(const DgpConfig& config, const DyadPools& pools);

/// Pools of synthetic ids: `manipulated` altered images ("m0001"...),
/// `untouched` control_untouched images ("u0001"...), `originals` ("o0001"...).
DyadPools synthetic_pools(std::size_t manipulated, std::size_t originals, std::uint64_t seed,
                          std::size_t untouched = 0);

}  // namespace dfx
