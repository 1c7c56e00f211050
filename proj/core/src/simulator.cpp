#include "dfx/simulator.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "dfx/error.hpp"
#include "dfx/random.hpp"

namespace dfx {

using nlohmann::json;

namespace {

constexpr std::string_view kImageModerators[] = {"subjective_quality_high", "low_accuracy_image",
                                                 "small_mask", "low_entropy", "one_object",
                                                 "has_person"};
constexpr std::string_view kParticipantModerators[] = {"fast_completion", "mobile"};

bool is_image_moderator(std::string_view m) {
  return std::find(std::begin(kImageModerators), std::end(kImageModerators), m) !=
         std::end(kImageModerators);
}

// Stream tags keep the per-purpose random streams disjoint.
enum Stream : std::uint64_t {
  kImageEffect = 1,
  kImageFeature,
  kTraitShuffle,
  kParticipantEffect,
  kOutcome,
  kLatency,
};

std::uint64_t tag_of(std::string_view s) { return fnv1a64(s); }

/// Exactly round(prevalence * n) members, chosen by a seeded shuffle.
std::vector<bool> exact_trait(std::size_t n, double prevalence, std::uint64_t key) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  CounterRng rng(key);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const auto take = static_cast<std::size_t>(std::llround(prevalence * static_cast<double>(n)));
  std::vector<bool> trait(n, false);
  for (std::size_t i = 0; i < std::min(take, n); ++i) trait[order[i]] = true;
  return trait;
}

double centred_uniform(CounterRng& rng, double sd) {
  const double half_width = sd * std::sqrt(3.0);
  return rng.uniform(-half_width, half_width);
}

std::string padded(char prefix, std::size_t i, int width = 6) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%0*zu", prefix, width, i);
  return buf;
}

}  // namespace

void DgpConfig::validate() const {
  if (n_participants == 0) fail(Errc::configuration, "n_participants must be positive");
  if (trials_per_participant == 0) fail(Errc::configuration, "trials_per_participant must be positive");
  if (!(participant_effect_sd >= 0.0) || !(image_effect_sd >= 0.0))
    fail(Errc::configuration, "effect standard deviations must be nonnegative");
  if (!(max_clip_rate >= 0.0 && max_clip_rate <= 1.0))
    fail(Errc::configuration, "max_clip_rate must lie in [0, 1]");
  for (const auto& [name, m] : moderator_configs) {
    if (!is_known_moderator(name)) fail(Errc::configuration, "unknown moderator '" + name + "'");
    if (!(m.prevalence >= 0.0 && m.prevalence <= 1.0))
      fail(Errc::configuration, "prevalence of '" + name + "' must lie in [0, 1]");
  }
}

double planted_probability(const DgpConfig& config, std::uint32_t position) {
  if (!config.position_profile.empty()) {
    const auto idx = std::min<std::size_t>(position, config.position_profile.size()) - 1;
    return config.alpha0 + config.position_profile[idx];
  }
  return config.alpha0 + config.beta_log * std::log(static_cast<double>(position));
}

DgpConfig parse_dgp_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(Errc::parse, std::string("malformed DGP config: ") + e.what());
  }
  static const std::set<std::string> known = {
      "n_participants", "trials_per_participant", "alpha0",           "beta_log",
      "participant_effect_sd", "image_effect_sd", "moderator_configs", "seed",
      "position_profile", "max_clip_rate"};
  for (const auto& [k, v] : j.items())
    if (!known.contains(k)) fail(Errc::parse, "unknown DGP config field '" + k + "'");
  DgpConfig c;
  try {
    c.n_participants = j.value("n_participants", c.n_participants);
    c.trials_per_participant = j.value("trials_per_participant", c.trials_per_participant);
    c.alpha0 = j.value("alpha0", c.alpha0);
    c.beta_log = j.value("beta_log", c.beta_log);
    c.participant_effect_sd = j.value("participant_effect_sd", c.participant_effect_sd);
    c.image_effect_sd = j.value("image_effect_sd", c.image_effect_sd);
    c.seed = j.value("seed", c.seed);
    c.position_profile = j.value("position_profile", c.position_profile);
    c.max_clip_rate = j.value("max_clip_rate", c.max_clip_rate);
    if (j.contains("moderator_configs")) {
      for (const auto& [name, m] : j.at("moderator_configs").items()) {
        for (const auto& [field, v] : m.items())
          if (field != "prevalence" && field != "main_effect" && field != "interaction_effect")
            fail(Errc::parse, "unknown field '" + field + "' for moderator '" + name + "'");
        ModeratorEffect e;
        e.prevalence = m.value("prevalence", e.prevalence);
        e.main_effect = m.value("main_effect", e.main_effect);
        e.interaction_effect = m.value("interaction_effect", e.interaction_effect);
        c.moderator_configs.emplace(name, e);
      }
    }
  } catch (const json::exception& e) {
    fail(Errc::parse, std::string("DGP config: ") + e.what());
  }
  c.validate();
  return c;
}

DgpConfig read_dgp_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open DGP config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dgp_config(buf.str());
}

std::string format_dgp_config(const DgpConfig& c) {
  json j{{"n_participants", c.n_participants},
         {"trials_per_participant", c.trials_per_participant},
         {"alpha0", c.alpha0},
         {"beta_log", c.beta_log},
         {"participant_effect_sd", c.participant_effect_sd},
         {"image_effect_sd", c.image_effect_sd},
         {"seed", c.seed},
         {"position_profile", c.position_profile},
         {"max_clip_rate", c.max_clip_rate},
         {"moderator_configs", json::object()}};
  for (const auto& [name, m] : c.moderator_configs)
    j["moderator_configs"][name] = {{"prevalence", m.prevalence},
                                    {"main_effect", m.main_effect},
                                    {"interaction_effect", m.interaction_effect}};
  return j.dump(2) + "\n";
}

DyadPools synthetic_pools(std::size_t manipulated, std::size_t originals, std::uint64_t seed,
                          std::size_t untouched) {
  DyadPools pools;
  pools.rng_seed = seed;
  for (std::size_t i = 1; i <= manipulated; ++i)
    pools.manipulated_pool.push_back({ImageId(padded('m', i, 4)), ImageKind::manipulated, ""});
  for (std::size_t i = 1; i <= untouched; ++i)
    pools.manipulated_pool.push_back({ImageId(padded('u', i, 4)), ImageKind::control_untouched, ""});
  for (std::size_t i = 1; i <= originals; ++i)
    pools.original_pool.push_back({ImageId(padded('o', i, 4)), ImageKind::control_original, ""});
  pools.validate();
  return pools;
}

SimulationResult simulate(const DgpConfig& config, const DyadPools& pools) {
  config.validate();
  pools.validate();
  if (pools.manipulated_pool.size() < 2)
    fail(Errc::configuration, "simulation needs at least two images in the manipulated pool");
  const auto& mods = config.moderator_configs;
  auto effect_of = [&](std::string_view name) -> const ModeratorEffect* {
    auto it = mods.find(std::string(name));
    return it == mods.end() ? nullptr : &it->second;
  };

  // Image effects, traits and features.
  std::vector<const PoolEntry*> altered;
  for (const auto& e : pools.manipulated_pool)
    if (e.kind == ImageKind::manipulated) altered.push_back(&e);
  std::map<std::string, std::vector<bool>> image_traits;
  for (auto name : kImageModerators)
    if (const auto* m = effect_of(name))
      image_traits[std::string(name)] =
          exact_trait(altered.size(), m->prevalence,
                      derive_key(config.seed, kTraitShuffle, tag_of(name)));

  struct ImageState {
    double effect = 0.0;
    std::map<std::string, bool, std::less<>> traits;
  };
  std::map<ImageId, ImageState> images;
  SimulationResult result;
  for (std::size_t i = 0; i < pools.manipulated_pool.size(); ++i) {
    const auto& e = pools.manipulated_pool[i];
    CounterRng rng(derive_key(config.seed, kImageEffect, fnv1a64(e.image_id.str())));
    ImageState st;
    st.effect = centred_uniform(rng, config.image_effect_sd);
    ImageRecord rec;
    rec.image_id = e.image_id;
    rec.kind = e.kind;
    rec.pixels_ref = e.path;
    CounterRng feat(derive_key(config.seed, kImageFeature, fnv1a64(e.image_id.str())));
    rec.delentropy = feat.uniform(3.0, 9.0);
    if (e.kind == ImageKind::manipulated) {
      const auto idx = static_cast<std::size_t>(
          std::find(altered.begin(), altered.end(), &e) - altered.begin());
      for (const auto& [name, traits] : image_traits) st.traits[name] = traits[idx];
      auto trait = [&](std::string_view n) -> std::optional<bool> {
        auto it = st.traits.find(n);
        return it == st.traits.end() ? std::nullopt : std::optional<bool>(it->second);
      };
      rec.mask_fraction = std::exp(feat.uniform(std::log(0.003), std::log(0.08)));
      if (auto t = trait("small_mask"))
        rec.mask_fraction = *t ? feat.uniform(0.002, 0.01) : feat.uniform(0.02, 0.08);
      if (auto t = trait("low_entropy"))
        rec.delentropy = *t ? feat.uniform(2.5, 4.5) : feat.uniform(6.0, 9.0);
      rec.object_count = feat.bernoulli(0.6) ? 1 : 2 + static_cast<std::uint32_t>(feat.below(3));
      if (auto t = trait("one_object"))
        rec.object_count = *t ? 1 : 2 + static_cast<std::uint32_t>(feat.below(3));
      rec.has_person = feat.bernoulli(0.4);
      if (auto t = trait("has_person")) rec.has_person = *t;
      rec.subjective_quality = feat.bernoulli(0.5) ? Quality::high : Quality::low;
      if (auto t = trait("subjective_quality_high"))
        rec.subjective_quality = *t ? Quality::high : Quality::low;
    }
    images.emplace(e.image_id, std::move(st));
    result.features.emplace(rec.image_id, rec);
  }
  for (const auto& e : pools.original_pool) {
    ImageRecord rec;
    rec.image_id = e.image_id;
    rec.kind = e.kind;
    rec.pixels_ref = e.path;
    CounterRng feat(derive_key(config.seed, kImageFeature, fnv1a64(e.image_id.str())));
    rec.delentropy = feat.uniform(3.0, 9.0);
    result.features.emplace(rec.image_id, rec);
  }

  // Participant traits.
  const std::size_t n = config.n_participants;
  std::map<std::string, std::vector<bool>> person_traits;
  for (auto name : kParticipantModerators) {
    const auto* m = effect_of(name);
    const double prevalence = m ? m->prevalence : (name == "mobile" ? 0.5 : 0.0);
    person_traits[std::string(name)] =
        exact_trait(n, prevalence, derive_key(config.seed, kTraitShuffle, tag_of(name)));
  }
  const bool fast_configured = effect_of("fast_completion") != nullptr;

  LogState state;
  auto emit = [&](LogRecord r) {
    state.apply(r);
    result.records.push_back(std::move(r));
  };
  constexpr TimestampMs kEpoch = 1533081600000;  // 2018-08-01T00:00:00Z
  for (std::size_t j = 0; j < n; ++j) {
    CounterRng prng(derive_key(config.seed, kParticipantEffect, j));
    const double nu = centred_uniform(prng, config.participant_effect_sd);
    const bool mobile = person_traits["mobile"][j];
    const bool fast = person_traits["fast_completion"][j];

    Session session{SessionId(padded('p', j + 1)), mobile ? DeviceClass::mobile : DeviceClass::desktop,
                    0, kEpoch + static_cast<TimestampMs>(j) * 3'600'000};
    emit(session);
    TimestampMs clock = session.created_at;
    std::optional<bool> first_outcome;
    for (std::uint32_t t = 1; t <= config.trials_per_participant; ++t) {
      clock += 1000;
      const auto trial = next_trial(session, pools, clock);
      session.trials_served += 1;
      emit(trial);
      const auto& img = images.at(trial.manipulated_image_id);
      const double lp = std::log(static_cast<double>(t));

      double p = planted_probability(config, t) + img.effect + nu;
      for (const auto& [name, m] : mods) {
        double level = 0.0;
        if (is_image_moderator(name)) {
          auto it = img.traits.find(name);
          level = (it != img.traits.end() && it->second) ? 1.0 : 0.0;
        } else if (name == "mobile") {
          level = mobile ? 1.0 : 0.0;
        } else if (name == "fast_completion") {
          level = fast ? 1.0 : 0.0;
        } else if (name == "right_placement") {
          level = trial.placement == Placement::manipulated_right ? 1.0 : 0.0;
        } else if (name == "first_correct") {
          level = (t >= 2 && first_outcome.value_or(false)) ? 1.0 : 0.0;
        }
        p += m.main_effect * level + m.interaction_effect * level * lp;
      }
      result.trials += 1;
      if (p < 0.01 || p > 0.99) {
        result.clipped += 1;
        p = std::clamp(p, 0.01, 0.99);
      }
      CounterRng orng(derive_key(config.seed, kOutcome, j, t));
      const bool correct = orng.bernoulli(p);
      if (t == 1) first_outcome = correct;

      CounterRng lrng(derive_key(config.seed, kLatency, j, t));
      double ms = lrng.uniform(1500.0, 9000.0);
      if (fast_configured) ms = fast ? lrng.uniform(800.0, 2500.0) : lrng.uniform(4000.0, 12000.0);
      const auto elapsed = static_cast<std::int64_t>(ms);
      clock += elapsed;

      const Side truth = manipulated_side(trial.placement);
      const Side chosen = correct ? truth : (truth == Side::left ? Side::right : Side::left);
      emit(GuessRecord{trial.trial_id, chosen, correct, elapsed, clock});
    }
  }
  if (result.clip_rate() > config.max_clip_rate)
    fail(Errc::configuration, "planted probabilities were clipped on " +
                                  std::to_string(result.clip_rate() * 100.0) +
                                  "% of trials; re-parameterize the DGP");
  return result;
}

}  // namespace dfx
