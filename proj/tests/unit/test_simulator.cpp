#include <gtest/gtest.h>

#include <cmath>

#include "dfx/error.hpp"
#include "dfx/observations.hpp"
#include "dfx/simulator.hpp"
#include "oracles.hpp"

using namespace dfx;

namespace {

struct Tally {
  double correct = 0, n = 0;
  double rate() const { return correct / n; }
};

std::map<std::uint32_t, Tally> accuracy_by_position(const SimulationResult& r) {
  std::map<std::string, std::uint32_t> pos;
  std::map<std::uint32_t, Tally> out;
  for (const auto& rec : r.records) {
    if (const auto* t = std::get_if<TrialRecord>(&rec)) pos[t->trial_id.str()] = t->position;
    if (const auto* g = std::get_if<GuessRecord>(&rec)) {
      auto& t = out[pos[g->trial_id.str()]];
      t.correct += g->correct;
      t.n += 1;
    }
  }
  return out;
}

std::string all_lines(const SimulationResult& r) {
  std::string s;
  for (const auto& rec : r.records) s += serialize(rec) + "\n";
  return s;
}

}  // namespace

TEST(DgpConfig, JsonRoundTripAndValidation) {
  DgpConfig c;
  c.n_participants = 12;
  c.seed = 99;
  c.position_profile = {0.0, 0.1};
  c.moderator_configs["mobile"] = {0.4, 0.01, 0.02};
  EXPECT_EQ(parse_dgp_config(format_dgp_config(c)), c);
  EXPECT_THROW(parse_dgp_config(R"({"n_participant": 3})"), Error);
  EXPECT_THROW(parse_dgp_config(R"({"moderator_configs": {"tablet": {}}})"), Error);
  EXPECT_THROW(parse_dgp_config(R"({"moderator_configs": {"mobile": {"prevalance": 0.2}}})"), Error);
  EXPECT_THROW(parse_dgp_config(R"({"n_participants": 0})"), Error);
  EXPECT_THROW(parse_dgp_config("{"), Error);
}

TEST(Simulate, SameConfigSameBytes) {
  DgpConfig c;
  c.n_participants = 200;
  c.participant_effect_sd = 0.05;
  c.image_effect_sd = 0.05;
  c.seed = 3;
  c.moderator_configs["small_mask"] = {0.25, 0.0, 0.02};
  const auto pools = synthetic_pools(40, 40, 3);
  const auto a = simulate(c, pools), b = simulate(c, pools);
  EXPECT_EQ(all_lines(a), all_lines(b));
  EXPECT_EQ(a.features, b.features);
  c.seed = 4;
  EXPECT_NE(all_lines(simulate(c, pools)), all_lines(a));
}

TEST(Simulate, RecordsFoldIntoAValidLog) {
  DgpConfig c;
  c.n_participants = 50;
  c.trials_per_participant = 12;
  const auto r = simulate(c, synthetic_pools(10, 10, 1, 3));
  const auto state = fold(r.records);
  EXPECT_EQ(state.sessions().size(), 50u);
  EXPECT_EQ(state.guesses().size(), 600u);
  EXPECT_EQ(r.trials, 600u);
  for (const auto& [id, s] : state.sessions()) EXPECT_EQ(s.session.trials_served, 12u);
}

TEST(Simulate, FlatLearnerHitsBaseRate) {
  DgpConfig c;
  c.n_participants = 10000;
  c.trials_per_participant = 10;
  c.alpha0 = 0.8;
  c.beta_log = 0.0;
  c.seed = 5;
  const auto r = simulate(c, synthetic_pools(100, 100, 5));
  double correct = 0, n = 0;
  for (const auto& [pos, t] : accuracy_by_position(r)) correct += t.correct, n += t.n;
  EXPECT_NEAR(correct / n, 0.8, 0.01);
  EXPECT_EQ(r.clipped, 0u);
}

TEST(Simulate, EndpointsFollowPlantedLogCurve) {
  DgpConfig c;
  c.n_participants = 20000;
  c.trials_per_participant = 10;
  c.participant_effect_sd = 0.03;
  c.image_effect_sd = 0.03;
  c.seed = 6;
  const auto r = simulate(c, synthetic_pools(200, 200, 6));
  const auto acc = accuracy_by_position(r);
  const double tol = 3.0 / std::sqrt(20000.0);
  EXPECT_NEAR(acc.at(1).rate(), 0.73, tol);
  EXPECT_NEAR(acc.at(10).rate(), 0.73 + 0.065 * std::log(10.0), tol);
  EXPECT_NEAR(planted_probability(c, 10), 0.8797, 1e-4);
}

TEST(Simulate, ExcessiveClippingIsAConfigurationError) {
  DgpConfig c;
  c.n_participants = 100;
  c.alpha0 = 0.97;
  c.beta_log = 0.1;
  try {
    simulate(c, synthetic_pools(10, 10, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), Errc::configuration);
  }
  c.max_clip_rate = 1.0;
  const auto r = simulate(c, synthetic_pools(10, 10, 1));
  EXPECT_GT(r.clip_rate(), 0.2);
  EXPECT_THROW(simulate(c, synthetic_pools(1, 10, 1)), Error);
}

TEST(Simulate, ImageTraitsHaveExactPrevalenceAndSeparatedFeatures) {
  DgpConfig c;
  c.n_participants = 10;
  c.moderator_configs["small_mask"] = {0.25, 0.0, 0.0};
  c.moderator_configs["low_entropy"] = {0.5, 0.0, 0.0};
  c.moderator_configs["one_object"] = {0.3, 0.0, 0.0};
  const auto r = simulate(c, synthetic_pools(40, 10, 2));
  int small = 0, low = 0, one = 0, manip = 0;
  for (const auto& [id, rec] : r.features) {
    if (rec.kind != ImageKind::manipulated) continue;
    ++manip;
    EXPECT_NO_THROW(validate(rec, false));
    small += rec.mask_fraction < 0.015;
    low += rec.delentropy < 5.0;
    one += rec.object_count == 1;
  }
  EXPECT_EQ(manip, 40);
  EXPECT_EQ(small, 10);
  EXPECT_EQ(low, 20);
  EXPECT_EQ(one, 12);
}

TEST(Simulate, ObservationsCarryPlantedModerators) {
  DgpConfig c;
  c.n_participants = 400;
  c.trials_per_participant = 10;
  c.seed = 8;
  c.moderator_configs["mobile"] = {0.5, 0.0, 0.0};
  c.moderator_configs["fast_completion"] = {0.25, 0.0, 0.0};
  const auto r = simulate(c, synthetic_pools(30, 30, 8));
  const auto rows = build_observations(fold(r.records), r.features);
  ASSERT_EQ(rows.size(), 4000u);
  std::set<std::string> mobile, fast, slow;
  for (const auto& row : rows) {
    if (row.moderator("mobile") == 1.0) mobile.insert(row.participant_key);
    if (row.moderator("fast_completion") == 1.0) fast.insert(row.participant_key);
    if (row.moderator("fast_completion") == 0.0) slow.insert(row.participant_key);
  }
  EXPECT_EQ(mobile.size(), 200u);
  EXPECT_EQ(fast.size(), 100u);
  EXPECT_EQ(slow.size(), 100u);
}
