#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <map>

#include "dfx/error.hpp"
#include "dfx/random.hpp"
#include "dfx/randomizer.hpp"
#include "dfx/simulator.hpp"
#include "oracles.hpp"

using namespace dfx;

namespace {

Session at_position(const std::string& id, std::uint32_t served) {
  return Session{SessionId(id), DeviceClass::desktop, served, 0};
}

double chi_square_p(const std::map<std::string, int>& counts, std::size_t categories, double n) {
  const double expected = n / static_cast<double>(categories);
  double stat = 0.0;
  for (const auto& [k, c] : counts) stat += (c - expected) * (c - expected) / expected;
  stat += static_cast<double>(categories - counts.size()) * expected;  // unseen categories
  boost::math::chi_squared dist(static_cast<double>(categories - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

}  // namespace

TEST(CounterRng, BelowIsInRangeAndStreamsAreKeyed) {
  CounterRng a(derive_key(1, 2, 3)), b(derive_key(1, 2, 3)), c(derive_key(1, 2, 4));
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.below(7);
    EXPECT_LT(x, 7u);
    EXPECT_EQ(x, b.below(7));
  }
  EXPECT_NE(CounterRng(derive_key(1, 2, 3))(), c());
  CounterRng u(5);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform();
    EXPECT_GE(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(CounterRng, BelowIsUniformOnSmallRange) {
  CounterRng r(42);
  std::map<std::string, int> counts;
  const int n = 60000;
  for (int i = 0; i < n; ++i) counts[std::to_string(r.below(6))] += 1;
  EXPECT_GT(chi_square_p(counts, 6, n), 0.001);
}

TEST(DyadPools, ValidationCatchesMisconfiguration) {
  auto pools = synthetic_pools(3, 3, 1);
  EXPECT_NO_THROW(pools.validate());
  auto dup = pools;
  dup.original_pool.push_back(dup.manipulated_pool.front());
  dup.original_pool.back().kind = ImageKind::control_original;
  EXPECT_THROW(dup.validate(), Error);
  auto wrong = pools;
  wrong.manipulated_pool.front().kind = ImageKind::control_original;
  EXPECT_THROW(wrong.validate(), Error);
  auto empty = pools;
  empty.original_pool.clear();
  EXPECT_THROW(empty.validate(), Error);
  auto weight = pools;
  weight.control_untouched_weight = 1.5;
  EXPECT_THROW(weight.validate(), Error);
  EXPECT_NE(pools.find(ImageId("o0002")), nullptr);
  EXPECT_EQ(pools.find(ImageId("x")), nullptr);
}

TEST(NextTrial, DeterministicPerSessionAndPosition) {
  const auto pools = synthetic_pools(50, 50, 9);
  const auto a = next_trial(at_position("s1", 3), pools, 10);
  const auto b = next_trial(at_position("s1", 3), pools, 99);
  EXPECT_EQ(a.manipulated_image_id, b.manipulated_image_id);
  EXPECT_EQ(a.control_image_id, b.control_image_id);
  EXPECT_EQ(a.placement, b.placement);
  EXPECT_EQ(a.position, 4u);
  EXPECT_EQ(a.trial_id.str(), "s1-4");
  const auto r = next_trial(at_position("s1", 3), pools, 10, 2);
  EXPECT_EQ(r.trial_id.str(), "s1-4-r2");
  EXPECT_EQ(r.position, 4u);
  EXPECT_EQ(next_trial(at_position("s1", 0), pools, 0).position, 1u);
  DyadPools none;
  EXPECT_THROW(next_trial(at_position("s1", 0), none, 0), Error);
}

TEST(NextTrial, DrawsWithReplacementAcrossPositions) {
  // A two-image pool must repeat within a 10-trial session.
  const auto pools = synthetic_pools(2, 2, 3);
  std::map<std::string, int> seen;
  for (std::uint32_t p = 0; p < 10; ++p)
    seen[next_trial(at_position("s", p), pools, 0).manipulated_image_id.str()] += 1;
  int max_count = 0;
  for (const auto& [k, c] : seen) max_count = std::max(max_count, c);
  EXPECT_GE(max_count, 2);
}

TEST(NextTrial, UntouchedWeightControlsDesignatedKind) {
  auto pools = synthetic_pools(20, 20, 4, 20);
  pools.control_untouched_weight = 0.1;
  int untouched = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto t = next_trial(at_position("w" + std::to_string(i), 0), pools, 0);
    untouched += t.manipulated_image_id.str().front() == 'u';
  }
  EXPECT_NEAR(static_cast<double>(untouched) / n, 0.1, 0.01);
  pools.control_untouched_weight = 0.0;
  for (int i = 0; i < 500; ++i)
    EXPECT_EQ(next_trial(at_position("z" + std::to_string(i), 0), pools, 0)
                  .manipulated_image_id.str()
                  .front(),
              'm');
}

TEST(ScoreGuess, ScoresAgainstPlacementAndRefusesReplays) {
  LogState log;
  log.apply(Session{SessionId("s"), DeviceClass::desktop, 0, 0});
  const auto pools = synthetic_pools(5, 5, 1);
  const auto t = next_trial(at_position("s", 0), pools, 0);
  log.apply(t);
  const Side truth = manipulated_side(t.placement);
  const Side other = truth == Side::left ? Side::right : Side::left;
  const auto right = score_guess(t, truth, 100, 1, log);
  EXPECT_TRUE(right.guess.correct);
  EXPECT_EQ(right.manipulated_side, truth);
  EXPECT_FALSE(score_guess(t, other, 100, 1, log).guess.correct);
  EXPECT_THROW(score_guess(t, truth, -1, 1, log), Error);
  log.apply(right.guess);
  try {
    score_guess(t, truth, 100, 1, log);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), Errc::duplicate);
  }
}

TEST(Manifest, RoundTrip) {
  const auto dir = oracle::scratch_dir("manifest");
  const std::vector<PoolEntry> entries = {{ImageId("a"), ImageKind::manipulated, "img/a.png"},
                                          {ImageId("b"), ImageKind::control_untouched, "img/b.png"}};
  write_manifest(dir / "m.csv", entries);
  EXPECT_EQ(read_manifest(dir / "m.csv", ImageKind::control_original), entries);
  {
    std::ofstream out(dir / "plain.csv");
    out << "image_id,path\nx,x.png\n";
  }
  const auto plain = read_manifest(dir / "plain.csv", ImageKind::control_original);
  ASSERT_EQ(plain.size(), 1u);
  EXPECT_EQ(plain[0].kind, ImageKind::control_original);
}
