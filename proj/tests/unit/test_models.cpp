#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "dfx/econ/models.hpp"
#include "dfx/error.hpp"
#include "oracles.hpp"

using namespace dfx;
using namespace dfx::econ;
using oracle::make_row;

namespace {

// Participants see `trials` images drawn from `images`; accuracy rises with
// position.
std::vector<ObservationRow> synthetic_rows(std::uint64_t seed, int participants, int trials,
                                           int images, double slope = 0.05) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ObservationRow> rows;
  for (int p = 0; p < participants; ++p) {
    const bool mobile = p % 2 == 0;
    for (int t = 1; t <= trials; ++t) {
      const int img = static_cast<int>(gen() % static_cast<std::uint64_t>(images));
      const double prob = std::min(0.97, 0.7 + slope * std::log(t) + (mobile ? 0.02 * std::log(t) : 0));
      auto r = make_row("p" + std::to_string(p), "i" + std::to_string(img),
                        static_cast<std::uint32_t>(t), u(gen) < prob ? 1 : 0);
      r.moderators["mobile"] = mobile ? 1.0 : 0.0;
      r.moderators["has_person"] = img % 3 == 0 ? 1.0 : 0.0;
      r.moderators["subjective_quality_high"] = img % 2 == 0 ? 1.0 : 0.0;
      r.moderators["first_correct"] = (p % 3 == 0) ? 1.0 : 0.0;
      r.repeat_view = t > 3 && gen() % 10 == 0;
      r.control_untouched = gen() % 20 == 0;
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

Errc kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return Errc::usage;
}

}  // namespace

TEST(Filters, TableColumnsCompose) {
  EXPECT_EQ(FilterSpec::table_column(1), FilterSpec{});
  const auto c4 = FilterSpec::table_column(4);
  EXPECT_EQ(c4.min_guesses_per_participant, 10u);
  EXPECT_TRUE(c4.drop_control_untouched && c4.drop_repeat_views && c4.high_quality_only);
  EXPECT_FALSE(c4.first_ten_only);
  EXPECT_THROW(FilterSpec::table_column(5), Error);
  const auto i = FilterSpec::interaction_sample();
  EXPECT_TRUE(i.first_ten_only && i.drop_control_untouched);
  EXPECT_EQ(i.min_guesses_per_participant, 10u);
}

TEST(Filters, ConjunctionIsNoLargerThanEitherPart) {
  auto rows = synthetic_rows(1, 40, 14, 30);
  for (int p = 0; p < 10; ++p)  // short sessions
    std::erase_if(rows, [&](const ObservationRow& r) {
      return r.participant_key == "p" + std::to_string(p) && r.position > 6;
    });
  const std::vector<FilterSpec> singles = {{10, false, false, false, false},
                                           {0, true, false, false, false},
                                           {0, false, true, false, false},
                                           {0, false, false, true, false},
                                           {0, false, false, false, true}};
  for (std::size_t a = 0; a < singles.size(); ++a)
    for (std::size_t b = 0; b < singles.size(); ++b) {
      FilterSpec both = singles[a];
      both.min_guesses_per_participant =
          std::max(both.min_guesses_per_participant, singles[b].min_guesses_per_participant);
      both.drop_control_untouched |= singles[b].drop_control_untouched;
      both.drop_repeat_views |= singles[b].drop_repeat_views;
      both.high_quality_only |= singles[b].high_quality_only;
      both.first_ten_only |= singles[b].first_ten_only;
      const auto n_both = apply_filter(rows, both).size();
      EXPECT_LE(n_both, std::min(apply_filter(rows, singles[a]).size(),
                                 apply_filter(rows, singles[b]).size()));
    }
  // guess counts come from the unfiltered input
  const auto kept = apply_filter(rows, {10, true, false, false, false});
  for (const auto& r : kept) EXPECT_GE(std::stoi(r.participant_key.substr(1)), 10);
}

TEST(LogPosition, AllCorrectGivesZeroSlope) {
  auto rows = synthetic_rows(2, 20, 12, 15);
  for (auto& r : rows) r.accuracy = 1;
  const auto fit = fit_log_position(rows, {});
  EXPECT_EQ(fit.estimate("log_position"), 0.0);
  EXPECT_EQ(fit.std_error("log_position"), 0.0);
  EXPECT_EQ(fit.r2_within, 0.0);
  EXPECT_EQ(fit.r2_overall, 0.0);
  EXPECT_DOUBLE_EQ(fit.constant, 1.0);
}

TEST(LogPosition, MatchesDummyRegressionAndBruteSandwich) {
  const auto rows = canonical_order(synthetic_rows(3, 12, 12, 12));
  const auto fit = fit_log_position(rows, {});
  ASSERT_EQ(fit.names, std::vector<std::string>{"log_position"});

  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  std::vector<std::string> pk, ik;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    x(i, 0) = std::log(static_cast<double>(r.position));
    y(i) = r.accuracy;
    pk.push_back(r.participant_key);
    ik.push_back(r.image_key);
  }
  const auto beta = oracle::dummy_ols(x, y, pk, ik);
  EXPECT_NEAR(fit.estimate("log_position"), beta(0), 1e-8);
  EXPECT_EQ(fit.n_obs, rows.size());
  EXPECT_EQ(fit.absorbed, (std::vector<std::string>{"participant", "image"}));
  EXPECT_TRUE(fit.mean_accuracy_first.has_value());
  EXPECT_TRUE(fit.mean_accuracy_tenth.has_value());
  EXPECT_GE(fit.r2_overall, fit.r2_within - 1.0);
}

TEST(LogPosition, RowOrderDoesNotMatterBitForBit) {
  auto rows = synthetic_rows(4, 30, 12, 25);
  const auto a = fit_log_position(rows, {});
  std::mt19937_64 gen(1);
  std::shuffle(rows.begin(), rows.end(), gen);
  const auto b = fit_log_position(rows, {});
  EXPECT_EQ(a.coefficients, b.coefficients);
  EXPECT_EQ(a.vcov, b.vcov);
  EXPECT_EQ(a.r2_overall, b.r2_overall);
  const auto d1 = fit_position_dummies(rows, {});
  std::reverse(rows.begin(), rows.end());
  const auto d2 = fit_position_dummies(rows, {});
  EXPECT_EQ(d1.coefficients, d2.coefficients);
  EXPECT_EQ(d1.vcov, d2.vcov);
}

TEST(LogPosition, EmptySampleIsAFilterError) {
  const auto rows = synthetic_rows(5, 20, 12, 20);
  EXPECT_EQ(kind_of([&] { fit_log_position({}, {}); }), Errc::filter);
  FilterSpec impossible;
  impossible.min_guesses_per_participant = 100;
  EXPECT_EQ(kind_of([&] { fit_log_position(rows, impossible); }), Errc::filter);
}

TEST(LogPosition, BeyondTenFlagAndCovariates) {
  const auto rows = synthetic_rows(6, 30, 14, 20);
  FitOptions o;
  o.include_beyond_ten = false;
  const auto trunc = fit_log_position(rows, {}, o);
  EXPECT_EQ(trunc.n_obs, 30u * 10u);
  FitOptions c;
  c.covariates = {"has_person"};
  const auto cov = fit_log_position(rows, {}, c);
  // has_person is an image attribute, so image fixed effects absorb it
  EXPECT_EQ(cov.dropped_columns, std::vector<std::string>{"has_person"});
  EXPECT_FALSE(cov.warnings.empty());
}

TEST(PositionDummies, NamesAndPooledBucket) {
  EXPECT_EQ(position_dummy_names().size(), 10u);
  EXPECT_EQ(position_dummy_names().front(), "pos_2");
  EXPECT_EQ(position_dummy_names().back(), "pos_11plus");
  EXPECT_EQ(position_dummy_names(2).front(), "pos_3");
  const auto rows = synthetic_rows(7, 40, 14, 30);
  const auto fit = fit_position_dummies(rows, {});
  EXPECT_EQ(fit.names, position_dummy_names());
  EXPECT_EQ(fit.vcov.rows(), 10);
  for (Eigen::Index i = 0; i < fit.vcov.rows(); ++i) EXPECT_GE(fit.vcov(i, i), 0.0);
  EXPECT_EQ(fit.vcov, fit.vcov.transpose());
}

TEST(PositionDummies, MatchDummyOracle) {
  const auto rows = canonical_order(synthetic_rows(8, 12, 12, 12));
  const auto fit = fit_position_dummies(rows, {});
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, 10);
  Eigen::VectorXd y(n);
  std::vector<std::string> pk, ik;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    if (r.position >= 2) x(i, std::min<Eigen::Index>(r.position, 11) - 2) = 1.0;
    y(i) = r.accuracy;
    pk.push_back(r.participant_key);
    ik.push_back(r.image_key);
  }
  const auto beta = oracle::dummy_ols(x, y, pk, ik);
  for (Eigen::Index j = 0; j < 10; ++j) EXPECT_NEAR(fit.coefficients(j), beta(j), 1e-8);
}

TEST(Interaction, ImageMainEffectIsAbsorbedAndDegenerateFails) {
  const auto rows = synthetic_rows(9, 60, 10, 40);
  const auto m = fit_interaction(rows, "mobile");
  EXPECT_TRUE(m.has("mobile"));
  EXPECT_TRUE(m.has("mobile_x_log_position"));
  EXPECT_EQ(m.absorbed, std::vector<std::string>{"image"});
  const auto h = fit_interaction(rows, "has_person");
  EXPECT_FALSE(h.has("has_person"));
  EXPECT_TRUE(h.has("has_person_x_log_position"));

  auto flat = rows;
  for (auto& r : flat) r.moderators["mobile"] = 1.0;
  EXPECT_EQ(kind_of([&] { fit_interaction(flat, "mobile"); }), Errc::degenerate_moderator);
  EXPECT_EQ(kind_of([&] { fit_interaction(rows, "not_a_moderator"); }), Errc::validation);
}

TEST(Interaction, FirstCorrectDropsTheDefiningGuess) {
  const auto rows = synthetic_rows(10, 60, 10, 40);
  const auto fit = fit_interaction(rows, "first_correct");
  const auto sample = apply_filter(rows, FilterSpec::interaction_sample());
  const auto expect = std::count_if(sample.begin(), sample.end(),
                                    [](const ObservationRow& r) { return r.position != 1; });
  EXPECT_EQ(fit.n_obs, static_cast<std::size_t>(expect));
  EXPECT_FALSE(fit.mean_accuracy_first.has_value());
}

TEST(Curves, AlwaysCorrectIsFlatWithZeroWidth) {
  auto rows = synthetic_rows(11, 20, 12, 15);
  for (auto& r : rows) r.accuracy = 1;
  const auto raw = learning_curve(rows, false);
  ASSERT_EQ(raw.points.size(), 11u);
  for (const auto& p : raw.points) {
    EXPECT_EQ(p.estimate, 1.0);
    EXPECT_EQ(p.lower, 1.0);
    EXPECT_EQ(p.upper, 1.0);
  }
  EXPECT_EQ(raw.at(11)->n, 20u * 2u);
}

TEST(Curves, RawMeansAndFixedEffectMarginals) {
  const auto rows = synthetic_rows(12, 50, 12, 30);
  const auto raw = learning_curve(rows, false);
  for (const auto& p : raw.points) {
    double s = 0, n = 0;
    for (const auto& r : rows)
      if (std::min<std::uint32_t>(r.position, 11) == p.position) s += r.accuracy, n += 1;
    EXPECT_DOUBLE_EQ(p.estimate, s / n);
    EXPECT_NEAR(p.upper - p.estimate, kZ95 * std::sqrt(p.estimate * (1 - p.estimate) / n), 1e-12);
  }
  const auto fe = learning_curve(rows, true);
  EXPECT_TRUE(fe.fixed_effects);
  EXPECT_EQ(fe.points.front().position, 1u);
  EXPECT_EQ(fe.points.front().estimate, 0.0);
  const auto fit = fit_position_dummies(rows, {});
  EXPECT_DOUBLE_EQ(fe.at(5)->estimate, fit.estimate("pos_5"));
  EXPECT_NEAR(fe.at(5)->upper - fe.at(5)->estimate, kZ95 * fit.std_error("pos_5"), 1e-12);
}

TEST(Hetero, StrataAndBaselines) {
  const auto rows = synthetic_rows(13, 80, 12, 40);
  const auto h = heterogeneous_curves(rows, "mobile");
  EXPECT_EQ(h.with_trait.baseline, 1u);
  EXPECT_LT(h.fit_with.n_obs, rows.size());
  EXPECT_EQ(h.fit_with.n_obs + h.fit_without.n_obs, rows.size());
  const auto fc = heterogeneous_curves(rows, "first_correct");
  EXPECT_EQ(fc.with_trait.baseline, 2u);
  EXPECT_EQ(fc.with_trait.points.front().position, 2u);

  auto flat = rows;
  for (auto& r : flat) r.moderators["mobile"] = 1.0;
  EXPECT_EQ(kind_of([&] { heterogeneous_curves(flat, "mobile"); }), Errc::inference);
  HeteroOptions strict;
  strict.min_clusters = 1000;
  EXPECT_EQ(kind_of([&] { heterogeneous_curves(rows, "mobile", {}, strict); }), Errc::inference);
}
