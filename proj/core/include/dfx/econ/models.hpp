#pragma once

// Linear probability models of guess accuracy on image position.
//
//   log-position model   y = b * ln(position) + participant FE + image FE
//   position dummies     y = sum_p b_p [position = p] + participant FE + image FE
//                         (p = 2..10 and a pooled "more than 10" bucket)
//   interaction model    y = b * ln(position) + m + m * ln(position) + image FE
//
// Standard errors are clustered by image.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dfx/econ/estimation.hpp"
#include "dfx/model.hpp"

namespace dfx::econ {

/// Sample restrictions; all active flags apply together. The guess-count
/// threshold is evaluated on the unfiltered input.
struct FilterSpec {
  std::uint32_t min_guesses_per_participant = 0;
  bool drop_control_untouched = false;
  bool drop_repeat_views = false;
  bool high_quality_only = false;
  bool first_ten_only = false;

  /// Filters of the four robustness columns (1-based).
  static FilterSpec table_column(int column);
  /// >= 10 guesses, no controls, first ten guesses only.
  static FilterSpec interaction_sample();

  friend bool operator==(const FilterSpec&, const FilterSpec&) = default;
};

std::vector<ObservationRow> apply_filter(const std::vector<ObservationRow>& rows,
                                         const FilterSpec& filter);

struct FitOptions {
  DemeanOptions demean{};
  VcovOptions vcov{};
  /// Extra regressors taken from row moderators; rows missing one are dropped.
  std::vector<std::string> covariates;
  /// When false, the log-position model keeps positions 1..10 only.
  bool include_beyond_ten = true;
};

struct ModelFit {
  std::string specification;
  std::vector<std::string> names;
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd vcov;
  std::size_t n_obs = 0;
  std::size_t n_clusters = 0;
  double r2_within = 0.0;
  double r2_overall = 0.0;
  std::vector<std::string> dropped_columns;
  std::vector<std::string> warnings;
  std::vector<std::string> absorbed;
  /// Mean response minus fitted slope contribution at regressor means.
  double constant = 0.0;
  std::optional<double> mean_accuracy_first;
  std::optional<double> mean_accuracy_tenth;
  int demean_sweeps = 0;

  std::optional<std::size_t> index(std::string_view name) const;
  double estimate(std::string_view name) const;
  double std_error(std::string_view name) const;
  bool has(std::string_view name) const { return index(name).has_value(); }
};

/// Generic fit: regress `response` on the given columns of a canonically
/// ordered sample, absorbing the named factors ("participant", "image"), with
/// clusters on image. Columns that vanish after absorption are dropped and
/// reported.
struct Regressor {
  std::string name;
  std::vector<double> values;
};
ModelFit fit_linear(const std::vector<ObservationRow>& rows, const std::vector<Regressor>& columns,
                    bool absorb_participant, bool absorb_image, std::string specification,
                    const FitOptions& options = {});

/// Sorts rows into the order every estimator sums in, so results do not
/// depend on input order.
std::vector<ObservationRow> canonical_order(std::vector<ObservationRow> rows);

ModelFit fit_log_position(const std::vector<ObservationRow>& rows, const FilterSpec& filter,
                          const FitOptions& options = {});

/// Dummy names for positions after `baseline` ("pos_2" ... "pos_10") and the
/// pooled bucket "pos_11plus".
std::vector<std::string> position_dummy_names(std::uint32_t baseline = 1);
ModelFit fit_position_dummies(const std::vector<ObservationRow>& rows, const FilterSpec& filter,
                              const FitOptions& options = {}, std::uint32_t baseline = 1);

/// For first_correct the defining first guess is removed from the sample.
/// Throws Errc::degenerate_moderator if the moderator does not vary.
ModelFit fit_interaction(const std::vector<ObservationRow>& rows, std::string_view moderator,
                         const FilterSpec& filter = FilterSpec::interaction_sample(),
                         const FitOptions& options = {});

inline constexpr double kZ95 = 1.959963984540054;

struct CurvePoint {
  std::uint32_t position = 0;  // 11 stands for "more than 10"
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::size_t n = 0;
};

struct Curve {
  std::string label;
  bool fixed_effects = false;
  std::uint32_t baseline = 1;
  std::vector<CurvePoint> points;

  const CurvePoint* at(std::uint32_t position) const;
};

/// Without fixed effects: mean accuracy per position with a normal
/// approximation binomial interval. With fixed effects: position-dummy
/// marginals relative to position 1 with clustered intervals. Positions above
/// 10 are pooled as 11.
Curve learning_curve(const std::vector<ObservationRow>& rows, bool fixed_effects,
                     const FilterSpec& filter = {}, const FitOptions& options = {});

struct HeteroOptions {
  std::size_t min_clusters = 2;
  FitOptions fit{};
};

struct HeteroCurves {
  std::string moderator;
  Curve with_trait;     // moderator = 1
  Curve without_trait;  // moderator = 0
  ModelFit fit_with;
  ModelFit fit_without;
};

/// Position-dummy curves estimated separately in each moderator stratum with
/// participant and image fixed effects. For first_correct both curves start
/// after the first guess (baseline position 2). A stratum with fewer than
/// `min_clusters` images throws Errc::inference.
HeteroCurves heterogeneous_curves(const std::vector<ObservationRow>& rows,
                                  std::string_view moderator, const FilterSpec& filter = {},
                                  const HeteroOptions& options = {});

}  // namespace dfx::econ
