#include "dfx/econ/models.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

#include "dfx/error.hpp"

namespace dfx::econ {

FilterSpec FilterSpec::table_column(int column) {
  FilterSpec f;
  if (column < 1 || column > 4) fail(Errc::configuration, "table columns are numbered 1 to 4");
  if (column >= 2) {
    f.min_guesses_per_participant = 10;
    f.drop_control_untouched = true;
  }
  if (column >= 3) f.drop_repeat_views = true;
  if (column >= 4) f.high_quality_only = true;
  return f;
}

FilterSpec FilterSpec::interaction_sample() {
  FilterSpec f;
  f.min_guesses_per_participant = 10;
  f.drop_control_untouched = true;
  f.first_ten_only = true;
  return f;
}

std::vector<ObservationRow> apply_filter(const std::vector<ObservationRow>& rows,
                                         const FilterSpec& filter) {
  std::map<std::string, std::uint32_t> guesses;
  if (filter.min_guesses_per_participant > 0)
    for (const auto& r : rows) guesses[r.participant_key] += 1;
  std::vector<ObservationRow> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    if (filter.min_guesses_per_participant > 0 &&
        guesses[r.participant_key] < filter.min_guesses_per_participant)
      continue;
    if (filter.drop_control_untouched && r.control_untouched) continue;
    if (filter.drop_repeat_views && r.repeat_view) continue;
    if (filter.high_quality_only) {
      const auto q = r.moderator("subjective_quality_high");
      if (!q || *q != 1.0) continue;
    }
    if (filter.first_ten_only && r.position > 10) continue;
    out.push_back(r);
  }
  return out;
}

namespace {

bool row_less(const ObservationRow& a, const ObservationRow& b) {
  return std::tie(a.image_key, a.participant_key, a.position, a.accuracy, a.repeat_view,
                  a.control_untouched, a.moderators) <
         std::tie(b.image_key, b.participant_key, b.position, b.accuracy, b.repeat_view,
                  b.control_untouched, b.moderators);
}

double log_position(const ObservationRow& r) { return std::log(static_cast<double>(r.position)); }

double sum_squares(const Eigen::VectorXd& v) { return v.squaredNorm(); }

}  // namespace

std::vector<ObservationRow> canonical_order(std::vector<ObservationRow> rows) {
  std::stable_sort(rows.begin(), rows.end(), row_less);
  return rows;
}

std::optional<std::size_t> ModelFit::index(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return i;
  return std::nullopt;
}

double ModelFit::estimate(std::string_view name) const {
  auto i = index(name);
  if (!i) fail(Errc::validation, "model has no coefficient '" + std::string(name) + "'");
  return coefficients[static_cast<Eigen::Index>(*i)];
}

double ModelFit::std_error(std::string_view name) const {
  auto i = index(name);
  if (!i) fail(Errc::validation, "model has no coefficient '" + std::string(name) + "'");
  const auto j = static_cast<Eigen::Index>(*i);
  return std::sqrt(std::max(0.0, vcov(j, j)));
}

ModelFit fit_linear(const std::vector<ObservationRow>& rows, const std::vector<Regressor>& columns,
                    bool absorb_participant, bool absorb_image, std::string specification,
                    const FitOptions& options) {
  if (rows.empty()) fail(Errc::filter, specification + ": no observations left after filtering");
  const auto n = rows.size();
  for (const auto& c : columns)
    if (c.values.size() != n) fail(Errc::dimension, "regressor '" + c.name + "' has wrong length");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (row_less(rows[a], rows[b])) return true;
    if (row_less(rows[b], rows[a])) return false;
    for (const auto& c : columns)
      if (c.values[a] != c.values[b]) return c.values[a] < c.values[b];
    return false;
  });

  const auto ni = static_cast<Eigen::Index>(n);
  const auto k = static_cast<Eigen::Index>(columns.size());
  Eigen::MatrixXd x(ni, k);
  Eigen::VectorXd y(ni);
  std::vector<std::string> participant_keys(n), image_keys(n);
  std::vector<std::string> names;
  for (const auto& c : columns) names.push_back(c.name);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = rows[order[i]];
    y[static_cast<Eigen::Index>(i)] = r.accuracy;
    for (Eigen::Index j = 0; j < k; ++j)
      x(static_cast<Eigen::Index>(i), j) = columns[static_cast<std::size_t>(j)].values[order[i]];
    participant_keys[i] = r.participant_key;
    image_keys[i] = r.image_key;
  }
  Factor images = encode_factor("image", image_keys);
  std::vector<Factor> absorb;
  if (absorb_participant) absorb.push_back(encode_factor("participant", participant_keys));
  if (absorb_image) absorb.push_back(images);

  ModelFit fit;
  fit.specification = std::move(specification);
  fit.n_obs = n;
  fit.n_clusters = images.levels;
  for (const auto& f : absorb) fit.absorbed.push_back(f.name);

  DesignMatrix design(x, names, y, images, absorb);
  auto demeaned = demean_two_way(design, options.demean);
  fit.demean_sweeps = demeaned.sweeps;

  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < k; ++j) {
    const double before = design.x().col(j).cwiseAbs().maxCoeff();
    const double after = demeaned.design.x().col(j).cwiseAbs().maxCoeff();
    if (after <= 1e-8 * std::max(1.0, before)) {
      fit.dropped_columns.push_back(names[static_cast<std::size_t>(j)]);
      fit.warnings.push_back("dropped '" + names[static_cast<std::size_t>(j)] +
                             "': no variation after absorbing fixed effects");
    } else {
      keep.push_back(j);
    }
  }
  const auto reduced = demeaned.design.select_columns(keep);
  const auto ols = fit_ols(reduced.x(), reduced.y(), reduced.names());

  VcovOptions vopt = options.vcov;
  for (const auto& f : absorb)
    if (!f.nested_in(images)) vopt.absorbed_dof += f.levels - 1;
  fit.names = reduced.names();
  fit.coefficients = ols.coefficients;
  fit.vcov = cluster_robust_vcov(reduced.x(), ols.residuals, images, ols.bread, vopt);

  const double ssr = sum_squares(ols.residuals);
  const double sst_within = sum_squares(reduced.y());
  const double y_mean = y.mean();
  const double sst = (y.array() - y_mean).matrix().squaredNorm();
  fit.r2_within = sst_within > 0.0 ? 1.0 - ssr / sst_within : 0.0;
  fit.r2_overall = sst > 0.0 ? 1.0 - ssr / sst : 0.0;

  fit.constant = y_mean;
  for (std::size_t j = 0; j < keep.size(); ++j)
    fit.constant -= design.x().col(keep[j]).mean() * ols.coefficients[static_cast<Eigen::Index>(j)];

  double first = 0, first_n = 0, tenth = 0, tenth_n = 0;
  for (const auto& r : rows) {
    if (r.position == 1) first += r.accuracy, first_n += 1;
    if (r.position == 10) tenth += r.accuracy, tenth_n += 1;
  }
  if (first_n > 0) fit.mean_accuracy_first = first / first_n;
  if (tenth_n > 0) fit.mean_accuracy_tenth = tenth / tenth_n;
  return fit;
}

namespace {

std::vector<ObservationRow> with_covariates(std::vector<ObservationRow> rows,
                                            const std::vector<std::string>& covariates) {
  if (covariates.empty()) return rows;
  std::erase_if(rows, [&](const ObservationRow& r) {
    return std::any_of(covariates.begin(), covariates.end(),
                       [&](const std::string& c) { return !r.moderator(c).has_value(); });
  });
  return rows;
}

void append_covariates(std::vector<Regressor>& cols, const std::vector<ObservationRow>& rows,
                       const std::vector<std::string>& covariates) {
  for (const auto& c : covariates) {
    Regressor reg{c, {}};
    for (const auto& r : rows) reg.values.push_back(*r.moderator(c));
    cols.push_back(std::move(reg));
  }
}

}  // namespace

ModelFit fit_log_position(const std::vector<ObservationRow>& rows, const FilterSpec& filter,
                          const FitOptions& options) {
  auto sample = with_covariates(apply_filter(rows, filter), options.covariates);
  if (!options.include_beyond_ten)
    std::erase_if(sample, [](const ObservationRow& r) { return r.position > 10; });
  std::vector<Regressor> cols{{"log_position", {}}};
  for (const auto& r : sample) cols[0].values.push_back(log_position(r));
  append_covariates(cols, sample, options.covariates);
  return fit_linear(sample, cols, true, true, "log_position", options);
}

std::vector<std::string> position_dummy_names(std::uint32_t baseline) {
  std::vector<std::string> names;
  for (std::uint32_t p = baseline + 1; p <= 10; ++p) names.push_back("pos_" + std::to_string(p));
  names.push_back("pos_11plus");
  return names;
}

namespace {

ModelFit fit_dummies_on(const std::vector<ObservationRow>& sample, const FitOptions& options,
                        std::uint32_t baseline, std::string spec) {
  std::vector<Regressor> cols;
  for (const auto& name : position_dummy_names(baseline)) cols.push_back({name, {}});
  for (const auto& r : sample) {
    std::size_t j = 0;
    for (std::uint32_t p = baseline + 1; p <= 10; ++p, ++j)
      cols[j].values.push_back(r.position == p ? 1.0 : 0.0);
    cols[j].values.push_back(r.position > 10 ? 1.0 : 0.0);
  }
  append_covariates(cols, sample, options.covariates);
  return fit_linear(sample, cols, true, true, std::move(spec), options);
}

}  // namespace

ModelFit fit_position_dummies(const std::vector<ObservationRow>& rows, const FilterSpec& filter,
                              const FitOptions& options, std::uint32_t baseline) {
  if (baseline < 1 || baseline > 9) fail(Errc::configuration, "baseline position must be 1..9");
  auto sample = with_covariates(apply_filter(rows, filter), options.covariates);
  std::erase_if(sample, [&](const ObservationRow& r) { return r.position < baseline; });
  return fit_dummies_on(sample, options, baseline, "position_dummies");
}

ModelFit fit_interaction(const std::vector<ObservationRow>& rows, std::string_view moderator,
                         const FilterSpec& filter, const FitOptions& options) {
  const std::string mod(moderator);
  if (!is_known_moderator(mod) &&
      std::none_of(rows.begin(), rows.end(), [&](const auto& r) { return r.moderators.contains(mod); }))
    fail(Errc::validation, "unknown moderator '" + mod + "'");
  auto sample = with_covariates(apply_filter(rows, filter), options.covariates);
  std::erase_if(sample, [&](const ObservationRow& r) { return !r.moderator(mod).has_value(); });
  if (mod == "first_correct")
    std::erase_if(sample, [](const ObservationRow& r) { return r.position == 1; });
  if (sample.empty()) fail(Errc::filter, "interaction:" + mod + ": no observations with the moderator");
  const double first = *sample.front().moderator(mod);
  if (std::all_of(sample.begin(), sample.end(),
                  [&](const ObservationRow& r) { return *r.moderator(mod) == first; }))
    fail(Errc::degenerate_moderator, "moderator '" + mod + "' is constant in the sample");

  std::vector<Regressor> cols{{"log_position", {}}, {mod, {}}, {mod + "_x_log_position", {}}};
  for (const auto& r : sample) {
    const double lp = log_position(r), m = *r.moderator(mod);
    cols[0].values.push_back(lp);
    cols[1].values.push_back(m);
    cols[2].values.push_back(m * lp);
  }
  append_covariates(cols, sample, options.covariates);
  return fit_linear(sample, cols, false, true, "interaction:" + mod, options);
}

const CurvePoint* Curve::at(std::uint32_t position) const {
  for (const auto& p : points)
    if (p.position == position) return &p;
  return nullptr;
}

namespace {

std::uint32_t bucket(std::uint32_t position) { return std::min<std::uint32_t>(position, 11); }

std::map<std::uint32_t, std::size_t> bucket_counts(const std::vector<ObservationRow>& rows) {
  std::map<std::uint32_t, std::size_t> counts;
  for (const auto& r : rows) counts[bucket(r.position)] += 1;
  return counts;
}

Curve curve_from_fit(const ModelFit& fit, const std::vector<ObservationRow>& sample,
                     std::uint32_t baseline, std::string label) {
  Curve c;
  c.label = std::move(label);
  c.fixed_effects = true;
  c.baseline = baseline;
  const auto counts = bucket_counts(sample);
  auto count_at = [&](std::uint32_t p) {
    auto it = counts.find(p);
    return it == counts.end() ? std::size_t{0} : it->second;
  };
  c.points.push_back({baseline, 0.0, 0.0, 0.0, count_at(baseline)});
  std::uint32_t p = baseline + 1;
  for (const auto& name : position_dummy_names(baseline)) {
    const std::uint32_t pos = name == "pos_11plus" ? 11 : p++;
    if (!fit.has(name)) continue;
    const double b = fit.estimate(name), se = fit.std_error(name);
    c.points.push_back({pos, b, b - kZ95 * se, b + kZ95 * se, count_at(pos)});
  }
  return c;
}

}  // namespace

Curve learning_curve(const std::vector<ObservationRow>& rows, bool fixed_effects,
                     const FilterSpec& filter, const FitOptions& options) {
  const auto sample = apply_filter(rows, filter);
  if (sample.empty()) fail(Errc::filter, "learning curve: no observations left after filtering");
  if (fixed_effects) {
    const auto fit = fit_position_dummies(sample, FilterSpec{}, options);
    return curve_from_fit(fit, sample, 1, "marginal accuracy");
  }
  std::map<std::uint32_t, std::pair<double, std::size_t>> acc;
  for (const auto& r : sample) {
    auto& a = acc[bucket(r.position)];
    a.first += r.accuracy;
    a.second += 1;
  }
  Curve c;
  c.label = "mean accuracy";
  for (const auto& [pos, a] : acc) {
    const double n = static_cast<double>(a.second);
    const double p = a.first / n;
    const double half = kZ95 * std::sqrt(std::max(0.0, p * (1.0 - p)) / n);
    c.points.push_back({pos, p, p - half, p + half, a.second});
  }
  return c;
}

HeteroCurves heterogeneous_curves(const std::vector<ObservationRow>& rows,
                                  std::string_view moderator, const FilterSpec& filter,
                                  const HeteroOptions& options) {
  const std::string mod(moderator);
  auto sample = with_covariates(apply_filter(rows, filter), options.fit.covariates);
  std::erase_if(sample, [&](const ObservationRow& r) { return !r.moderator(mod).has_value(); });
  const std::uint32_t baseline = mod == "first_correct" ? 2 : 1;
  std::erase_if(sample, [&](const ObservationRow& r) { return r.position < baseline; });

  HeteroCurves out;
  out.moderator = mod;
  for (const double level : {1.0, 0.0}) {
    std::vector<ObservationRow> stratum;
    std::copy_if(sample.begin(), sample.end(), std::back_inserter(stratum),
                 [&](const ObservationRow& r) { return *r.moderator(mod) == level; });
    std::set<std::string> images;
    for (const auto& r : stratum) images.insert(r.image_key);
    const std::string tag = mod + "=" + (level == 1.0 ? "1" : "0");
    if (images.size() < std::max<std::size_t>(options.min_clusters, 2))
      fail(Errc::inference, "stratum " + tag + " has " + std::to_string(images.size()) +
                                " image clusters; need " + std::to_string(options.min_clusters));
    auto fit = fit_dummies_on(stratum, options.fit, baseline, "position_dummies:" + tag);
    auto curve = curve_from_fit(fit, stratum, baseline, tag);
    if (level == 1.0) out.with_trait = std::move(curve), out.fit_with = std::move(fit);
    else out.without_trait = std::move(curve), out.fit_without = std::move(fit);
  }
  return out;
}

}  // namespace dfx::econ
