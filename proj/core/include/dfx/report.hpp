#pragma once

// Tables, curves and histograms assembled from model fits and the observation
// sample. Everything here is deterministic text: the same inputs give the same
// bytes.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dfx/econ/models.hpp"
#include "dfx/model.hpp"

namespace dfx::report {

/// Two-sided normal p-value for estimate / se; NaN when se is not positive.
double p_value(double estimate, double se);
/// "***", "**", "*" at the 1%, 5%, 10% levels.
std::string stars(double p);

std::string format_fit_text(const econ::ModelFit& fit);
/// term,estimate,std_error,t_stat,p_value
std::string format_coefficients_csv(const econ::ModelFit& fit);
std::string format_fit_json(const econ::ModelFit& fit);

/// position,estimate,lower,upper,n
std::string format_curve_csv(const econ::Curve& curve);

struct AxisLabels {
  std::string title;
  std::string x;
  std::string y;
};
std::string format_axes_json(const AxisLabels& axes);

struct Histogram {
  std::string name;
  AxisLabels axes;
  std::vector<double> edges;  // size = counts + 1; last bin is closed
  std::vector<std::size_t> counts;
};

/// Equal-width bins over [lo, hi]; values outside are ignored.
Histogram make_histogram(std::string name, AxisLabels axes, const std::vector<double>& values,
                         std::size_t bins, double lo, double hi);
Histogram accuracy_per_image(const std::vector<ObservationRow>& rows, std::size_t bins = 20);
Histogram accuracy_per_participant(const std::vector<ObservationRow>& rows,
                                   std::size_t bins = 20);
/// One unit-width bin per guess count, 1 .. max observed.
Histogram guesses_per_participant(const std::vector<ObservationRow>& rows);
/// bin_low,bin_high,count
std::string format_histogram_csv(const Histogram& h);

/// A table column: the fit, or why it could not be estimated.
struct Column {
  std::string label;
  std::optional<econ::ModelFit> fit;
  std::string skipped;
};

struct Table {
  std::string name;
  std::string title;
  std::vector<Column> columns;
};

/// Coefficients with stars over standard errors, one column per fit, followed
/// by observations, clusters, R-squared and endpoint accuracies.
std::string format_table_text(const Table& table);
/// table,column,term,estimate,std_error,p_value in long format.
std::string format_table_csv(const Table& table);

struct NamedCurve {
  std::string name;
  AxisLabels axes;
  econ::Curve curve;
};

struct ReportBundle {
  std::size_t n_rows = 0;
  std::vector<Table> tables;  // log position, position dummies, interactions
  std::vector<NamedCurve> curves;
  std::vector<std::string> skipped_curves;  // "name: reason"
  std::vector<Histogram> histograms;
};

struct ReportOptions {
  econ::FitOptions fit{};
  bool heterogeneous = true;
};

/// Fits that cannot be estimated on the sample (empty, degenerate moderator,
/// too few clusters) are recorded as skipped rather than thrown, so an empty
/// sample gives an empty but complete bundle.
ReportBundle build_report(const std::vector<ObservationRow>& rows,
                          const ReportOptions& options = {});

/// Writes the bundle as text files under `dir` (created if needed) and returns
/// the written paths in order.
std::vector<std::filesystem::path> write_report(const ReportBundle& bundle,
                                                const std::filesystem::path& dir);

}  // namespace dfx::report
