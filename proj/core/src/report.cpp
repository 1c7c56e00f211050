#include "dfx/report.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "dfx/csv.hpp"
#include "dfx/error.hpp"

namespace dfx::report {

using econ::Curve;
using econ::ModelFit;
using nlohmann::ordered_json;

double p_value(double estimate, double se) {
  if (!(se > 0.0) || !std::isfinite(se)) return std::numeric_limits<double>::quiet_NaN();
  return std::erfc(std::abs(estimate / se) / std::sqrt(2.0));
}

std::string stars(double p) {
  if (std::isnan(p)) return "";
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.10) return "*";
  return "";
}

namespace {

std::string fixed(double v, int digits = 4) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  // avoid "-0.0000"
  std::string s(buf);
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
  return s;
}

std::string num(double v) { return std::isnan(v) ? "NA" : csv::format(v); }

std::string pad(const std::string& s, std::size_t width, bool left_align = false) {
  if (s.size() >= width) return s;
  return left_align ? s + std::string(width - s.size(), ' ')
                    : std::string(width - s.size(), ' ') + s;
}

void write_file(const std::filesystem::path& path, const std::string& text,
                std::vector<std::filesystem::path>& written) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io, "cannot write " + path.string());
  out << text;
  if (!out) fail(Errc::io, "write failed for " + path.string());
  written.push_back(path);
}

ordered_json optional_json(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

}  // namespace

std::string format_fit_text(const ModelFit& fit) {
  std::ostringstream o;
  o << fit.specification << "\n";
  o << pad("term", 28, true) << pad("estimate", 14) << pad("std.error", 12) << pad("p", 10)
    << "\n";
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    const double b = fit.coefficients[static_cast<Eigen::Index>(i)];
    const double se = std::sqrt(std::max(0.0, fit.vcov(static_cast<Eigen::Index>(i),
                                                       static_cast<Eigen::Index>(i))));
    const double p = p_value(b, se);
    o << pad(fit.names[i], 28, true) << pad(fixed(b) + pad(stars(p), 3, true), 14)
      << pad(fixed(se), 12) << pad(fixed(p), 10) << "\n";
  }
  o << "constant " << fixed(fit.constant) << "\n";
  o << "observations " << fit.n_obs << ", image clusters " << fit.n_clusters << "\n";
  o << "R2 within " << fixed(fit.r2_within) << ", overall " << fixed(fit.r2_overall) << "\n";
  if (!fit.absorbed.empty()) {
    o << "fixed effects:";
    for (const auto& a : fit.absorbed) o << ' ' << a;
    o << "\n";
  }
  if (fit.mean_accuracy_first) o << "mean accuracy, position 1: " << fixed(*fit.mean_accuracy_first) << "\n";
  if (fit.mean_accuracy_tenth) o << "mean accuracy, position 10: " << fixed(*fit.mean_accuracy_tenth) << "\n";
  for (const auto& d : fit.dropped_columns) o << "dropped: " << d << "\n";
  for (const auto& w : fit.warnings) o << "warning: " << w << "\n";
  o << "* p<0.10, ** p<0.05, *** p<0.01; standard errors clustered by image\n";
  return o.str();
}

std::string format_coefficients_csv(const ModelFit& fit) {
  std::string out = "term,estimate,std_error,t_stat,p_value\n";
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    const double b = fit.coefficients[static_cast<Eigen::Index>(i)];
    const double se = fit.std_error(fit.names[i]);
    const double t = se > 0.0 ? b / se : std::numeric_limits<double>::quiet_NaN();
    out += fit.names[i] + "," + num(b) + "," + num(se) + "," + num(t) + "," +
           num(p_value(b, se)) + "\n";
  }
  return out;
}

namespace {

ordered_json fit_json(const ModelFit& fit) {
  ordered_json coefs = ordered_json::array();
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    const double b = fit.coefficients[static_cast<Eigen::Index>(i)];
    const double se = fit.std_error(fit.names[i]);
    const double p = p_value(b, se);
    coefs.push_back({{"term", fit.names[i]},
                     {"estimate", b},
                     {"std_error", se},
                     {"p_value", std::isnan(p) ? ordered_json(nullptr) : ordered_json(p)}});
  }
  ordered_json vcov = ordered_json::array();
  for (Eigen::Index r = 0; r < fit.vcov.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index c = 0; c < fit.vcov.cols(); ++c) row.push_back(fit.vcov(r, c));
    vcov.push_back(row);
  }
  return {{"specification", fit.specification},
          {"coefficients", coefs},
          {"vcov", vcov},
          {"constant", fit.constant},
          {"n_obs", fit.n_obs},
          {"n_clusters", fit.n_clusters},
          {"r2_within", fit.r2_within},
          {"r2_overall", fit.r2_overall},
          {"absorbed", fit.absorbed},
          {"dropped_columns", fit.dropped_columns},
          {"warnings", fit.warnings},
          {"mean_accuracy_first", optional_json(fit.mean_accuracy_first)},
          {"mean_accuracy_tenth", optional_json(fit.mean_accuracy_tenth)},
          {"demean_sweeps", fit.demean_sweeps}};
}

}  // namespace

std::string format_fit_json(const ModelFit& fit) { return fit_json(fit).dump(2) + "\n"; }

std::string format_curve_csv(const Curve& curve) {
  std::string out = "position,estimate,lower,upper,n\n";
  for (const auto& p : curve.points)
    out += std::to_string(p.position) + "," + num(p.estimate) + "," + num(p.lower) + "," +
           num(p.upper) + "," + std::to_string(p.n) + "\n";
  return out;
}

std::string format_axes_json(const AxisLabels& axes) {
  ordered_json j{{"title", axes.title}, {"x", axes.x}, {"y", axes.y}};
  return j.dump(2) + "\n";
}

Histogram make_histogram(std::string name, AxisLabels axes, const std::vector<double>& values,
                         std::size_t bins, double lo, double hi) {
  if (bins == 0 || !(hi > lo)) fail(Errc::validation, "histogram needs bins > 0 and hi > lo");
  Histogram h;
  h.name = std::move(name);
  h.axes = std::move(axes);
  h.counts.assign(bins, 0);
  const double w = (hi - lo) / static_cast<double>(bins);
  for (std::size_t i = 0; i <= bins; ++i)
    h.edges.push_back(i == bins ? hi : lo + w * static_cast<double>(i));
  for (const double v : values) {
    if (!(v >= lo && v <= hi)) continue;
    auto b = static_cast<std::size_t>((v - lo) / w);
    if (b >= bins) b = bins - 1;
    h.counts[b] += 1;
  }
  return h;
}

namespace {

std::vector<double> group_means(const std::vector<ObservationRow>& rows, bool by_image) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& r : rows) {
    auto& a = acc[by_image ? r.image_key : r.participant_key];
    a.first += r.accuracy;
    a.second += 1;
  }
  std::vector<double> out;
  for (const auto& [k, a] : acc) out.push_back(a.first / static_cast<double>(a.second));
  return out;
}

}  // namespace

Histogram accuracy_per_image(const std::vector<ObservationRow>& rows, std::size_t bins) {
  return make_histogram("accuracy_per_image",
                        {"Mean identification accuracy per image", "Mean accuracy", "Images"},
                        group_means(rows, true), bins, 0.0, 1.0);
}

Histogram accuracy_per_participant(const std::vector<ObservationRow>& rows, std::size_t bins) {
  return make_histogram(
      "accuracy_per_participant",
      {"Mean identification accuracy per participant", "Mean accuracy", "Participants"},
      group_means(rows, false), bins, 0.0, 1.0);
}

Histogram guesses_per_participant(const std::vector<ObservationRow>& rows) {
  std::map<std::string, std::size_t> counts;
  for (const auto& r : rows) counts[r.participant_key] += 1;
  std::size_t max_count = 1;
  std::vector<double> values;
  for (const auto& [k, c] : counts) {
    values.push_back(static_cast<double>(c));
    max_count = std::max(max_count, c);
  }
  // unit bins centred on 1 .. max_count
  return make_histogram("guesses_per_participant",
                        {"Guesses submitted per participant", "Guesses", "Participants"}, values,
                        max_count, 0.5, static_cast<double>(max_count) + 0.5);
}

std::string format_histogram_csv(const Histogram& h) {
  std::string out = "bin_low,bin_high,count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i)
    out += num(h.edges[i]) + "," + num(h.edges[i + 1]) + "," + std::to_string(h.counts[i]) + "\n";
  return out;
}

std::string format_table_text(const Table& table) {
  std::vector<std::string> terms;
  std::set<std::string> seen;
  for (const auto& c : table.columns)
    if (c.fit)
      for (const auto& n : c.fit->names)
        if (seen.insert(n).second) terms.push_back(n);

  std::size_t label_w = 30;
  for (const auto& t : terms) label_w = std::max(label_w, t.size() + 2);
  std::size_t col_w = 14;
  for (const auto& c : table.columns) col_w = std::max(col_w, c.label.size() + 2);
  std::ostringstream o;
  o << table.title << "\n";
  o << pad("", label_w, true);
  for (std::size_t i = 0; i < table.columns.size(); ++i)
    o << pad("(" + std::to_string(i + 1) + ")", col_w);
  o << "\n" << pad("", label_w, true);
  for (const auto& c : table.columns) o << pad(c.label, col_w);
  o << "\n";

  for (const auto& term : terms) {
    std::ostringstream est, se;
    est << pad(term, label_w, true);
    se << pad("", label_w, true);
    for (const auto& c : table.columns) {
      if (c.fit && c.fit->has(term)) {
        const double b = c.fit->estimate(term);
        const double s = c.fit->std_error(term);
        est << pad(fixed(b) + pad(stars(p_value(b, s)), 3, true), col_w);
        se << pad("(" + fixed(s) + ")   ", col_w);
      } else {
        est << pad("", col_w);
        se << pad("", col_w);
      }
    }
    o << est.str() << "\n" << se.str() << "\n";
  }

  auto stat_row = [&](const std::string& label, auto&& cell) {
    o << pad(label, label_w, true);
    for (const auto& c : table.columns) o << pad(c.fit ? cell(*c.fit) : std::string("-"), col_w);
    o << "\n";
  };
  stat_row("Observations", [](const ModelFit& f) { return std::to_string(f.n_obs); });
  stat_row("Image clusters", [](const ModelFit& f) { return std::to_string(f.n_clusters); });
  stat_row("R2 (within)", [](const ModelFit& f) { return fixed(f.r2_within); });
  stat_row("R2 (overall)", [](const ModelFit& f) { return fixed(f.r2_overall); });
  stat_row("Constant", [](const ModelFit& f) { return fixed(f.constant); });
  stat_row("Mean accuracy, 1st image", [](const ModelFit& f) {
    return f.mean_accuracy_first ? fixed(*f.mean_accuracy_first) : std::string("-");
  });
  stat_row("Mean accuracy, 10th image", [](const ModelFit& f) {
    return f.mean_accuracy_tenth ? fixed(*f.mean_accuracy_tenth) : std::string("-");
  });
  auto absorbs = [](const ModelFit& f, const char* name) {
    return std::string(std::find(f.absorbed.begin(), f.absorbed.end(), name) != f.absorbed.end()
                           ? "yes"
                           : "no");
  };
  stat_row("Participant fixed effects", [&](const ModelFit& f) { return absorbs(f, "participant"); });
  stat_row("Image fixed effects", [&](const ModelFit& f) { return absorbs(f, "image"); });
  for (std::size_t i = 0; i < table.columns.size(); ++i)
    if (!table.columns[i].fit)
      o << "(" << i + 1 << ") not estimated: " << table.columns[i].skipped << "\n";
  o << "* p<0.10, ** p<0.05, *** p<0.01; standard errors clustered by image in parentheses\n";
  return o.str();
}

std::string format_table_csv(const Table& table) {
  std::string out = "table,column,term,estimate,std_error,p_value\n";
  for (const auto& c : table.columns) {
    if (!c.fit) continue;
    for (const auto& term : c.fit->names) {
      const double b = c.fit->estimate(term);
      const double s = c.fit->std_error(term);
      out += table.name + "," + c.label + "," + term + "," + num(b) + "," + num(s) + "," +
             num(p_value(b, s)) + "\n";
    }
  }
  return out;
}

namespace {

template <typename Fn>
Column try_column(std::string label, Fn&& fn) {
  Column c;
  c.label = std::move(label);
  try {
    c.fit = fn();
  } catch (const Error& e) {
    c.skipped = std::string(to_string(e.kind())) + ": " + e.what();
  }
  return c;
}

}  // namespace

ReportBundle build_report(const std::vector<ObservationRow>& rows, const ReportOptions& options) {
  using namespace econ;
  ReportBundle b;
  b.n_rows = rows.size();

  Table t1{"table1", "Accuracy on log image position (participant and image fixed effects)", {}};
  Table t2{"table2", "Accuracy on image position dummies (participant and image fixed effects)", {}};
  for (int col = 1; col <= 4; ++col) {
    const auto filter = FilterSpec::table_column(col);
    const std::string label = "col" + std::to_string(col);
    t1.columns.push_back(try_column(label, [&] { return fit_log_position(rows, filter, options.fit); }));
    t2.columns.push_back(
        try_column(label, [&] { return fit_position_dummies(rows, filter, options.fit); }));
  }
  Table t3{"table3", "Moderated learning: log position interactions (image fixed effects)", {}};
  for (const auto mod : kModerators)
    t3.columns.push_back(try_column(std::string(mod), [&] {
      return fit_interaction(rows, mod, FilterSpec::interaction_sample(), options.fit);
    }));
  b.tables = {std::move(t1), std::move(t2), std::move(t3)};

  const FilterSpec curve_filter{10, false, false, false, false};
  auto add_curve = [&](std::string name, AxisLabels axes, auto&& fn) {
    try {
      b.curves.push_back({std::move(name), std::move(axes), fn()});
    } catch (const Error& e) {
      b.skipped_curves.push_back(name + ": " + e.what());
    }
  };
  add_curve("curve_raw",
            {"Mean accuracy by image position", "Image position (11 = more than 10)",
             "Mean accuracy"},
            [&] { return learning_curve(rows, false, curve_filter, options.fit); });
  add_curve("curve_fe",
            {"Marginal accuracy relative to the first image, with fixed effects",
             "Image position (11 = more than 10)", "Marginal accuracy"},
            [&] { return learning_curve(rows, true, curve_filter, options.fit); });
  if (options.heterogeneous) {
    for (const auto mod : kModerators) {
      const std::string m(mod);
      try {
        HeteroOptions ho;
        ho.fit = options.fit;
        auto h = heterogeneous_curves(rows, m, curve_filter, ho);
        const AxisLabels axes{"Heterogeneous learning: " + m, "Image position (11 = more than 10)",
                              "Marginal accuracy"};
        b.curves.push_back({"hetero_" + m + "_with", axes, std::move(h.with_trait)});
        b.curves.push_back({"hetero_" + m + "_without", axes, std::move(h.without_trait)});
      } catch (const Error& e) {
        b.skipped_curves.push_back("hetero_" + m + ": " + e.what());
      }
    }
  }

  b.histograms = {accuracy_per_image(rows), accuracy_per_participant(rows),
                  guesses_per_participant(rows)};
  return b;
}

std::vector<std::filesystem::path> write_report(const ReportBundle& bundle,
                                                const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(Errc::io, "cannot create " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;

  ordered_json index{{"n_rows", bundle.n_rows}, {"tables", ordered_json::array()},
                     {"curves", ordered_json::array()}, {"skipped_curves", bundle.skipped_curves},
                     {"histograms", ordered_json::array()}};
  for (const auto& t : bundle.tables) {
    write_file(dir / (t.name + ".txt"), format_table_text(t), written);
    write_file(dir / (t.name + ".csv"), format_table_csv(t), written);
    ordered_json cols = ordered_json::array();
    for (const auto& c : t.columns)
      cols.push_back(c.fit ? ordered_json{{"label", c.label}, {"fit", fit_json(*c.fit)}}
                           : ordered_json{{"label", c.label}, {"skipped", c.skipped}});
    index["tables"].push_back({{"name", t.name}, {"title", t.title}, {"columns", cols}});
  }
  for (const auto& c : bundle.curves) {
    write_file(dir / (c.name + ".csv"), format_curve_csv(c.curve), written);
    write_file(dir / (c.name + ".axes.json"), format_axes_json(c.axes), written);
    index["curves"].push_back(c.name);
  }
  for (const auto& h : bundle.histograms) {
    write_file(dir / (h.name + ".csv"), format_histogram_csv(h), written);
    write_file(dir / (h.name + ".axes.json"), format_axes_json(h.axes), written);
    index["histograms"].push_back(h.name);
  }
  write_file(dir / "report.json", index.dump(2) + "\n", written);
  return written;
}

}  // namespace dfx::report
