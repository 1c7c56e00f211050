#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <csignal>
#include <fstream>
#include <pthread.h>
#include <thread>

#include "dfx/csv.hpp"
#include "dfx/econ/models.hpp"
#include "dfx/error.hpp"
#include "dfx/log.hpp"
#include "dfx/observations.hpp"
#include "dfx/report.hpp"
#include "dfx/service.hpp"
#include "dfx/simulator.hpp"

namespace dfx::cli {

namespace {

namespace fs = std::filesystem;
using econ::FilterSpec;

struct SampleArgs {
  std::string log;
  std::string features;
  std::string observations;
};

struct FilterArgs {
  std::uint32_t min_guesses = 0;
  bool drop_controls = false;
  bool drop_repeats = false;
  bool high_quality_only = false;
  bool first_ten_only = false;

  FilterSpec spec() const {
    return FilterSpec{min_guesses, drop_controls, drop_repeats, high_quality_only, first_ten_only};
  }
};

void add_sample_options(CLI::App* cmd, SampleArgs& s) {
  cmd->add_option("--log", s.log, "Experiment log (JSON lines)")->envname("DFX_LOG");
  cmd->add_option("--features", s.features, "Feature table")->envname("DFX_FEATURES");
  cmd->add_option("--observations", s.observations,
                  "Observation rows; replaces --log/--features");
}

void add_filter_options(CLI::App* cmd, FilterArgs& f) {
  cmd->add_option("--min-guesses", f.min_guesses, "Drop participants with fewer guesses");
  cmd->add_flag("--drop-controls", f.drop_controls, "Drop control_untouched trials");
  cmd->add_flag("--drop-repeats", f.drop_repeats, "Drop repeated views of an image");
  cmd->add_flag("--high-quality-only", f.high_quality_only, "Keep images rated high quality");
  cmd->add_flag("--first-ten-only", f.first_ten_only, "Keep each participant's first ten guesses");
}

std::vector<ObservationRow> load_sample(const SampleArgs& s) {
  if (!s.observations.empty()) return read_observations(s.observations);
  if (s.log.empty()) fail(Errc::usage, "either --observations or --log is required");
  const LogState state = replay(s.log);
  const FeatureTable features = s.features.empty() ? FeatureTable{} : read_feature_table(s.features);
  return build_observations(state, features);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io, "cannot write " + path.string());
  out << text;
  if (!out) fail(Errc::io, "write failed for " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(Errc::io, "cannot create " + dir.string() + ": " + ec.message());
}

void write_fit(const fs::path& dir, const std::string& stem, const econ::ModelFit& fit) {
  write_text(dir / (stem + ".txt"), report::format_fit_text(fit));
  write_text(dir / (stem + ".csv"), report::format_coefficients_csv(fit));
  write_text(dir / (stem + ".json"), report::format_fit_json(fit));
}

void write_curve(const fs::path& dir, const std::string& stem, const econ::Curve& curve,
                 const report::AxisLabels& axes) {
  write_text(dir / (stem + ".csv"), report::format_curve_csv(curve));
  write_text(dir / (stem + ".axes.json"), report::format_axes_json(axes));
}

void check_moderator(const std::string& m) {
  if (!is_known_moderator(m)) fail(Errc::usage, "unknown moderator '" + m + "'");
}

int serve(const std::string& host, int port, const std::string& manipulated,
          const std::string& originals, std::uint64_t seed, const std::string& log_path,
          std::optional<double> untouched_weight, std::ostream& out) {
  ServiceConfig cfg;
  cfg.pools.manipulated_pool = read_pool(manipulated, ImageKind::manipulated);
  cfg.pools.original_pool = read_pool(originals, ImageKind::control_original);
  cfg.pools.rng_seed = seed;
  cfg.pools.control_untouched_weight = untouched_weight;
  if (!log_path.empty()) cfg.log_path = log_path;
  ExperimentService service(std::move(cfg));
  HttpServer server(service);

  // Handle INT/TERM on a waiting thread rather than in a signal handler.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  const int bound = server.bind(host, port);
  if (bound < 0) fail(Errc::io, "cannot bind " + host + ":" + std::to_string(port));
  out << "listening on " << host << ":" << bound << std::endl;
  std::thread listener([&] { server.listen_after_bind(); });
  int sig = 0;
  sigwait(&set, &sig);
  server.stop();
  listener.join();
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deepfake-detection experiment toolkit", "dfx"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "dfx 0.1.0");

  // serve
  std::string host = "127.0.0.1", manipulated, originals, log_path;
  int port = 8080;
  std::uint64_t seed = 0;
  std::optional<double> untouched_weight;
  auto* c_serve = app.add_subcommand("serve", "Run the experiment HTTP service");
  c_serve->add_option("--host", host, "Listen address")->envname("DFX_HOST");
  c_serve->add_option("--port", port, "Listen port (0 picks one)")->envname("DFX_PORT");
  c_serve->add_option("--manipulated", manipulated, "Manipulated pool manifest")
      ->envname("DFX_MANIPULATED")->required();
  c_serve->add_option("--originals", originals, "Original pool manifest")
      ->envname("DFX_ORIGINALS")->required();
  c_serve->add_option("--seed", seed, "Randomization seed")->envname("DFX_SEED");
  c_serve->add_option("--log", log_path, "Log file (appended; replayed on start)")
      ->envname("DFX_LOG");
  c_serve->add_option("--untouched-weight", untouched_weight,
                      "Probability of drawing a control_untouched image");

  // fixtures
  FixtureOptions fx;
  std::string fixtures_out = "fixtures";
  auto* c_fix = app.add_subcommand("fixtures", "Generate synthetic images, masks and manifests");
  c_fix->add_option("--out", fixtures_out, "Output directory")->envname("DFX_OUT");
  c_fix->add_option("--manipulated", fx.manipulated, "Manipulated images");
  c_fix->add_option("--originals", fx.originals, "Original images");
  c_fix->add_option("--untouched", fx.untouched, "Control_untouched images");
  c_fix->add_option("--rows", fx.rows, "Image height");
  c_fix->add_option("--cols", fx.cols, "Image width");
  c_fix->add_option("--seed", fx.seed, "Seed")->envname("DFX_SEED");

  // simulate
  std::string sim_config, sim_out = "sim", sim_manip, sim_orig;
  std::optional<std::uint64_t> sim_seed;
  std::vector<std::size_t> pool_sizes{440, 440, 0};
  auto* c_sim = app.add_subcommand("simulate", "Simulate participants from a planted model");
  c_sim->add_option("--config", sim_config, "DGP configuration (JSON)")
      ->envname("DFX_CONFIG")->required();
  c_sim->add_option("--out", sim_out, "Output directory")->envname("DFX_OUT");
  c_sim->add_option("--seed", sim_seed, "Override the configured seed")->envname("DFX_SEED");
  c_sim->add_option("--manipulated", sim_manip, "Manipulated pool manifest");
  c_sim->add_option("--originals", sim_orig, "Original pool manifest");
  c_sim->add_option("--pool-sizes", pool_sizes, "Synthetic pool: manipulated originals untouched")
      ->expected(3);

  // features
  std::string feat_manifest, feat_labels, feat_out = "features.csv";
  auto* c_feat = app.add_subcommand("features", "Compute the feature table for an image manifest");
  c_feat->add_option("--manifest", feat_manifest, "Manifest: image_id,kind,path[,mask]")
      ->required();
  c_feat->add_option("--labels", feat_labels, "Labels: image_id,subjective_quality,has_person");
  c_feat->add_option("--out", feat_out, "Output feature table");

  // analyze
  SampleArgs sample;
  FilterArgs filter;
  std::string analyze_out = "analysis";
  std::string moderator;
  std::vector<std::string> covariates;
  bool no_beyond_ten = false;
  auto* c_an = app.add_subcommand("analyze", "Estimate a model");
  c_an->require_subcommand(1);
  auto add_common = [&](CLI::App* cmd) {
    add_sample_options(cmd, sample);
    add_filter_options(cmd, filter);
    cmd->add_option("--out", analyze_out, "Output directory")->envname("DFX_OUT");
    cmd->add_option("--covariate", covariates, "Extra regressor taken from moderators");
  };
  auto* a_eq1 = c_an->add_subcommand("eq1", "Accuracy on log position, two-way FE");
  add_common(a_eq1);
  a_eq1->add_flag("--no-beyond-ten", no_beyond_ten, "Keep positions 1..10 only");
  auto* a_eq2 = c_an->add_subcommand("eq2", "Accuracy on position dummies, two-way FE");
  add_common(a_eq2);
  auto* a_int = c_an->add_subcommand("interaction", "Moderator interaction with log position");
  add_common(a_int);
  a_int->add_option("--moderator", moderator, "Moderator name")->required();
  auto* a_curves = c_an->add_subcommand("curves", "Raw and fixed-effect learning curves");
  add_common(a_curves);
  auto* a_het = c_an->add_subcommand("hetero", "Learning curves by moderator stratum");
  add_common(a_het);
  a_het->add_option("--moderator", moderator, "Moderator name")->required();
  std::size_t min_clusters = 2;
  a_het->add_option("--min-clusters", min_clusters, "Minimum image clusters per stratum");

  // report
  SampleArgs rep_sample;
  std::string report_out = "report";
  bool no_hetero = false;
  auto* c_rep = app.add_subcommand("report", "Write every table, curve and histogram");
  add_sample_options(c_rep, rep_sample);
  c_rep->add_option("--out", report_out, "Output directory")->envname("DFX_OUT");
  c_rep->add_flag("--no-hetero", no_hetero, "Skip the per-moderator curves");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << "dfx 0.1.0\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "dfx: usage: " << msg << "\n";
    return 2;
  }

  try {
    if (*c_serve)
      return serve(host, port, manipulated, originals, seed, log_path, untouched_weight, out);

    if (*c_fix) {
      const auto set = generate_fixtures(fx, fixtures_out);
      out << "wrote " << set.manipulated.size() << " manipulated and " << set.originals.size()
          << " original images to " << fixtures_out << "\n";
      return 0;
    }

    if (*c_sim) {
      auto cfg = read_dgp_config(sim_config);
      if (sim_seed) cfg.seed = *sim_seed;
      DyadPools pools;
      if (!sim_manip.empty() || !sim_orig.empty()) {
        if (sim_manip.empty() || sim_orig.empty())
          fail(Errc::usage, "--manipulated and --originals go together");
        pools.manipulated_pool = read_pool(sim_manip, ImageKind::manipulated);
        pools.original_pool = read_pool(sim_orig, ImageKind::control_original);
        pools.rng_seed = cfg.seed;
      } else {
        pools = synthetic_pools(pool_sizes[0], pool_sizes[1], cfg.seed, pool_sizes[2]);
      }
      pools.validate();
      const auto result = simulate(cfg, pools);
      ensure_dir(sim_out);
      write_log(fs::path(sim_out) / "log.jsonl", result.records);
      write_feature_table(fs::path(sim_out) / "features.csv", result.features);
      out << "simulated " << result.trials << " trials, clip rate "
          << csv::format(result.clip_rate()) << "\n";
      return 0;
    }

    if (*c_feat) {
      const auto table = features_from_manifest(
          feat_manifest, feat_labels.empty() ? std::nullopt : std::optional<fs::path>(feat_labels));
      write_feature_table(feat_out, table);
      out << "wrote " << table.size() << " feature rows to " << feat_out << "\n";
      return 0;
    }

    if (*c_an) {
      econ::FitOptions opts;
      opts.covariates = covariates;
      opts.include_beyond_ten = !no_beyond_ten;
      for (const auto& c : covariates) check_moderator(c);
      const auto rows = load_sample(sample);
      const fs::path dir(analyze_out);
      ensure_dir(dir);
      const auto spec = filter.spec();

      if (*a_eq1) {
        const auto fit = econ::fit_log_position(rows, spec, opts);
        write_fit(dir, "eq1", fit);
        out << "log_position " << csv::format(fit.estimate("log_position")) << " (se "
            << csv::format(fit.std_error("log_position")) << "), n " << fit.n_obs << "\n";
      } else if (*a_eq2) {
        const auto fit = econ::fit_position_dummies(rows, spec, opts);
        write_fit(dir, "eq2", fit);
        out << "position dummies estimated on " << fit.n_obs << " rows\n";
      } else if (*a_int) {
        check_moderator(moderator);
        // The interaction sample is the default; explicit flags replace it.
        const bool any_flag = filter.min_guesses || filter.drop_controls || filter.drop_repeats ||
                              filter.high_quality_only || filter.first_ten_only;
        const auto fit = econ::fit_interaction(
            rows, moderator, any_flag ? spec : FilterSpec::interaction_sample(), opts);
        write_fit(dir, "interaction_" + moderator, fit);
        const auto term = moderator + "_x_log_position";
        out << term << " " << csv::format(fit.estimate(term)) << " (se "
            << csv::format(fit.std_error(term)) << "), n " << fit.n_obs << "\n";
      } else if (*a_curves) {
        const report::AxisLabels raw{"Mean accuracy by image position",
                                     "Image position (11 = more than 10)", "Mean accuracy"};
        const report::AxisLabels fe{"Marginal accuracy relative to the first image",
                                    "Image position (11 = more than 10)", "Marginal accuracy"};
        write_curve(dir, "curve_raw", econ::learning_curve(rows, false, spec, opts), raw);
        write_curve(dir, "curve_fe", econ::learning_curve(rows, true, spec, opts), fe);
        out << "wrote curve_raw and curve_fe to " << dir.string() << "\n";
      } else if (*a_het) {
        check_moderator(moderator);
        econ::HeteroOptions ho;
        ho.fit = opts;
        ho.min_clusters = min_clusters;
        const auto h = econ::heterogeneous_curves(rows, moderator, spec, ho);
        const report::AxisLabels axes{"Heterogeneous learning: " + moderator,
                                      "Image position (11 = more than 10)", "Marginal accuracy"};
        write_curve(dir, "hetero_" + moderator + "_with", h.with_trait, axes);
        write_curve(dir, "hetero_" + moderator + "_without", h.without_trait, axes);
        write_fit(dir, "hetero_" + moderator + "_with_fit", h.fit_with);
        write_fit(dir, "hetero_" + moderator + "_without_fit", h.fit_without);
        out << "wrote hetero_" << moderator << " curves to " << dir.string() << "\n";
      }
      return 0;
    }

    if (*c_rep) {
      const auto rows = load_sample(rep_sample);
      report::ReportOptions ro;
      ro.heterogeneous = !no_hetero;
      const auto bundle = report::build_report(rows, ro);
      const auto written = report::write_report(bundle, report_out);
      write_observations(fs::path(report_out) / "observations.csv", rows);
      out << "wrote " << written.size() + 1 << " files to " << report_out << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "dfx: " << to_string(e.kind()) << ": " << msg << "\n";
    return e.kind() == Errc::usage ? 2 : 1;
  } catch (const std::exception& e) {
    err << "dfx: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace dfx::cli
