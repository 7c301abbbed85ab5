// Command-line front end: run ladders, calibrate, assemble bounds, emit plot
// data and run the oracle suites.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gibbsbound/experiment.hpp"
#include "gibbsbound/kernels.hpp"
#include "gibbsbound/oracle.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitSuite = 2;
constexpr int kExitDiverged = 3;

using namespace gibbs;

struct RunArgs {
  std::string config;
  std::string ladder;
  std::string labels;
  std::string out_dir;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
};

ExperimentConfig resolve_config(const RunArgs& a) {
  KeyValues kv;
  if (!a.config.empty()) kv = load_key_values(a.config);
  for (const auto& s : a.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  if (!a.ladder.empty()) kv["ladder"] = a.ladder;
  if (!a.labels.empty()) kv["labels"] = a.labels;
  if (!a.out_dir.empty()) kv["out_dir"] = a.out_dir;
  if (a.seed) kv["seed"] = std::to_string(*a.seed);
  if (a.jobs) kv["jobs"] = std::to_string(*a.jobs);
  return ExperimentConfig::from_key_values(kv);
}

void print_report(const std::string& name, const BoundReport& report) {
  std::printf("%s labels (r = %.6g, n = %zu, delta = %g)\n", name.c_str(), report.r, report.n,
              report.delta);
  std::printf("  %10s %10s %10s %12s %10s %10s\n", "beta", "train01", "loss", "gamma", "budget",
              "bound01");
  for (const auto& row : report.rows)
    std::printf("  %10g %10.4f %10.4f %12.4f %10.4f %10.4f\n", row.beta, row.train01,
                row.train_loss, row.gamma, row.budget, row.bound01);
  if (report.small_sample_warning) std::printf("  warning: n < 8, the kl budget does not apply\n");
}

int cmd_run(const RunArgs& args) {
  const auto cfg = resolve_config(args);
  std::printf("config %s, kernels %s, output %s\n", cfg.digest().c_str(),
              std::string(kernels::backend_name(kernels::active_backend())).c_str(),
              cfg.out_dir.string().c_str());
  const auto result = run_experiment(cfg);
  for (const auto& est : result.conditions)
    for (const auto& r : est.rungs)
      if (r.diverged)
        std::fprintf(stderr, "%s labels, beta %g: chain diverged (%s)\n",
                     condition_name(est.condition).c_str(), r.beta, r.error.c_str());
  if (result.all_diverged) {
    std::fprintf(stderr, "every chain diverged; no bound was produced\n");
    return kExitDiverged;
  }
  for (const auto& [cond, report] : result.reports) print_report(condition_name(cond), report);
  return kExitOk;
}

GammaReading parse_reading(const std::string& s) {
  if (s == "posterior_mean") return GammaReading::PosteriorMean;
  if (s == "drawn") return GammaReading::Drawn;
  throw ConfigError("gamma reading must be posterior_mean or drawn");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generalization bounds for Gibbs posteriors sampled by Langevin dynamics"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run true- and random-label ladders and write reports");
  auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("-c,--config", run_args.config, "Config file (key = value)");
    sub->add_option("--beta-ladder", run_args.ladder, "Comma-separated ladder starting at 0");
    sub->add_option("--labels", run_args.labels, "true, random or both")
        ->check(CLI::IsMember({"true", "random", "both"}));
    sub->add_option("--seed", run_args.seed, "Master seed");
    sub->add_option("--out-dir", run_args.out_dir, "Output directory");
    sub->add_option("--jobs", run_args.jobs, "Worker threads");
    sub->add_option("--set", run_args.sets, "Override a config key (key=value)");
  };
  add_run_flags(run);

  std::string estimates_path, calibration_path, out_csv, out_json, reading = "posterior_mean";
  double delta = 0.01;
  auto* calib = app.add_subcommand("calibrate", "Calibration factor from random-label estimates");
  calib->add_option("--estimates", estimates_path, "estimates_random.json")->required();
  calib->add_option("--delta", delta, "Confidence parameter")->check(CLI::Range(0.0, 1.0));
  calib->add_option("--out", out_json, "Write calibration JSON here");
  calib->add_option("--gamma-reading", reading, "posterior_mean or drawn");

  std::optional<double> fixed_r;
  bool uncalibrated = false, no_single_draw = false;
  auto* bound = app.add_subcommand("bound", "Assemble a bound report from estimates");
  bound->add_option("--estimates", estimates_path, "estimates_{true,random}.json")->required();
  bound->add_option("--delta", delta, "Confidence parameter")->check(CLI::Range(0.0, 1.0));
  auto* r_opt = bound->add_option("--r", fixed_r, "Calibration factor");
  auto* cal_opt = bound->add_option("--calibration", calibration_path, "calibration.json");
  auto* unc_opt = bound->add_flag("--uncalibrated", uncalibrated, "Use r = 1");
  r_opt->excludes(cal_opt)->excludes(unc_opt);
  cal_opt->excludes(unc_opt);
  bound->add_flag("--no-single-draw", no_single_draw, "Omit the single-draw column");
  bound->add_option("--out-csv", out_csv, "Report CSV");
  bound->add_option("--out-json", out_json, "Report JSON");
  bound->add_option("--gamma-reading", reading, "posterior_mean or drawn");

  std::string report_path, curves_path;
  auto* curves = app.add_subcommand("emit-curves", "Tidy plot data from a report CSV");
  curves->add_option("report", report_path, "Report CSV")->required();
  curves->add_option("-o,--out", curves_path, "Output CSV")->required();

  std::uint64_t oracle_seed = OracleOptions{}.seed;
  double kl_tol = kDefaultKlInverseTolerance;
  std::string fixtures_dir = GIBBSBOUND_FIXTURE_DIR;
  bool no_fixtures = false;
  auto* oracle = app.add_subcommand("oracle-check", "Run the finite-space validation suites");
  oracle->add_option("--seed", oracle_seed, "Suite seed");
  oracle->add_option("--kl-inverse-tol", kl_tol, "Bisection tolerance for the kl inverse");
  oracle->add_option("--fixtures", fixtures_dir, "Fixture directory");
  oracle->add_flag("--no-fixtures", no_fixtures, "Skip fixture verification");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(run_args);

    if (*calib) {
      const auto est = read_estimates_json(estimates_path);
      const auto cal = calibrate_from_estimates(est, delta, parse_reading(reading));
      std::printf("r = %.9g (%zu bisection steps)\n", cal.r, cal.iterations);
      for (std::size_t k = 0; k < cal.rung_bounds.size(); ++k)
        std::printf("  beta %10g  bound01 %.6f\n", est.ladder[k], cal.rung_bounds[k]);
      if (!out_json.empty()) write_calibration_json(cal, delta, est.config_digest, out_json);
      return kExitOk;
    }

    if (*bound) {
      const auto est = read_estimates_json(estimates_path);
      double r = 1.0;
      if (fixed_r) r = *fixed_r;
      else if (!calibration_path.empty()) r = read_calibration_r(calibration_path);
      else if (!uncalibrated)
        throw ConfigError("bound needs --r, --calibration or --uncalibrated");
      const auto report = report_from_estimates(est, delta, r, !no_single_draw, std::nullopt,
                                                parse_reading(reading));
      print_report(condition_name(est.condition), report);
      if (!out_csv.empty()) write_report_csv(report, std::nullopt, out_csv);
      if (!out_json.empty())
        write_report_json(report, {condition_name(est.condition), est.config_digest, uncalibrated,
                                   std::nullopt},
                          out_json);
      return kExitOk;
    }

    if (*curves) {
      const auto rows = emit_curves(report_path, curves_path);
      std::printf("wrote %zu rows to %s\n", rows, curves_path.c_str());
      return kExitOk;
    }

    if (*oracle) {
      OracleOptions opt;
      opt.seed = oracle_seed;
      opt.kl_inverse_tolerance = kl_tol;
      if (!no_fixtures) opt.fixtures_dir = fixtures_dir;
      const auto report = run_oracle_suites(opt);
      for (const auto& c : report.checks)
        std::printf("%-4s %s/%s: %s\n", c.passed ? "ok" : "FAIL", c.suite.c_str(),
                    c.name.c_str(), c.detail.c_str());
      std::printf("%zu checks, %zu failed\n", report.checks.size(), report.failures());
      return report.passed() ? kExitOk : kExitSuite;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitConfig;
  } catch (const CalibrationInfeasible& e) {
    std::fprintf(stderr, "calibration failed: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
  return kExitOk;
}
