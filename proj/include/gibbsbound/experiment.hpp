#pragma once

// Experiment orchestration: configuration, paired true/random-label ladder
// runs, persistence of chains, estimates and bound reports.
//
// Configuration is a flat "key = value" text file; see configs/ for the
// recognised keys.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "gibbsbound/bounds.hpp"
#include "gibbsbound/calibration.hpp"
#include "gibbsbound/data.hpp"
#include "gibbsbound/ergodic.hpp"
#include "gibbsbound/model.hpp"
#include "gibbsbound/rng.hpp"
#include "gibbsbound/sampler.hpp"

namespace gibbs {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using KeyValues = std::map<std::string, std::string>;

/// Parses "key = value" lines; '#' starts a comment. Throws ConfigError.
KeyValues parse_key_values(const std::string& text);
KeyValues load_key_values(const std::filesystem::path& path);

enum class DatasetKind { Synthetic, Idx, Cifar };
enum class LabelsMode { Both, True, Random };
enum class GammaReading { PosteriorMean, Drawn };

struct DatasetSource {
  DatasetKind kind = DatasetKind::Synthetic;
  SyntheticSpec synthetic;
  /// Held-out synthetic examples drawn from the same distribution.
  std::size_t synthetic_test_n = 0;
  std::filesystem::path idx_images, idx_labels, idx_test_images, idx_test_labels;
  std::vector<std::filesystem::path> cifar_files, cifar_test_files;
  std::optional<std::set<int>> positive_classes;
  /// Keep only the first `subsample` training examples (0 keeps all).
  std::size_t subsample = 0;
  std::size_t test_subsample = 0;
};

struct ExperimentConfig {
  DatasetSource data;
  Architecture arch{{20, 32, 1}};
  LossConfig loss;
  /// beta and seed are filled in per chain.
  SamplerConfig sampler;
  bool minibatch_auto = true;
  StopConfig stop;
  ErgodicConfig ergodic;
  TemperatureLadder ladder = TemperatureLadder::standard();
  double delta = 0.01;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "gibbs_out";
  LabelsMode labels = LabelsMode::Both;
  bool warm_start = false;
  bool single_draw = true;
  bool uncalibrated = false;
  /// Fixed calibration factor, used when no random-label run is available.
  std::optional<double> fixed_r;
  std::optional<StabilityInputs> penalties;
  GammaReading gamma_reading = GammaReading::PosteriorMean;
  std::size_t jobs = 1;

  /// Throws ConfigError.
  static ExperimentConfig from_key_values(const KeyValues& kv);
  /// Canonical key/value form of the resolved configuration.
  KeyValues to_key_values() const;
  /// FNV-1a digest (hex) of to_key_values().
  std::string digest() const;
};

/// Per-rung, per-condition summary of one chain.
struct RungResult {
  double beta = 0.0;
  bool diverged = false;
  std::string error;
  std::size_t stop_step = 0;
  bool stopped_by_rule = false;
  double mean_loss = 0.0;
  double mean_01 = 0.0;
  SingleDraw final_draw;
  std::optional<double> heldout_mean_01;
  std::optional<double> heldout_final_01;
};

struct ConditionEstimates {
  LabelCondition condition = LabelCondition::True;
  std::size_t n = 0;
  std::vector<double> ladder;
  std::vector<RungResult> rungs;
  std::string config_digest;

  /// Rungs 0..k-1 before the first diverged rung.
  std::size_t usable_rungs() const;
  LadderEstimates estimates(std::size_t rungs) const;
  std::vector<SingleDraw> single_draws(std::size_t rungs) const;
  bool has_heldout() const;
};

std::string condition_name(LabelCondition c);

void write_estimates_json(const ConditionEstimates& est, const std::filesystem::path& path);
ConditionEstimates read_estimates_json(const std::filesystem::path& path);

/// Held-out columns appended to a report (evaluation only).
struct HeldoutColumns {
  std::vector<double> mean_01;
  std::vector<double> final_01;
};

struct ReportMeta {
  std::string condition;
  std::string config_digest;
  bool uncalibrated = false;
  std::optional<CalibrationResult> calibration;
};

void write_report_csv(const BoundReport& report, const std::optional<HeldoutColumns>& heldout,
                      const std::filesystem::path& path);
void write_report_json(const BoundReport& report, const ReportMeta& meta,
                       const std::filesystem::path& path);
void write_calibration_json(const CalibrationResult& cal, double delta,
                            const std::string& digest, const std::filesystem::path& path);
double read_calibration_r(const std::filesystem::path& path);

/// Bound report of one condition from its estimates (no held-out input).
BoundReport report_from_estimates(const ConditionEstimates& est, double delta, double r,
                                  bool single_draw,
                                  const std::optional<StabilityInputs>& penalties,
                                  GammaReading reading);

CalibrationResult calibrate_from_estimates(const ConditionEstimates& est, double delta,
                                           GammaReading reading);

struct ExperimentResult {
  std::vector<ConditionEstimates> conditions;
  std::optional<CalibrationResult> calibration;
  double r = 1.0;
  std::map<LabelCondition, BoundReport> reports;
  bool all_diverged = false;
};

/// Loads data, runs one chain per rung per label condition on a worker
/// pool, calibrates on the random-label condition and writes every artifact
/// below cfg.out_dir. Throws ConfigError / DataError / CalibrationInfeasible.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Reads a report CSV and writes "beta,series,value" rows for train01,
/// test01 (when present) and bound01. Returns the number of data rows.
std::size_t emit_curves(const std::filesystem::path& report_csv,
                        const std::filesystem::path& out_csv);

}  // namespace gibbs
