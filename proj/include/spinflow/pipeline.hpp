#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spinflow/simulator.hpp"
#include "spinflow/spin_estimator.hpp"
#include "spinflow/stream_filters.hpp"

namespace spinflow {

enum class TrackSource { kTracker, kTruth };

// End-to-end run configuration; stages execute in the fixed order
// simulate -> filter -> track -> extract -> estimate, each one optional.
struct PipelineConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "out";

  bool simulate = false;
  std::string scenario;            // a scenario_suite name, or
  std::optional<SimScene> scene;   // an explicit scene

  std::filesystem::path events_in;  // input when not simulating

  std::optional<FilterKind> filter_kind;
  FilterConfig filter_cfg;

  bool run_track = false;
  TrackSource track_source = TrackSource::kTracker;
  TrackerConfig tracker_cfg;
  std::filesystem::path track_in;  // pre-existing track.csv

  bool run_extract = false;
  ExtractionConfig extraction_cfg;

  std::optional<EstimateMode> estimate_mode;
  EstimatorConfig estimator_cfg;
};

struct PipelineResult {
  std::vector<std::filesystem::path> artifacts;
  std::optional<SpinReport> spin;
};

// Runs the configured stages, writing each stage's artifact into out_dir.
// Deterministic for a fixed config and seed; failures surface as StageError
// wrapping the originating module error.
PipelineResult run_pipeline(const PipelineConfig& cfg);

PipelineConfig pipeline_config_from_json_file(const std::filesystem::path& path);

SimScene scene_from_json_file(const std::filesystem::path& path);
void write_scene_json(const SimScene& scene, const std::filesystem::path& path);
void write_spin_json(const SpinReport& report, const std::filesystem::path& path);

// One benchmark trial: a scene estimated over one observation window length.
struct TrialResult {
  std::string scenario;
  SpinKind kind = SpinKind::kTopspin;
  int ball = 1;
  double true_rps = 0.0;
  int window_ms = 0;
  bool success = false;
  std::string failure;
  double est_rps = 0.0;
  double mag_err_rps = 0.0;
  double axis_err_deg = 0.0;
  std::int64_t events_processed = 0;
  double wall_ms = 0.0;         // not serialized: timing is run-dependent
  double recording_ms = 0.0;
};

struct BenchBin {
  SpinKind kind = SpinKind::kTopspin;
  double rps = 0.0;
  int window_ms = 0;
  int trials = 0;
  int successes = 0;
  double mag_mae_rps = 0.0;
  double mag_std_rps = 0.0;
  double axis_mae_deg = 0.0;
  double axis_std_deg = 0.0;
};

struct BenchReport {
  SuiteKind suite = SuiteKind::kSpinner;
  int reps = 0;
  std::vector<TrialResult> trials;
  std::vector<BenchBin> bins;  // per (kind, rps, window)
  std::optional<double> success_rate;
  std::int64_t events_processed = 0;
  double wall_s = 0.0;           // not serialized
  double realtime_ratio = 0.0;   // processing time / recording time; not serialized
};

struct BenchOptions {
  std::uint64_t seed = 0;
  int workers = 1;
  SuiteParams suite_params;
  EstimatorConfig estimator_cfg;
  ExtractionConfig extraction_cfg;
  TrackerConfig tracker_cfg;
  std::vector<int> window_ms{10, 100};  // 10 ms fast, 100 ms refined
};

// Runs scenario_suite x reps x observation windows. Spinner trials extract
// against ground truth (the spinner pose is known); thrower trials run the
// full tracker. Stage failures count against the success rate instead of
// aborting the suite.
BenchReport bench(SuiteKind suite, int reps, const BenchOptions& options);

// report.json, trials.csv, and plot_data.csv (x = true rps, y = MAE).
// Timing fields stay out of the files so repeated runs are byte-identical.
void write_bench_outputs(const BenchReport& report, const std::filesystem::path& out_dir);

std::string bench_summary(const BenchReport& report);

}  // namespace spinflow
