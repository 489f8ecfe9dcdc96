#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "spinflow/pipeline.hpp"

using namespace spinflow;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("spinflow_pipe_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

PipelineConfig spinner_run(const std::filesystem::path& out_dir) {
  PipelineConfig cfg;
  cfg.seed = 5;
  cfg.out_dir = out_dir;
  cfg.simulate = true;
  cfg.scenario = "spinner-topspin-ball1-50rps";
  cfg.run_track = true;
  cfg.track_source = TrackSource::kTruth;
  cfg.run_extract = true;
  cfg.estimate_mode = EstimateMode::kRefined;
  return cfg;
}

}  // namespace

TEST_CASE("spinner pipeline lands within tolerance end to end") {
  auto dir = temp_dir("e2e");
  PipelineConfig cfg = spinner_run(dir);
  PipelineResult result = run_pipeline(cfg);
  REQUIRE(result.spin.has_value());
  CHECK(std::abs(result.spin->final.magnitude_rps - 50.0) / 50.0 < 0.10);
  CHECK(std::filesystem::exists(dir / "events.evs"));
  CHECK(std::filesystem::exists(dir / "truth.csv"));
  CHECK(std::filesystem::exists(dir / "track.csv"));
  CHECK(std::filesystem::exists(dir / "logo.evs"));
  CHECK(std::filesystem::exists(dir / "spin.json"));
}

TEST_CASE("a missing input file surfaces as StageError") {
  PipelineConfig cfg;
  cfg.out_dir = temp_dir("missing");
  cfg.events_in = "/nonexistent/input.evs";
  cfg.run_track = true;
  bool threw = false;
  try {
    run_pipeline(cfg);
  } catch (const StageError& e) {
    threw = true;
    CHECK(e.stage() == "input");
  }
  CHECK(threw);
}

TEST_CASE("identical config and seed produce byte-identical artifacts") {
  auto dir_a = temp_dir("det_a");
  auto dir_b = temp_dir("det_b");
  PipelineConfig cfg_a = spinner_run(dir_a);
  PipelineConfig cfg_b = spinner_run(dir_b);
  run_pipeline(cfg_a);
  run_pipeline(cfg_b);
  for (const char* name : {"events.evs", "truth.csv", "track.csv", "logo.evs", "spin.json"}) {
    CHECK(slurp(dir_a / name) == slurp(dir_b / name));
  }
}

TEST_CASE("pipeline config parses from json") {
  auto dir = temp_dir("cfg");
  auto cfg_path = dir / "pipeline.json";
  {
    std::ofstream out(cfg_path);
    out << R"({
      "seed": 9,
      "out_dir": ")" << (dir / "out").string() << R"(",
      "simulate": {"scenario": "spinner-topspin-ball1-50rps"},
      "track": {"source": "truth"},
      "extract": {},
      "estimate": {"mode": "refined"}
    })";
  }
  PipelineConfig cfg = pipeline_config_from_json_file(cfg_path);
  CHECK(cfg.seed == 9);
  CHECK(cfg.simulate);
  CHECK(cfg.scenario == "spinner-topspin-ball1-50rps");
  CHECK(cfg.track_source == TrackSource::kTruth);
  CHECK(cfg.estimate_mode == EstimateMode::kRefined);
}

TEST_CASE("bench aggregates per bin, reports failures, and stays deterministic") {
  BenchOptions options;
  options.seed = 21;
  options.workers = 1;
  options.suite_params.kinds = {SpinKind::kTopspin};
  options.suite_params.rps_values = {50.0};
  options.suite_params.duration_us = 120000;
  options.window_ms = {100};

  BenchReport a = bench(SuiteKind::kSpinner, 1, options);
  // balls 1/6/7 plus the singular ball-5 rider.
  CHECK(a.trials.size() == 4);
  REQUIRE(a.success_rate.has_value());

  bool ball5_failed = false;
  for (const TrialResult& tr : a.trials) {
    if (tr.ball == 5) ball5_failed = !tr.success;
  }
  CHECK(ball5_failed);

  options.workers = 3;
  BenchReport b = bench(SuiteKind::kSpinner, 1, options);
  REQUIRE(a.trials.size() == b.trials.size());
  for (std::size_t i = 0; i < a.trials.size(); ++i) {
    CHECK(a.trials[i].scenario == b.trials[i].scenario);
    CHECK(a.trials[i].success == b.trials[i].success);
    CHECK(a.trials[i].est_rps == doctest::Approx(b.trials[i].est_rps));
  }

  auto dir = temp_dir("bench_out");
  write_bench_outputs(a, dir);
  CHECK(std::filesystem::exists(dir / "report.json"));
  CHECK(std::filesystem::exists(dir / "trials.csv"));
  CHECK(std::filesystem::exists(dir / "plot_data.csv"));
}

TEST_CASE("bench with zero reps flags an undefined success rate") {
  BenchOptions options;
  BenchReport report = bench(SuiteKind::kSpinner, 0, options);
  CHECK(report.trials.empty());
  CHECK(!report.success_rate.has_value());
  auto dir = temp_dir("bench_empty");
  write_bench_outputs(report, dir);
  std::string json = slurp(dir / "report.json");
  CHECK(json.find("n/a") != std::string::npos);
}
