#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "spinflow/pipeline.hpp"

namespace {

using namespace spinflow;

int cmd_simulate(const std::string& scene_path, const std::string& scenario,
                 const std::string& out, const std::string& truth_out, std::uint64_t seed) {
  SimScene scene;
  if (!scenario.empty()) {
    SuiteParams params;
    params.seed = seed;
    params.balls = {1, 2, 3, 4, 5, 6, 7};
    bool found = false;
    for (SuiteKind kind : {SuiteKind::kSpinner, SuiteKind::kThrower}) {
      for (const NamedScene& ns : scenario_suite(kind, params)) {
        if (ns.name == scenario) {
          scene = ns.scene;
          found = true;
          break;
        }
      }
    }
    if (!found) throw UnknownScenario("no scenario named '" + scenario + "'");
  } else if (!scene_path.empty()) {
    scene = scene_from_json_file(scene_path);
    scene.seed ^= seed;
  } else {
    throw ConfigError("simulate needs a scene.json or --scenario");
  }
  RenderResult result = render_scene(scene);
  write_events(result.events, out, format_from_path(out));
  if (!truth_out.empty()) write_truth_csv(result.truth, truth_out);
  std::printf("%zu events over %lld us\n", result.events.events.size(),
              static_cast<long long>(scene.duration_us));
  return 0;
}

int cmd_surface(const std::string& kind, const std::string& in, const std::string& out,
                std::int64_t t_us, std::int64_t t_acc_us, std::int64_t tau_us, int k_eros) {
  EventStream stream = read_events(in, format_from_path(in));
  if (stream.events.empty()) throw ConfigError("empty stream");
  std::int64_t t_now = t_us >= 0 ? t_us : stream.events.back().t_us;

  if (kind == "eros") {
    ErosSurface surface(stream.geometry, k_eros, ErosSurface::default_decay(k_eros));
    for (const Event& e : stream.events) {
      if (e.t_us > t_now) break;
      surface.update(e);
    }
    surface.clean_isolated();
    write_pgm(out, stream.geometry, surface.values());
  } else if (kind == "acc") {
    std::int64_t t0 = t_us >= 0 ? t_us : stream.events.front().t_us;
    AccumulatedFrame frame = accumulate(stream, t0, t_acc_us);
    std::uint32_t max_count = 1;
    for (std::size_t i = 0; i < frame.on_counts.size(); ++i) {
      max_count = std::max(max_count, frame.on_counts[i] + frame.off_counts[i]);
    }
    std::vector<float> img(frame.on_counts.size());
    for (std::size_t i = 0; i < img.size(); ++i) {
      img[i] = static_cast<float>(frame.on_counts[i] + frame.off_counts[i]) / max_count;
    }
    write_pgm(out, stream.geometry, img);
  } else if (kind == "linear") {
    LinearTimeSurface surface(stream.geometry, tau_us);
    for (const Event& e : stream.events) {
      if (e.t_us > t_now) break;
      surface.update(e);
    }
    write_pgm(out, stream.geometry, surface.render(t_now));
  } else {
    throw ConfigError("surface kind must be eros|acc|linear");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"event-camera table tennis spin estimation pipeline"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  int workers = 1;
  app.add_option("--seed", seed, "master seed for all randomness");
  app.add_option("--workers", workers, "parallel trial workers");

  // simulate
  auto* sim = app.add_subcommand("simulate", "render a synthetic scene to events");
  std::string sim_scene, sim_scenario, sim_out = "events.evs", sim_truth;
  sim->add_option("scene", sim_scene, "scene.json");
  sim->add_option("--scenario", sim_scenario, "named suite scenario");
  sim->add_option("--out", sim_out, "output event file");
  sim->add_option("--truth", sim_truth, "ground-truth csv");

  // filter
  auto* filt = app.add_subcommand("filter", "apply STC/TRAIL noise filters");
  std::string filt_kind = "stc-cut-trail", filt_in, filt_out;
  std::int64_t filt_threshold = 5000;
  filt->add_option("--kind", filt_kind, "stc|trail|stc-cut-trail");
  filt->add_option("--threshold-us", filt_threshold, "burst window");
  filt->add_option("in", filt_in)->required();
  filt->add_option("out", filt_out)->required();

  // surface
  auto* surf = app.add_subcommand("surface", "render a surface to PGM");
  std::string surf_kind = "eros", surf_in, surf_out = "surface.pgm";
  std::int64_t surf_t = -1, surf_tacc = 2000, surf_tau = 1000;
  int surf_k = 10;
  surf->add_option("--kind", surf_kind, "eros|acc|linear");
  surf->add_option("in", surf_in)->required();
  surf->add_option("--out", surf_out);
  surf->add_option("--t-us", surf_t, "render time (default: last event)");
  surf->add_option("--t-acc-us", surf_tacc, "accumulation window (acc)");
  surf->add_option("--tau-us", surf_tau, "linear decay constant");
  surf->add_option("--k-eros", surf_k, "EROS neighborhood size");

  // track
  auto* trk = app.add_subcommand("track", "track the ball");
  std::string trk_in, trk_out = "track.csv";
  TrackerConfig tracker_cfg;
  trk->add_option("in", trk_in)->required();
  trk->add_option("--out", trk_out);
  trk->add_option("--tick-rate", tracker_cfg.tick_rate_hz, "filter ticks per second");
  trk->add_option("--r-min", tracker_cfg.hough.r_min);
  trk->add_option("--r-max", tracker_cfg.hough.r_max);

  // extract
  auto* ext = app.add_subcommand("extract", "extract ball-centric logo events");
  std::string ext_in, ext_track, ext_out = "logo.evs";
  double ext_pad = -1.0;
  ext->add_option("in", ext_in)->required();
  ext->add_option("track", ext_track)->required();
  ext->add_option("--pad", ext_pad, "edge margin in px (default max(2, 0.1 r))");
  ext->add_option("--out", ext_out);

  // estimate
  auto* est = app.add_subcommand("estimate", "estimate spin from logo events");
  std::string est_logo, est_track, est_mode = "refined", est_out = "spin.json";
  double est_expected = 50.0;
  est->add_option("logo", est_logo)->required();
  est->add_option("track", est_track)->required();
  est->add_option("--mode", est_mode, "fast|refined");
  est->add_option("--expected-rps", est_expected, "expected spin for the fast path");
  est->add_option("--out", est_out);

  // run
  auto* run = app.add_subcommand("run", "run a configured pipeline");
  std::string run_config;
  run->add_option("--config", run_config, "pipeline json")->required();

  // bench
  auto* ben = app.add_subcommand("bench", "run a benchmark suite");
  std::string ben_suite = "spinner", ben_out = "bench_out";
  int ben_reps = 1;
  double ben_noise = 0.0;
  std::int64_t ben_duration_ms = 200;
  double ben_thrower_rps = 40.0;
  ben->add_option("--suite", ben_suite, "spinner|thrower");
  ben->add_option("--reps", ben_reps);
  ben->add_option("--out-dir", ben_out);
  ben->add_option("--noise", ben_noise, "noise rate (Hz/pixel)");
  ben->add_option("--duration-ms", ben_duration_ms, "spinner recording length");
  ben->add_option("--thrower-rps", ben_thrower_rps);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) {
      return cmd_simulate(sim_scene, sim_scenario, sim_out, sim_truth, seed);
    }
    if (filt->parsed()) {
      EventStream stream = read_events(filt_in, format_from_path(filt_in));
      FilterConfig cfg{filt_threshold};
      EventStream out = apply_filter(stream, filter_kind_from_name(filt_kind), cfg);
      write_events(out, filt_out, format_from_path(filt_out));
      std::printf("%zu -> %zu events\n", stream.events.size(), out.events.size());
      return 0;
    }
    if (surf->parsed()) {
      return cmd_surface(surf_kind, surf_in, surf_out, surf_t, surf_tacc, surf_tau, surf_k);
    }
    if (trk->parsed()) {
      EventStream stream = read_events(trk_in, format_from_path(trk_in));
      Track track = spinflow::track(stream, tracker_cfg);
      write_track_csv(track, trk_out);
      std::printf("%zu tick states%s\n", track.states.size(),
                  track.lost_at_us ? " (track lost before stream end)" : "");
      return 0;
    }
    if (ext->parsed()) {
      EventStream stream = read_events(ext_in, format_from_path(ext_in));
      Track track = read_track_csv(ext_track);
      ExtractionConfig cfg{ext_pad};
      LogoStream logo = extract_logo_events(stream, track, cfg);
      write_logo_events(logo, ext_out, format_from_path(ext_out));
      std::printf("%zu logo events\n", logo.events.size());
      return 0;
    }
    if (est->parsed()) {
      LogoStream logo = read_logo_events(est_logo, format_from_path(est_logo));
      Track track = read_track_csv(est_track);
      EstimatorConfig cfg;
      cfg.expected_rps = est_expected;
      EstimateMode mode;
      if (est_mode == "fast") {
        mode = EstimateMode::kFast;
      } else if (est_mode == "refined") {
        mode = EstimateMode::kRefined;
      } else {
        throw ConfigError("mode must be fast or refined");
      }
      SpinReport report = estimate_spin_report(logo, track, cfg, mode);
      write_spin_json(report, est_out);
      std::printf("magnitude %.2f rps, axis [%.3f, %.3f, %.3f]\n", report.final.magnitude_rps,
                  report.final.axis.x(), report.final.axis.y(), report.final.axis.z());
      return 0;
    }
    if (run->parsed()) {
      PipelineConfig cfg = pipeline_config_from_json_file(run_config);
      cfg.seed ^= seed;
      PipelineResult result = run_pipeline(cfg);
      for (const auto& path : result.artifacts) std::printf("wrote %s\n", path.c_str());
      if (result.spin) {
        std::printf("magnitude %.2f rps\n", result.spin->final.magnitude_rps);
      }
      return 0;
    }
    if (ben->parsed()) {
      SuiteKind suite;
      if (ben_suite == "spinner") {
        suite = SuiteKind::kSpinner;
      } else if (ben_suite == "thrower") {
        suite = SuiteKind::kThrower;
      } else {
        throw ConfigError("suite must be spinner or thrower");
      }
      BenchOptions options;
      options.seed = seed;
      options.workers = workers;
      options.suite_params.noise_rate_hz_px = ben_noise;
      options.suite_params.duration_us = ben_duration_ms * 1000;
      options.suite_params.thrower_rps = ben_thrower_rps;
      BenchReport report = bench(suite, ben_reps, options);
      write_bench_outputs(report, ben_out);
      std::fputs(bench_summary(report).c_str(), stdout);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const UnknownScenario& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const StageError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 3;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
