#include "spinflow/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "spinflow/logo_extractor.hpp"

namespace spinflow {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr double kTwoPi = 2.0 * M_PI;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + salt * 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

json vec3_to_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d vec3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json scene_to_json(const SimScene& s) {
  json j;
  j["geometry"] = {{"width", s.geometry.width}, {"height", s.geometry.height}};
  j["focal_px"] = s.focal_px;
  j["ball_radius_m"] = s.ball_radius_m;
  j["center0_lateral_m"] = json::array({s.center0_lateral_m.x(), s.center0_lateral_m.y()});
  j["depth0_m"] = s.depth0_m;
  j["velocity_mps"] = vec3_to_json(s.velocity_mps);
  j["omega_rad_s"] = vec3_to_json(s.omega_rad_s);
  json rows = json::array();
  for (int r = 0; r < 3; ++r) {
    rows.push_back(json::array({s.initial_orientation(r, 0), s.initial_orientation(r, 1),
                                s.initial_orientation(r, 2)}));
  }
  j["initial_orientation"] = rows;
  json strokes = json::array();
  for (const LogoStroke& st : s.strokes) {
    strokes.push_back({{"axis", vec3_to_json(st.axis)},
                       {"arc_start_rad", st.arc_start_rad},
                       {"arc_end_rad", st.arc_end_rad},
                       {"half_width_rad", st.half_width_rad}});
  }
  j["strokes"] = strokes;
  j["photometrics"] = {{"background", s.photo.background},
                       {"ball", s.photo.ball},
                       {"logo", s.photo.logo}};
  j["sensor"] = {{"c_on", s.sensor.c_on},
                 {"c_off", s.sensor.c_off},
                 {"refractory_us", s.sensor.refractory_us},
                 {"noise_rate_hz_px", s.sensor.noise_rate_hz_px},
                 {"off_latency_us", s.sensor.off_latency_us}};
  j["duration_us"] = s.duration_us;
  j["supersample_hz"] = s.supersample_hz;
  j["truth_rate_hz"] = s.truth_rate_hz;
  j["seed"] = s.seed;
  return j;
}

SimScene scene_from_json(const json& j) {
  SimScene s;
  try {
    if (j.contains("geometry")) {
      s.geometry.width = j["geometry"].value("width", s.geometry.width);
      s.geometry.height = j["geometry"].value("height", s.geometry.height);
    }
    s.focal_px = j.value("focal_px", s.focal_px);
    s.ball_radius_m = j.value("ball_radius_m", s.ball_radius_m);
    if (j.contains("center0_lateral_m")) {
      s.center0_lateral_m = Eigen::Vector2d(j["center0_lateral_m"][0].get<double>(),
                                            j["center0_lateral_m"][1].get<double>());
    }
    s.depth0_m = j.value("depth0_m", s.depth0_m);
    if (j.contains("velocity_mps")) s.velocity_mps = vec3_from_json(j["velocity_mps"]);
    if (j.contains("omega_rad_s")) s.omega_rad_s = vec3_from_json(j["omega_rad_s"]);
    if (j.contains("initial_orientation")) {
      const json& rows = j["initial_orientation"];
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) s.initial_orientation(r, c) = rows[r][c].get<double>();
      }
    }
    if (j.contains("strokes")) {
      s.strokes.clear();
      for (const json& st : j["strokes"]) {
        LogoStroke stroke;
        stroke.axis = vec3_from_json(st.at("axis"));
        stroke.arc_start_rad = st.at("arc_start_rad").get<double>();
        stroke.arc_end_rad = st.at("arc_end_rad").get<double>();
        stroke.half_width_rad = st.at("half_width_rad").get<double>();
        s.strokes.push_back(stroke);
      }
    }
    if (j.contains("photometrics")) {
      const json& p = j["photometrics"];
      s.photo.background = p.value("background", s.photo.background);
      s.photo.ball = p.value("ball", s.photo.ball);
      s.photo.logo = p.value("logo", s.photo.logo);
    }
    if (j.contains("sensor")) {
      const json& p = j["sensor"];
      s.sensor.c_on = p.value("c_on", s.sensor.c_on);
      s.sensor.c_off = p.value("c_off", s.sensor.c_off);
      s.sensor.refractory_us = p.value("refractory_us", s.sensor.refractory_us);
      s.sensor.noise_rate_hz_px = p.value("noise_rate_hz_px", s.sensor.noise_rate_hz_px);
      s.sensor.off_latency_us = p.value("off_latency_us", s.sensor.off_latency_us);
    }
    s.duration_us = j.value("duration_us", s.duration_us);
    s.supersample_hz = j.value("supersample_hz", s.supersample_hz);
    s.truth_rate_hz = j.value("truth_rate_hz", s.truth_rate_hz);
    s.seed = j.value("seed", s.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad scene json: ") + e.what());
  }
  return s;
}

NamedScene find_scenario(const std::string& name, std::uint64_t seed) {
  SuiteParams params;
  params.seed = seed;
  params.balls = {1, 2, 3, 4, 5, 6, 7};
  for (SuiteKind kind : {SuiteKind::kSpinner, SuiteKind::kThrower}) {
    for (NamedScene& ns : scenario_suite(kind, params)) {
      if (ns.name == name) return std::move(ns);
    }
  }
  throw UnknownScenario("no scenario named '" + name + "'");
}

double axis_error_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  double an = a.norm();
  double bn = b.norm();
  if (an == 0.0 || bn == 0.0) return 90.0;
  double c = std::clamp(a.dot(b) / (an * bn), -1.0, 1.0);
  return std::acos(c) * 180.0 / M_PI;
}

json estimate_to_json(const SpinEstimate& e) {
  return {{"omega_rad_s", vec3_to_json(e.omega)},
          {"magnitude_rps", e.magnitude_rps},
          {"axis", vec3_to_json(e.axis)},
          {"n_flows", e.n_flows},
          {"window_us", json::array({e.t0_us, e.t1_us})}};
}

}  // namespace

SimScene scene_from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return scene_from_json(j);
}

void write_scene_json(const SimScene& scene, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << scene_to_json(scene).dump(2) << '\n';
}

void write_spin_json(const SpinReport& report, const std::filesystem::path& path) {
  json j = estimate_to_json(report.final);
  j["mode"] = report.mode == EstimateMode::kFast ? "fast" : "refined";
  j["magnitude_source"] = report.used_event_rate ? "event_rate" : "flow";
  if (report.used_event_rate) {
    j["event_rate_rps"] = report.event_rate_rps;
  } else {
    j["event_rate_rps"] = nullptr;
  }
  json windows = json::array();
  for (const SpinEstimate& w : report.series.windows) windows.push_back(estimate_to_json(w));
  j["windows"] = windows;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

PipelineConfig pipeline_config_from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }

  PipelineConfig cfg;
  try {
    cfg.seed = j.value("seed", 0ULL);
    cfg.out_dir = j.value("out_dir", std::string("out"));
    if (j.contains("simulate")) {
      cfg.simulate = true;
      const json& sim = j["simulate"];
      if (sim.contains("scenario")) {
        cfg.scenario = sim["scenario"].get<std::string>();
      } else if (sim.contains("scene")) {
        cfg.scene = scene_from_json(sim["scene"]);
      } else {
        throw ConfigError("simulate needs 'scenario' or 'scene'");
      }
    }
    if (j.contains("events")) cfg.events_in = j["events"].get<std::string>();
    if (j.contains("filter")) {
      cfg.filter_kind = filter_kind_from_name(j["filter"].value("kind", "stc-cut-trail"));
      cfg.filter_cfg.threshold_us = j["filter"].value("threshold_us", cfg.filter_cfg.threshold_us);
    }
    if (j.contains("track")) {
      cfg.run_track = true;
      std::string source = j["track"].value("source", "tracker");
      if (source == "tracker") {
        cfg.track_source = TrackSource::kTracker;
      } else if (source == "truth") {
        cfg.track_source = TrackSource::kTruth;
      } else {
        throw ConfigError("track source must be 'tracker' or 'truth'");
      }
      if (j["track"].contains("in")) cfg.track_in = j["track"]["in"].get<std::string>();
    }
    if (j.contains("extract")) {
      cfg.run_extract = true;
      cfg.extraction_cfg.pad_px = j["extract"].value("pad_px", cfg.extraction_cfg.pad_px);
    }
    if (j.contains("estimate")) {
      std::string mode = j["estimate"].value("mode", "refined");
      if (mode == "fast") {
        cfg.estimate_mode = EstimateMode::kFast;
      } else if (mode == "refined") {
        cfg.estimate_mode = EstimateMode::kRefined;
      } else {
        throw ConfigError("estimate mode must be 'fast' or 'refined'");
      }
      cfg.estimator_cfg.expected_rps =
          j["estimate"].value("expected_rps", cfg.estimator_cfg.expected_rps);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad pipeline config: ") + e.what());
  }
  return cfg;
}

PipelineResult run_pipeline(const PipelineConfig& cfg) {
  PipelineResult result;
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec) throw StageError("setup", "cannot create " + cfg.out_dir.string());

  EventStream events;
  GroundTruth truth;
  bool have_truth = false;

  if (cfg.simulate) {
    try {
      SimScene scene;
      if (cfg.scene) {
        scene = *cfg.scene;
        scene.seed = scene.seed ^ cfg.seed;
      } else {
        NamedScene ns = find_scenario(cfg.scenario, cfg.seed);
        scene = ns.scene;
      }
      RenderResult render = render_scene(scene);
      events = std::move(render.events);
      truth = std::move(render.truth);
      have_truth = true;
      std::filesystem::path events_path = cfg.out_dir / "events.evs";
      std::filesystem::path truth_path = cfg.out_dir / "truth.csv";
      write_events(events, events_path, StreamFormat::kBin);
      write_truth_csv(truth, truth_path);
      result.artifacts.push_back(events_path);
      result.artifacts.push_back(truth_path);
    } catch (const Error& e) {
      throw StageError("simulate", e.what());
    }
  } else if (!cfg.events_in.empty()) {
    try {
      events = read_events(cfg.events_in, format_from_path(cfg.events_in));
    } catch (const Error& e) {
      throw StageError("input", e.what());
    }
  } else if (cfg.filter_kind || cfg.run_track || cfg.run_extract || cfg.estimate_mode) {
    throw StageError("input", "no event source configured");
  }

  if (cfg.filter_kind) {
    try {
      events = apply_filter(events, *cfg.filter_kind, cfg.filter_cfg);
      std::filesystem::path path = cfg.out_dir / "filtered.evs";
      write_events(events, path, StreamFormat::kBin);
      result.artifacts.push_back(path);
    } catch (const Error& e) {
      throw StageError("filter", e.what());
    }
  }

  Track track;
  bool have_track = false;
  if (cfg.run_track) {
    try {
      if (!cfg.track_in.empty()) {
        track = read_track_csv(cfg.track_in);
      } else if (cfg.track_source == TrackSource::kTruth) {
        if (!have_truth) throw ConfigError("truth track requested without simulation");
        track = truth_track(truth);
      } else {
        track = spinflow::track(events, cfg.tracker_cfg);
      }
      have_track = true;
      std::filesystem::path path = cfg.out_dir / "track.csv";
      write_track_csv(track, path);
      result.artifacts.push_back(path);
    } catch (const Error& e) {
      throw StageError("track", e.what());
    }
  }

  LogoStream logo;
  if (cfg.run_extract) {
    try {
      if (!have_track) throw ConfigError("extract requires a track stage");
      logo = extract_logo_events(events, track, cfg.extraction_cfg);
      std::filesystem::path path = cfg.out_dir / "logo.evs";
      write_logo_events(logo, path, StreamFormat::kBin);
      result.artifacts.push_back(path);
    } catch (const Error& e) {
      throw StageError("extract", e.what());
    }
  }

  if (cfg.estimate_mode) {
    try {
      if (!cfg.run_extract) throw ConfigError("estimate requires an extract stage");
      SpinReport report = estimate_spin_report(logo, track, cfg.estimator_cfg, *cfg.estimate_mode);
      std::filesystem::path path = cfg.out_dir / "spin.json";
      write_spin_json(report, path);
      result.artifacts.push_back(path);
      result.spin = std::move(report);
    } catch (const Error& e) {
      throw StageError("estimate", e.what());
    }
  }

  return result;
}

BenchReport bench(SuiteKind suite, int reps, const BenchOptions& options) {
  BenchReport report;
  report.suite = suite;
  report.reps = reps;
  if (reps <= 0) return report;

  struct Trial {
    NamedScene scene;
    int window_ms = 0;
    std::uint64_t seed = 0;
  };
  std::vector<Trial> trials;
  for (int rep = 0; rep < reps; ++rep) {
    SuiteParams params = options.suite_params;
    params.seed = mix_seed(options.seed, static_cast<std::uint64_t>(rep) + 1);
    std::vector<NamedScene> scenes = scenario_suite(suite, params);
    if (suite == SuiteKind::kSpinner && options.suite_params.balls.empty()) {
      // The singular logo-on-axis mount rides along at one spin value per
      // kind so its failure mode is part of every report.
      SuiteParams singular = params;
      singular.balls = {5};
      singular.rps_values = {50.0};
      for (NamedScene& ns : scenario_suite(suite, singular)) scenes.push_back(std::move(ns));
    }
    for (NamedScene& ns : scenes) {
      for (int window : options.window_ms) {
        Trial t;
        t.scene = ns;
        t.window_ms = window;
        t.seed = mix_seed(params.seed, std::hash<std::string>{}(ns.name));
        trials.push_back(std::move(t));
      }
    }
  }

  std::vector<TrialResult> results(trials.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= trials.size()) break;
      const Trial& trial = trials[i];
      TrialResult& tr = results[i];
      tr.scenario = trial.scene.name;
      tr.kind = trial.scene.kind;
      tr.ball = trial.scene.ball;
      tr.true_rps = trial.scene.scene.omega_rad_s.norm() / kTwoPi;
      tr.window_ms = trial.window_ms;
      tr.recording_ms = static_cast<double>(trial.scene.scene.duration_us) / 1000.0;

      SimScene scene = trial.scene.scene;
      scene.seed = trial.seed;
      RenderResult render;
      try {
        render = render_scene(scene);
      } catch (const Error& e) {
        tr.failure = std::string("simulate: ") + e.what();
        continue;
      }
      tr.events_processed = static_cast<std::int64_t>(render.events.events.size());

      auto start = Clock::now();
      try {
        Track track;
        if (suite == SuiteKind::kSpinner) {
          track = truth_track(render.truth);
        } else {
          track = spinflow::track(render.events, options.tracker_cfg);
        }
        LogoStream logo = extract_logo_events(render.events, track, options.extraction_cfg);

        // Restrict the observation to the allowed window, anchored at the
        // first extracted logo event.
        if (!logo.events.empty()) {
          std::int64_t t0 = logo.events.front().t_us;
          std::int64_t t1 = t0 + static_cast<std::int64_t>(trial.window_ms) * 1000;
          LogoStream clipped;
          for (const LogoEvent& e : logo.events) {
            if (e.t_us >= t0 && e.t_us < t1) clipped.events.push_back(e);
          }
          logo = std::move(clipped);
        }

        EstimateMode mode = trial.window_ms <= 20 ? EstimateMode::kFast : EstimateMode::kRefined;
        SpinReport spin = estimate_spin_report(logo, track, options.estimator_cfg, mode);
        tr.success = true;
        tr.est_rps = spin.final.magnitude_rps;
        tr.mag_err_rps = std::abs(spin.final.magnitude_rps - tr.true_rps);
        tr.axis_err_deg = axis_error_deg(spin.final.omega, scene.omega_rad_s);
      } catch (const Error& e) {
        tr.failure = e.what();
      }
      tr.wall_ms = elapsed_ms(start);
    }
  };

  auto bench_start = Clock::now();
  int n_workers = std::max(1, options.workers);
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  report.wall_s = elapsed_ms(bench_start) / 1000.0;

  report.trials = std::move(results);
  int successes = 0;
  double processing_ms = 0.0;
  double recording_ms = 0.0;
  std::map<std::tuple<int, double, int>, std::vector<const TrialResult*>> bins;
  for (const TrialResult& tr : report.trials) {
    successes += tr.success ? 1 : 0;
    report.events_processed += tr.events_processed;
    processing_ms += tr.wall_ms;
    recording_ms += tr.recording_ms;
    bins[{static_cast<int>(tr.kind), tr.true_rps, tr.window_ms}].push_back(&tr);
  }
  report.success_rate = report.trials.empty()
                            ? std::optional<double>{}
                            : std::optional<double>(static_cast<double>(successes) /
                                                    static_cast<double>(report.trials.size()));
  report.realtime_ratio = recording_ms > 0.0 ? processing_ms / recording_ms : 0.0;

  for (const auto& [key, members] : bins) {
    BenchBin bin;
    bin.kind = static_cast<SpinKind>(std::get<0>(key));
    bin.rps = std::get<1>(key);
    bin.window_ms = std::get<2>(key);
    bin.trials = static_cast<int>(members.size());
    std::vector<double> mags, axes;
    for (const TrialResult* tr : members) {
      if (!tr->success) continue;
      ++bin.successes;
      mags.push_back(tr->mag_err_rps);
      axes.push_back(tr->axis_err_deg);
    }
    auto mean_std = [](const std::vector<double>& v, double& mean, double& std_out) {
      mean = 0.0;
      std_out = 0.0;
      if (v.empty()) return;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      for (double x : v) std_out += (x - mean) * (x - mean);
      std_out = std::sqrt(std_out / static_cast<double>(v.size()));
    };
    mean_std(mags, bin.mag_mae_rps, bin.mag_std_rps);
    mean_std(axes, bin.axis_mae_deg, bin.axis_std_deg);
    report.bins.push_back(bin);
  }
  return report;
}

void write_bench_outputs(const BenchReport& report, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string());

  json j;
  j["suite"] = report.suite == SuiteKind::kSpinner ? "spinner" : "thrower";
  j["reps"] = report.reps;
  if (report.success_rate) {
    j["success_rate"] = *report.success_rate;
  } else {
    j["success_rate"] = "n/a";
  }
  j["events_processed"] = report.events_processed;
  json bins = json::array();
  for (const BenchBin& b : report.bins) {
    bins.push_back({{"kind", to_string(b.kind)},
                    {"rps", b.rps},
                    {"window_ms", b.window_ms},
                    {"trials", b.trials},
                    {"successes", b.successes},
                    {"mag_mae_rps", b.mag_mae_rps},
                    {"mag_std_rps", b.mag_std_rps},
                    {"axis_mae_deg", b.axis_mae_deg},
                    {"axis_std_deg", b.axis_std_deg}});
  }
  j["bins"] = bins;
  std::ofstream out(out_dir / "report.json", std::ios::trunc);
  if (!out) throw IoError("cannot write report.json");
  out << j.dump(2) << '\n';

  std::ofstream trials(out_dir / "trials.csv", std::ios::trunc);
  if (!trials) throw IoError("cannot write trials.csv");
  trials << "scenario,kind,ball,true_rps,window_ms,success,failure,est_rps,mag_err_rps,"
            "axis_err_deg,events\n";
  char buf[512];
  for (const TrialResult& tr : report.trials) {
    std::string failure = tr.failure;
    for (char& c : failure) {
      if (c == ',' || c == '\n') c = ';';
    }
    int n = std::snprintf(buf, sizeof(buf), "%s,%s,%d,%.3f,%d,%d,%s,%.4f,%.4f,%.4f,%lld\n",
                          tr.scenario.c_str(), to_string(tr.kind).c_str(), tr.ball, tr.true_rps,
                          tr.window_ms, tr.success ? 1 : 0, failure.c_str(), tr.est_rps,
                          tr.mag_err_rps, tr.axis_err_deg,
                          static_cast<long long>(tr.events_processed));
    trials.write(buf, n);
  }

  std::ofstream plot(out_dir / "plot_data.csv", std::ios::trunc);
  if (!plot) throw IoError("cannot write plot_data.csv");
  plot << "true_rps,kind,window_ms,mag_mae_rps,axis_mae_deg,success_rate\n";
  for (const BenchBin& b : report.bins) {
    double rate = b.trials > 0 ? static_cast<double>(b.successes) / b.trials : 0.0;
    int n = std::snprintf(buf, sizeof(buf), "%.3f,%s,%d,%.4f,%.4f,%.4f\n", b.rps,
                          to_string(b.kind).c_str(), b.window_ms, b.mag_mae_rps, b.axis_mae_deg,
                          rate);
    plot.write(buf, n);
  }
}

std::string bench_summary(const BenchReport& report) {
  std::ostringstream os;
  os << (report.suite == SuiteKind::kSpinner ? "spinner" : "thrower") << " suite, "
     << report.trials.size() << " trials";
  if (report.success_rate) {
    os << ", success rate " << *report.success_rate;
  } else {
    os << ", success rate n/a";
  }
  os << "\nevents processed: " << report.events_processed << ", wall " << report.wall_s
     << " s, real-time ratio " << report.realtime_ratio << "\n";
  for (const BenchBin& b : report.bins) {
    os << "  " << to_string(b.kind) << " @" << b.rps << " rps, " << b.window_ms
       << " ms window: mag MAE " << b.mag_mae_rps << " +- " << b.mag_std_rps << " rps, axis MAE "
       << b.axis_mae_deg << " +- " << b.axis_std_deg << " deg, " << b.successes << "/" << b.trials
       << " ok\n";
  }
  return os.str();
}

}  // namespace spinflow
