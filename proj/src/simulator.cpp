#include "spinflow/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace spinflow {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

// Hand-rolled generator keeps noise byte-stable across standard libraries.
struct SplitMix64 {
  std::uint64_t state;
  explicit SplitMix64(std::uint64_t seed) : state(seed) {}
  std::uint64_t next() {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

struct StrokeFrame {
  Eigen::Vector3d axis;
  Eigen::Vector3d u0;
  Eigen::Vector3d v0;
  double a0 = 0.0;
  double span = 0.0;
  double sin_hw = 0.0;
};

void stroke_basis(const Eigen::Vector3d& axis, Eigen::Vector3d& u0, Eigen::Vector3d& v0) {
  Eigen::Vector3d ref = std::abs(axis.z()) < 0.99 ? Eigen::Vector3d::UnitZ()
                                                  : Eigen::Vector3d::UnitX();
  u0 = (ref - ref.dot(axis) * axis).normalized();
  v0 = axis.cross(u0);
}

StrokeFrame prepare_stroke(const LogoStroke& s) {
  StrokeFrame f;
  f.axis = s.axis.normalized();
  stroke_basis(f.axis, f.u0, f.v0);
  f.a0 = s.arc_start_rad;
  f.span = s.arc_end_rad - s.arc_start_rad;
  f.sin_hw = std::sin(s.half_width_rad);
  return f;
}

bool on_stroke(const StrokeFrame& f, const Eigen::Vector3d& p) {
  if (std::abs(p.dot(f.axis)) > f.sin_hw) return false;
  double az = std::atan2(p.dot(f.v0), p.dot(f.u0));
  double rel = std::fmod(az - f.a0, kTwoPi);
  if (rel < 0.0) rel += kTwoPi;
  return rel <= f.span;
}

struct PixelState {
  float ref = 0.0f;
  float prev = 0.0f;
  double last_event_us = -1e18;
  std::uint8_t touched = 0;
};

}  // namespace

LogoStroke make_arc(const Eigen::Vector3d& center, const Eigen::Vector3d& tangent,
                    double half_length_rad, double half_width_rad) {
  Eigen::Vector3d c = center.normalized();
  Eigen::Vector3d t = (tangent - tangent.dot(c) * c).normalized();
  LogoStroke s;
  s.axis = c.cross(t).normalized();
  Eigen::Vector3d u0, v0;
  stroke_basis(s.axis, u0, v0);
  double a_center = std::atan2(c.dot(v0), c.dot(u0));
  s.arc_start_rad = a_center - half_length_rad;
  s.arc_end_rad = a_center + half_length_rad;
  s.half_width_rad = half_width_rad;
  return s;
}

Eigen::Vector3d stroke_midpoint(const LogoStroke& stroke) {
  Eigen::Vector3d axis = stroke.axis.normalized();
  Eigen::Vector3d u0, v0;
  stroke_basis(axis, u0, v0);
  double mid = 0.5 * (stroke.arc_start_rad + stroke.arc_end_rad);
  return u0 * std::cos(mid) + v0 * std::sin(mid);
}

RenderResult render_scene(const SimScene& scene) {
  if (scene.geometry.width <= 0 || scene.geometry.height <= 0) {
    throw ConfigError("scene geometry must be positive");
  }
  if (scene.ball_radius_m <= 0.0) throw ConfigError("ball radius must be > 0");
  if (scene.duration_us <= 0) throw ConfigError("duration must be > 0");
  if (scene.sensor.c_on <= 0.0 || scene.sensor.c_off <= 0.0) {
    throw ConfigError("contrast thresholds must be > 0");
  }
  if (scene.supersample_hz < 1000.0) throw ConfigError("supersample rate too low");
  if (scene.depth0_m <= scene.ball_radius_m) throw ConfigError("ball behind camera");

  const int w = scene.geometry.width;
  const int h = scene.geometry.height;
  const double dt_us = 1e6 / scene.supersample_hz;
  const int n_steps = static_cast<int>(std::ceil(scene.duration_us / dt_us));

  std::vector<StrokeFrame> strokes;
  strokes.reserve(scene.strokes.size());
  for (const LogoStroke& s : scene.strokes) strokes.push_back(prepare_stroke(s));

  std::vector<PixelState> px(static_cast<std::size_t>(w) * h);
  RenderResult result;
  result.events.geometry = scene.geometry;
  std::vector<Event>& events = result.events.events;

  const double omega_norm = scene.omega_rad_s.norm();
  const Eigen::Vector3d omega_axis =
      omega_norm > 0.0 ? Eigen::Vector3d(scene.omega_rad_s / omega_norm)
                       : Eigen::Vector3d::UnitZ();

  // Subsample offsets: 2x2 area sampling turns edge transits into ramps so
  // crossing times interpolate well below the supersample step.
  constexpr double kSub[2] = {-0.25, 0.25};

  auto center_at = [&](double t_s, double& cx_px, double& cy_px, double& r_px) {
    double depth = scene.depth0_m - scene.velocity_mps.z() * t_s;
    double cx_m = scene.center0_lateral_m.x() + scene.velocity_mps.x() * t_s;
    double cy_m = scene.center0_lateral_m.y() + scene.velocity_mps.y() * t_s;
    cx_px = w / 2.0 + scene.focal_px * cx_m / depth;
    cy_px = h / 2.0 + scene.focal_px * cy_m / depth;
    r_px = scene.focal_px * scene.ball_radius_m / depth;
  };

  auto shade = [&](double sx, double sy, double cx_px, double cy_px, double r_px,
                   const Eigen::Matrix3d& rot_t) {
    double dx = (sx - cx_px) / r_px;
    double dy = (sy - cy_px) / r_px;
    double rho2 = dx * dx + dy * dy;
    if (rho2 >= 1.0) return scene.photo.background;
    Eigen::Vector3d e_r(dx, dy, std::sqrt(1.0 - rho2));
    Eigen::Vector3d body = rot_t.transpose() * e_r;
    for (const StrokeFrame& f : strokes) {
      if (on_stroke(f, body)) return scene.photo.logo;
    }
    return scene.photo.ball;
  };

  double prev_cx = 0.0, prev_cy = 0.0, prev_r = 0.0;
  double prev_t_us = 0.0;

  for (int k = 0; k <= n_steps; ++k) {
    double t_us = std::min(k * dt_us, static_cast<double>(scene.duration_us));
    double t_s = t_us * 1e-6;
    double cx_px, cy_px, r_px;
    center_at(t_s, cx_px, cy_px, r_px);
    Eigen::Matrix3d rot_t =
        Eigen::AngleAxisd(omega_norm * t_s, omega_axis).toRotationMatrix() *
        scene.initial_orientation;

    int x0, x1, y0, y1;
    if (k == 0) {
      x0 = static_cast<int>(std::floor(cx_px - r_px)) - 2;
      x1 = static_cast<int>(std::ceil(cx_px + r_px)) + 2;
      y0 = static_cast<int>(std::floor(cy_px - r_px)) - 2;
      y1 = static_cast<int>(std::ceil(cy_px + r_px)) + 2;
    } else {
      x0 = static_cast<int>(std::floor(std::min(cx_px - r_px, prev_cx - prev_r))) - 2;
      x1 = static_cast<int>(std::ceil(std::max(cx_px + r_px, prev_cx + prev_r))) + 2;
      y0 = static_cast<int>(std::floor(std::min(cy_px - r_px, prev_cy - prev_r))) - 2;
      y1 = static_cast<int>(std::ceil(std::max(cy_px + r_px, prev_cy + prev_r))) + 2;
    }
    x0 = std::max(x0, 0);
    y0 = std::max(y0, 0);
    x1 = std::min(x1, w - 1);
    y1 = std::min(y1, h - 1);

    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        double level = 0.0;
        for (double oy : kSub) {
          for (double ox : kSub) {
            level += shade(x + ox, y + oy, cx_px, cy_px, r_px, rot_t);
          }
        }
        level *= 0.25;

        PixelState& s = px[static_cast<std::size_t>(y) * w + x];
        if (!s.touched) {
          s.ref = static_cast<float>(level);
          s.prev = static_cast<float>(level);
          s.touched = 1;
          continue;
        }
        if (k == 0) continue;

        // A pixel is dead for one refractory period after firing; a change
        // that persists past the dead time fires on wake-up, one that
        // reverts while dead fires nothing. Backlog from earlier steps
        // drains here ahead of fresh crossings.
        double l_now = level;
        double l_prev = s.prev;
        const double refr = static_cast<double>(scene.sensor.refractory_us);
        while (l_now - s.ref >= scene.sensor.c_on) {
          double cross_level = s.ref + scene.sensor.c_on;
          double frac =
              l_now > l_prev ? std::clamp((cross_level - l_prev) / (l_now - l_prev), 0.0, 1.0)
                             : 0.0;
          double t_cross = prev_t_us + frac * (t_us - prev_t_us);
          double t_fire = std::max(t_cross, s.last_event_us + refr);
          if (t_fire > t_us) break;
          std::int64_t ts = std::clamp<std::int64_t>(std::llround(t_fire), 0, scene.duration_us);
          events.push_back(
              {ts, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), Polarity::kOn});
          s.last_event_us = t_fire;
          s.ref = static_cast<float>(cross_level);
        }
        while (s.ref - l_now >= scene.sensor.c_off) {
          double cross_level = s.ref - scene.sensor.c_off;
          double frac =
              l_prev > l_now ? std::clamp((l_prev - cross_level) / (l_prev - l_now), 0.0, 1.0)
                             : 0.0;
          double t_cross = prev_t_us + frac * (t_us - prev_t_us);
          double t_fire = std::max(t_cross, s.last_event_us + refr);
          if (t_fire > t_us) break;
          double t_emit = t_fire + static_cast<double>(scene.sensor.off_latency_us);
          std::int64_t ts = std::clamp<std::int64_t>(std::llround(t_emit), 0, scene.duration_us);
          events.push_back(
              {ts, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), Polarity::kOff});
          s.last_event_us = t_fire;
          s.ref = static_cast<float>(cross_level);
        }
        s.prev = static_cast<float>(l_now);
      }
    }

    prev_cx = cx_px;
    prev_cy = cy_px;
    prev_r = r_px;
    prev_t_us = t_us;
  }

  // Homogeneous per-pixel Poisson noise, polarity by fair coin.
  if (scene.sensor.noise_rate_hz_px > 0.0) {
    SplitMix64 rng(scene.seed ^ 0xa5a5a5a5a5a5a5a5ULL);
    double total_rate = scene.sensor.noise_rate_hz_px * w * h;  // events/s
    double t = 0.0;
    for (;;) {
      double u = rng.uniform01();
      t += -std::log(1.0 - u) * 1e6 / total_rate;
      if (t > static_cast<double>(scene.duration_us)) break;
      std::uint64_t r = rng.next();
      int x = static_cast<int>(r % static_cast<std::uint64_t>(w));
      int y = static_cast<int>((r / static_cast<std::uint64_t>(w)) % static_cast<std::uint64_t>(h));
      Polarity pol = (rng.next() & 1) ? Polarity::kOn : Polarity::kOff;
      events.push_back({static_cast<std::int64_t>(t), static_cast<std::uint16_t>(x),
                        static_cast<std::uint16_t>(y), pol});
    }
  }

  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.t_us != b.t_us) return a.t_us < b.t_us;
    if (a.y != b.y) return a.y < b.y;
    if (a.x != b.x) return a.x < b.x;
    return static_cast<int>(a.polarity) < static_cast<int>(b.polarity);
  });

  // Ground truth sampled on a uniform clock.
  const double truth_step_us = 1e6 / scene.truth_rate_hz;
  for (double t_us = 0.0; t_us <= static_cast<double>(scene.duration_us) + 1e-9;
       t_us += truth_step_us) {
    GroundTruthSample sample;
    sample.t_us = std::llround(std::min(t_us, static_cast<double>(scene.duration_us)));
    double cx_px, cy_px, r_px;
    center_at(t_us * 1e-6, cx_px, cy_px, r_px);
    sample.x_px = cx_px;
    sample.y_px = cy_px;
    sample.r_px = r_px;
    sample.omega = scene.omega_rad_s;
    Eigen::Matrix3d rot_t =
        Eigen::AngleAxisd(omega_norm * t_us * 1e-6, omega_axis).toRotationMatrix() *
        scene.initial_orientation;
    sample.logo_visible = false;
    for (const LogoStroke& s : scene.strokes) {
      if ((rot_t * stroke_midpoint(s)).z() > 0.05) {
        sample.logo_visible = true;
        break;
      }
    }
    result.truth.samples.push_back(sample);
  }

  return result;
}

void write_truth_csv(const GroundTruth& truth, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "# t_us,x_px,y_px,r_px,wx,wy,wz\n";
  char buf[256];
  for (const GroundTruthSample& s : truth.samples) {
    int n = std::snprintf(buf, sizeof(buf), "%lld,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                          static_cast<long long>(s.t_us), s.x_px, s.y_px, s.r_px,
                          s.omega.x(), s.omega.y(), s.omega.z());
    out.write(buf, n);
  }
  if (!out) throw IoError("write failed for " + path.string());
}

GroundTruth read_truth_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  GroundTruth truth;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    GroundTruthSample s;
    double f[6];
    const char* p = line.c_str();
    char* next = nullptr;
    s.t_us = std::strtoll(p, &next, 10);
    if (next == p) throw ParseError(path.string() + ":" + std::to_string(line_no));
    p = next;
    for (int i = 0; i < 6; ++i) {
      if (*p != ',') {
        throw ParseError(path.string() + ":" + std::to_string(line_no) +
                         ": expected 7 fields");
      }
      ++p;
      f[i] = std::strtod(p, &next);
      if (next == p) throw ParseError(path.string() + ":" + std::to_string(line_no));
      p = next;
    }
    s.x_px = f[0];
    s.y_px = f[1];
    s.r_px = f[2];
    s.omega = Eigen::Vector3d(f[3], f[4], f[5]);
    truth.samples.push_back(s);
  }
  return truth;
}

Track truth_track(const GroundTruth& truth) {
  Track track;
  const auto& s = truth.samples;
  if (s.empty()) return track;
  if (s.size() >= 2) track.tick_period_us = s[1].t_us - s[0].t_us;
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::size_t a = i > 0 ? i - 1 : 0;
    std::size_t b = i + 1 < s.size() ? i + 1 : i;
    double dt_s = static_cast<double>(s[b].t_us - s[a].t_us) * 1e-6;
    double vx = dt_s > 0.0 ? (s[b].x_px - s[a].x_px) / dt_s : 0.0;
    double vy = dt_s > 0.0 ? (s[b].y_px - s[a].y_px) / dt_s : 0.0;
    TrackState st;
    st.t_us = s[i].t_us;
    st.x << s[i].x_px, s[i].y_px, vx, vy, s[i].r_px;
    st.P = Mat5::Identity() * 1e-6;
    track.states.push_back(st);
  }
  return track;
}

std::string to_string(SpinKind kind) {
  switch (kind) {
    case SpinKind::kTopspin:
      return "topspin";
    case SpinKind::kBackspin:
      return "backspin";
    case SpinKind::kSidespin:
      return "sidespin";
  }
  return "unknown";
}

SpinKind spin_kind_from_name(const std::string& name) {
  if (name == "topspin") return SpinKind::kTopspin;
  if (name == "backspin") return SpinKind::kBackspin;
  if (name == "sidespin") return SpinKind::kSidespin;
  throw UnknownScenario("unknown spin kind '" + name + "'");
}

Eigen::Vector3d suite_spin_axis(SpinKind kind) {
  switch (kind) {
    case SpinKind::kTopspin:
      return Eigen::Vector3d::UnitX();
    case SpinKind::kBackspin:
      return -Eigen::Vector3d::UnitX();
    case SpinKind::kSidespin: {
      // Spinner axis tilted off the viewing axis, as mounted in practice;
      // the tilt also modulates the logo event rate once per rotation.
      double tilt = 18.0 * M_PI / 180.0;
      return Eigen::Vector3d(0.0, -std::sin(tilt), std::cos(tilt));
    }
  }
  throw UnknownScenario("invalid spin kind");
}

Eigen::Vector3d ball_placement(int ball, SpinKind kind) {
  auto tilted = [](double deg_x, double deg_y) {
    double ax = deg_x * M_PI / 180.0;
    double ay = deg_y * M_PI / 180.0;
    Eigen::Vector3d d(std::sin(ax), std::sin(ay), 0.0);
    double s2 = d.squaredNorm();
    d.z() = std::sqrt(std::max(1.0 - s2, 0.0));
    return d.normalized();
  };
  switch (ball) {
    case 1:
      return Eigen::Vector3d::UnitZ();
    case 2:
      return tilted(45.0, 0.0);
    case 3:
      return tilted(0.0, 50.0);
    case 4:
      return tilted(39.0, 39.0);
    case 5:
      return suite_spin_axis(kind);  // logo on the spin axis: the singular mount
    case 6:
      return tilted(0.0, -40.0);
    case 7:
      return tilted(0.0, 80.0);
    default:
      throw UnknownScenario("ball index must be 1..7, got " + std::to_string(ball));
  }
}

double thrower_speed_mps(int velocity_setting) {
  switch (velocity_setting) {
    case 10:
      return 4.0;
    case 15:
      return 5.5;
    case 20:
      return 7.5;
    case 25:
      return 9.0;
    default:
      throw UnknownScenario("thrower velocity setting must be 10/15/20/25, got " +
                            std::to_string(velocity_setting));
  }
}

std::vector<LogoStroke> default_logo() {
  const Eigen::Vector3d z = Eigen::Vector3d::UnitZ();
  const Eigen::Vector3d x = Eigen::Vector3d::UnitX();
  const Eigen::Vector3d y = Eigen::Vector3d::UnitY();
  const double d2r = M_PI / 180.0;
  auto off = [&](double deg_x, double deg_y) {
    Eigen::Vector3d d(std::sin(deg_x * d2r), std::sin(deg_y * d2r), 0.0);
    d.z() = std::sqrt(std::max(1.0 - d.squaredNorm(), 0.0));
    return d;
  };
  // Two right-angle crossings well apart from each other: crossings give the
  // plane fits two-dimensional structure, and the separation keeps one
  // stroke edge per fit neighborhood within an accumulation window.
  std::vector<LogoStroke> logo;
  logo.push_back(make_arc(z, x, 14.0 * d2r, 4.0 * d2r));
  logo.push_back(make_arc(off(10.0, 0.0), y, 9.0 * d2r, 4.0 * d2r));
  logo.push_back(make_arc(off(-13.0, -6.0), (x + y).normalized(), 8.0 * d2r, 3.5 * d2r));
  logo.push_back(make_arc(off(-3.0, 12.0), (x - y).normalized(), 7.0 * d2r, 3.5 * d2r));
  return logo;
}

namespace {

Eigen::Matrix3d placement_orientation(const Eigen::Vector3d& target, double phase_rad,
                                      const Eigen::Vector3d& spin_axis) {
  Eigen::Vector3d z = Eigen::Vector3d::UnitZ();
  Eigen::Matrix3d align;
  double c = z.dot(target);
  if (c > 1.0 - 1e-12) {
    align = Eigen::Matrix3d::Identity();
  } else if (c < -1.0 + 1e-12) {
    align = Eigen::AngleAxisd(M_PI, Eigen::Vector3d::UnitX()).toRotationMatrix();
  } else {
    Eigen::Vector3d axis = z.cross(target).normalized();
    align = Eigen::AngleAxisd(std::acos(c), axis).toRotationMatrix();
  }
  return Eigen::AngleAxisd(phase_rad, spin_axis).toRotationMatrix() * align;
}

}  // namespace

std::vector<NamedScene> scenario_suite(SuiteKind kind, const SuiteParams& params) {
  std::vector<NamedScene> scenes;
  SplitMix64 phase_rng(params.seed ^ 0x5eed5eedULL);

  if (kind == SuiteKind::kSpinner) {
    for (SpinKind spin : params.kinds) {
      std::vector<int> balls = params.balls;
      if (balls.empty()) {
        balls = spin == SpinKind::kSidespin ? std::vector<int>{2, 3, 4}
                                            : std::vector<int>{1, 6, 7};
      }
      for (int ball : balls) {
        for (double rps : params.rps_values) {
          NamedScene ns;
          ns.kind = spin;
          ns.ball = ball;
          ns.rps = rps;
          ns.name = "spinner-" + to_string(spin) + "-ball" + std::to_string(ball) + "-" +
                    std::to_string(static_cast<int>(rps)) + "rps";
          SimScene& sc = ns.scene;
          Eigen::Vector3d axis = suite_spin_axis(spin);
          sc.omega_rad_s = axis * (rps * kTwoPi);
          double phase = phase_rng.uniform01() * kTwoPi;
          sc.initial_orientation =
              placement_orientation(ball_placement(ball, spin), phase, axis);
          sc.strokes = default_logo();
          sc.duration_us = params.duration_us;
          sc.sensor.noise_rate_hz_px = params.noise_rate_hz_px;
          sc.seed = params.seed ^ (static_cast<std::uint64_t>(scenes.size()) * 0x9e3779b9ULL);
          scenes.push_back(std::move(ns));
        }
      }
    }
    return scenes;
  }

  for (SpinKind spin : params.kinds) {
    for (int setting : params.velocity_settings) {
      NamedScene ns;
      ns.kind = spin;
      ns.ball = 1;
      ns.rps = params.thrower_rps;
      ns.speed_mps = thrower_speed_mps(setting);
      ns.name = "thrower-" + to_string(spin) + "-v" + std::to_string(setting);
      SimScene& sc = ns.scene;
      Eigen::Vector3d axis = suite_spin_axis(spin);
      sc.omega_rad_s = axis * (params.thrower_rps * kTwoPi);
      double phase = phase_rng.uniform01() * kTwoPi;
      sc.initial_orientation = placement_orientation(ball_placement(1, spin), phase, axis);
      sc.strokes = default_logo();
      // The ball enters from outside the field of view, crosses it, and the
      // recording ends while it is still fully visible.
      double travel_m = 0.96;
      sc.center0_lateral_m = Eigen::Vector2d(-0.51, -0.02);
      sc.velocity_mps = Eigen::Vector3d(ns.speed_mps, 0.04 * ns.speed_mps, 0.0);
      sc.duration_us = static_cast<std::int64_t>(1e6 * travel_m / ns.speed_mps);
      sc.sensor.noise_rate_hz_px = params.noise_rate_hz_px;
      sc.seed = params.seed ^ (static_cast<std::uint64_t>(scenes.size()) * 0x9e3779b9ULL);
      scenes.push_back(std::move(ns));
    }
  }
  return scenes;
}

}  // namespace spinflow
