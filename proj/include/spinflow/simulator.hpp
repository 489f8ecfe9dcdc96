#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "spinflow/event_model.hpp"
#include "spinflow/tracker.hpp"

namespace spinflow {

// Great-circle arc on the unit sphere, in the ball body frame: points within
// half_width of the circle normal to `axis`, with azimuth about the axis in
// [arc_start, arc_end].
struct LogoStroke {
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  double arc_start_rad = 0.0;
  double arc_end_rad = 0.0;
  double half_width_rad = 0.0;
};

// Builds the arc through `center` (unit) running along `tangent`, spanning
// +-half_length of arc.
LogoStroke make_arc(const Eigen::Vector3d& center, const Eigen::Vector3d& tangent,
                    double half_length_rad, double half_width_rad);

// Direction of the arc midpoint (unit, body frame).
Eigen::Vector3d stroke_midpoint(const LogoStroke& stroke);

// Log-intensity levels.
struct Photometrics {
  double background = 0.0;
  double ball = 0.6;
  double logo = 0.05;
};

struct SensorModel {
  double c_on = 0.25;   // contrast threshold for ON events
  double c_off = 0.25;  // contrast threshold for OFF events
  std::int64_t refractory_us = 50;
  double noise_rate_hz_px = 0.1;  // homogeneous per-pixel Poisson noise
  std::int64_t off_latency_us = 0;  // optional slower OFF response
};

// Camera frame throughout: x right, y down, z toward the camera; spin
// vectors and ground truth use the same frame the estimator reports in.
struct SimScene {
  SensorGeometry geometry{640, 360};
  double focal_px = 400.0;
  double ball_radius_m = 0.02;
  Eigen::Vector2d center0_lateral_m{0.0, 0.0};
  double depth0_m = 0.6;
  // z > 0 moves the ball toward the camera (depth shrinks, radius grows).
  Eigen::Vector3d velocity_mps{0.0, 0.0, 0.0};
  Eigen::Vector3d omega_rad_s{0.0, 0.0, 0.0};
  Eigen::Matrix3d initial_orientation = Eigen::Matrix3d::Identity();
  std::vector<LogoStroke> strokes;
  Photometrics photo;
  SensorModel sensor;
  std::int64_t duration_us = 200000;
  double supersample_hz = 20000.0;
  double truth_rate_hz = 1000.0;
  std::uint64_t seed = 0;
};

struct GroundTruthSample {
  std::int64_t t_us = 0;
  double x_px = 0.0;
  double y_px = 0.0;
  double r_px = 0.0;
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();
  bool logo_visible = false;
};

struct GroundTruth {
  std::vector<GroundTruthSample> samples;
};

struct RenderResult {
  EventStream events;
  GroundTruth truth;
};

// Renders the scene at the supersample rate: the ball occupies the projected
// disc, strokes are looked up through the front-hemisphere sphere mapping,
// and each pixel emits an event whenever its log intensity moves one
// contrast step from the level at its previous event, with the timestamp
// interpolated between steps. Deterministic for a fixed seed.
RenderResult render_scene(const SimScene& scene);

// Rows `t_us,x_px,y_px,r_px,wx,wy,wz`.
void write_truth_csv(const GroundTruth& truth, const std::filesystem::path& path);
GroundTruth read_truth_csv(const std::filesystem::path& path);

// Track built from ground truth (velocities by finite differences), for
// running extraction and estimation against exact ball positions.
Track truth_track(const GroundTruth& truth);

enum class SpinKind { kTopspin, kBackspin, kSidespin };
enum class SuiteKind { kSpinner, kThrower };

std::string to_string(SpinKind kind);
SpinKind spin_kind_from_name(const std::string& name);

struct SuiteParams {
  std::vector<double> rps_values{25.0, 50.0, 75.0, 100.0};
  std::vector<SpinKind> kinds{SpinKind::kBackspin, SpinKind::kTopspin, SpinKind::kSidespin};
  // Spinner logo placements; ball 5 sits on the spin axis (the singular case).
  std::vector<int> balls{};  // empty selects the defaults per kind
  std::vector<int> velocity_settings{10, 15, 20, 25};  // thrower
  double thrower_rps = 40.0;
  std::int64_t duration_us = 200000;
  double noise_rate_hz_px = 0.0;
  std::uint64_t seed = 0;
};

struct NamedScene {
  std::string name;
  SimScene scene;
  SpinKind kind = SpinKind::kTopspin;
  int ball = 1;
  double rps = 0.0;
  double speed_mps = 0.0;
};

// Reproducible named scenes. Spinner: static ball, balls 1/6/7 for back/top
// spin and 2/3/4 for sidespin, ball 5 on the axis. Thrower: velocity
// settings 10/15/20/25 mapped to 4/5.5/7.5/9 m/s flights.
std::vector<NamedScene> scenario_suite(SuiteKind kind, const SuiteParams& params);

// Spin axis used by the suite for a given kind (unit vector).
Eigen::Vector3d suite_spin_axis(SpinKind kind);

// Logo-center placement for a spinner ball index (unit vector, camera frame).
Eigen::Vector3d ball_placement(int ball, SpinKind kind);

double thrower_speed_mps(int velocity_setting);

// Default stroke pattern shared by the suite scenes.
std::vector<LogoStroke> default_logo();

}  // namespace spinflow
