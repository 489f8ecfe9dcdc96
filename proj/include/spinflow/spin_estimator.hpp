#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "spinflow/logo_extractor.hpp"

namespace spinflow {

struct EstimatorConfig {
  std::int64_t t_acc_us = 2000;
  int fit_halfwidth = 2;       // timestamp-plane fit over a 5x5 neighborhood
  int min_neighbors = 8;       // active pixels required in the neighborhood
  double residual_frac = 0.25; // RMS residual limit as a fraction of t_acc
  double max_flow_px_s = 1e5;  // gradient magnitude floor expressed as a flow cap
  double e_rz_min = 0.15;      // singularity guard on the radial z-component
  double ball_radius_m = 0.02; // standard 40 mm ball
  std::int64_t rate_bin_us = 1000;
  double ema_alpha = 0.2;
  double smooth_alpha = 0.1;
  double expected_rps = 50.0;  // median of the expected spin range (fast mode)
  int min_flows_per_window = 4;
  bool use_median = false;     // median aggregation instead of the mean
};

// One tenth of the rotation period, so the flow is observed several times
// per rotation even when the true spin is faster than expected.
std::int64_t choose_t_acc(double expected_rps);

struct FlowVector {
  double u = 0.0;  // ball-centric pixel location
  double v = 0.0;
  double fx_px_s = 0.0;
  double fy_px_s = 0.0;
};

// Local optical flow from least-squares timestamp-plane fits over the
// window's per-pixel latest-event map. Returns one flow per qualifying
// pixel; an empty result means no pixel qualified.
std::vector<FlowVector> plane_fit_flow(std::span<const LogoEvent> window,
                                       const EstimatorConfig& cfg);

// Lifts an image-plane flow to the sphere and inverts the rigid rotation:
// e_r = (u, v, sqrt(r^2-u^2-v^2))/r, the 3-velocity completed from the
// tangency constraint e_r . v = 0, and omega = (e_r x v) / R. Returns
// nullopt when e_rz falls under the singularity guard.
std::optional<Eigen::Vector3d> flow_to_spin(const FlowVector& flow, double r_px,
                                            const EstimatorConfig& cfg);

struct SpinEstimate {
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();  // rad/s, camera frame
  double magnitude_rps = 0.0;
  Eigen::Vector3d axis = Eigen::Vector3d::Zero();
  int n_flows = 0;
  std::int64_t t0_us = 0;
  std::int64_t t1_us = 0;
};

struct SpinSeries {
  std::vector<SpinEstimate> windows;  // per-t_acc-window estimates
  SpinEstimate mean;                  // collective average across windows
};

// Slices the logo stream into consecutive t_acc windows and averages the
// per-flow spins in each. Throws InsufficientFlow when no window reaches
// the configured minimum of valid flows.
SpinSeries estimate_spin_flow(const LogoStream& logo, const Track& track,
                              const EstimatorConfig& cfg);

// Spin magnitude from event-rate periodicity: bin counts, EMA, mean
// subtraction, a second EMA as low pass, then the mean spacing of
// positive-to-negative sign transitions. Throws NoPeriodicity with fewer
// than two transitions.
double estimate_magnitude_event_rate(const LogoStream& logo, const EstimatorConfig& cfg);

enum class EstimateMode { kFast, kRefined };

// Full result of one estimation run, for report serialization.
struct SpinReport {
  SpinEstimate final;
  SpinSeries series;
  EstimateMode mode = EstimateMode::kFast;
  double event_rate_rps = 0.0;
  bool used_event_rate = false;
};

// fast: t_acc from the configured expected spin, flow-only estimate.
// refined: event-rate magnitude picks t_acc and overrides the reported
// magnitude; the axis comes from the flow.
SpinReport estimate_spin_report(const LogoStream& logo, const Track& track,
                                const EstimatorConfig& cfg, EstimateMode mode);

SpinEstimate estimate_spin(const LogoStream& logo, const Track& track,
                           const EstimatorConfig& cfg, EstimateMode mode);

}  // namespace spinflow
