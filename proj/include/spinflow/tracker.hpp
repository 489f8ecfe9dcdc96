#pragma once

#include <optional>
#include <vector>

#include "spinflow/hough.hpp"
#include "spinflow/kalman.hpp"
#include "spinflow/surfaces.hpp"

namespace spinflow {

struct TrackerConfig {
  double tick_rate_hz = 200.0;
  HoughParams hough;           // full search range, used until lock
  double radius_gate_px = 2.5; // radius search half-window around the estimate
  KalmanConfig kalman;
  int lost_after_ticks = 20;
  int k_eros = 10;
  double eros_decay = -1.0;    // < 0 selects ErosSurface::default_decay(k_eros)
  // Spatial search window half-width around the predicted center, as a
  // multiple of the estimated radius.
  double roi_halfwidth_factor = 3.0;
  // Two detections seed the filter when their radii agree and their offset
  // is reachable at plausible ball speed. A minimum apparent speed rejects
  // self-consistent static leftovers on the surface.
  double init_match_speed_px_s = 10000.0;
  double init_min_speed_px_s = 200.0;
  double init_match_dr_px = 4.0;
  int init_max_tick_gap = 4;
};

struct TrackState {
  std::int64_t t_us = 0;
  Vec5 x = Vec5::Zero();  // [x_b, y_b, vx, vy, r]
  Mat5 P = Mat5::Identity();
};

struct Track {
  std::vector<TrackState> states;
  std::int64_t tick_period_us = 5000;
  // Set when an established track ran out of usable detections mid-stream.
  std::optional<std::int64_t> lost_at_us;
};

// Folds events into an EROS surface at the configured tick rate, cleans it,
// detects the ball via the Hough transform and smooths with the Kalman
// filter. Emits the post-update state per tick once two consistent
// detections have seeded the filter. Throws TrackLost when no track could be
// established within the miss budget.
Track track(const EventStream& stream, const TrackerConfig& cfg);

// Blob-detection ground-truth oracle: per accumulation window, centroid and
// equivalent radius of the largest connected component. Windows without a
// component above min_area yield nullopt.
struct BlobDetection {
  std::int64_t t_us = 0;  // window center
  double cx = 0.0;
  double cy = 0.0;
  double r_equiv = 0.0;
  int area = 0;
};

std::vector<std::optional<BlobDetection>> blob_oracle(const EventStream& stream,
                                                      std::int64_t t_acc_us = 10000,
                                                      int min_area = 20);

// Per-tick rows `t_us,x,y,vx,vy,r,cov_trace`.
void write_track_csv(const Track& track, const std::filesystem::path& path);
Track read_track_csv(const std::filesystem::path& path);

}  // namespace spinflow
