#include "spinflow/tracker.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <fstream>

namespace spinflow {

namespace {

struct SeedDetection {
  std::int64_t t_us = 0;
  std::int64_t tick = 0;
  CircleDetection det;
};

PixelRect roi_around(double cx, double cy, double halfwidth, const SensorGeometry& geo) {
  PixelRect r{static_cast<int>(std::floor(cx - halfwidth)),
              static_cast<int>(std::floor(cy - halfwidth)),
              static_cast<int>(std::ceil(cx + halfwidth)) + 1,
              static_cast<int>(std::ceil(cy + halfwidth)) + 1};
  return r.clipped(geo);
}

}  // namespace

Track track(const EventStream& stream, const TrackerConfig& cfg) {
  if (cfg.tick_rate_hz <= 0.0) throw ConfigError("tick rate must be > 0");
  if (stream.events.empty()) throw TrackLost("empty stream");

  const std::int64_t period_us =
      std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(1e6 / cfg.tick_rate_hz)));
  const double dt_s = static_cast<double>(period_us) * 1e-6;

  double decay = cfg.eros_decay > 0.0 ? cfg.eros_decay : ErosSurface::default_decay(cfg.k_eros);
  ErosSurface surface(stream.geometry, cfg.k_eros, decay);

  Track out;
  out.tick_period_us = period_us;

  std::optional<KalmanState> state;
  std::optional<SeedDetection> seed;
  int miss_count = 0;
  std::vector<PixelCoord> fresh;

  const std::int64_t t0 = stream.events.front().t_us;
  // Whole ticks only; a trailing fraction of a tick stays unprocessed.
  const std::int64_t n_ticks = (stream.events.back().t_us - t0) / period_us;
  std::size_t next_event = 0;

  for (std::int64_t tick = 1; tick <= n_ticks; ++tick) {
    const std::int64_t tick_t = t0 + tick * period_us;

    fresh.clear();
    while (next_event < stream.events.size() && stream.events[next_event].t_us <= tick_t) {
      const Event& e = stream.events[next_event++];
      surface.update(e);
      fresh.push_back({e.x, e.y});
    }
    surface.clean_around(fresh);

    HoughParams hough = cfg.hough;
    std::optional<PixelRect> roi;
    if (state) {
      double r_est = state->x(4);
      hough.r_min = std::max(cfg.hough.r_min, r_est - cfg.radius_gate_px);
      hough.r_max = std::min(cfg.hough.r_max, r_est + cfg.radius_gate_px);
      double pred_cx = state->x(0) + state->x(2) * dt_s;
      double pred_cy = state->x(1) + state->x(3) * dt_s;
      roi = roi_around(pred_cx, pred_cy, cfg.roi_halfwidth_factor * r_est, stream.geometry);
    }
    std::vector<CircleDetection> detections = hough_circles(surface, hough, roi);

    if (!state) {
      if (!detections.empty()) {
        const CircleDetection& d = detections.front();
        double gap_seed_s =
            seed ? static_cast<double>(tick_t - seed->t_us) * 1e-6 : 0.0;
        double dist = seed ? std::hypot(d.cx - seed->det.cx, d.cy - seed->det.cy) : 0.0;
        if (seed && tick - seed->tick <= cfg.init_max_tick_gap &&
            dist <= cfg.init_match_speed_px_s * gap_seed_s &&
            dist >= cfg.init_min_speed_px_s * gap_seed_s &&
            std::abs(d.r - seed->det.r) <= cfg.init_match_dr_px) {
          double gap_s = static_cast<double>(tick_t - seed->t_us) * 1e-6;
          Eigen::Vector2d vel((d.cx - seed->det.cx) / gap_s, (d.cy - seed->det.cy) / gap_s);
          state = kf_init(Eigen::Vector3d(d.cx, d.cy, d.r), vel, cfg.kalman);
          miss_count = 0;
          out.states.push_back({tick_t, state->x, state->P});
          continue;
        }
        seed = SeedDetection{tick_t, tick, d};
        miss_count = 0;
      } else {
        ++miss_count;
        // A single unconfirmed seed does not count as an established track.
        if (miss_count >= cfg.lost_after_ticks) {
          throw TrackLost("no usable detection within " +
                          std::to_string(cfg.lost_after_ticks) + " ticks");
        }
      }
      continue;
    }

    *state = kf_predict(*state, dt_s, cfg.kalman);
    bool accepted = false;
    if (!detections.empty()) {
      const CircleDetection& d = detections.front();
      KfUpdateResult res = kf_update(*state, Eigen::Vector3d(d.cx, d.cy, d.r), cfg.kalman);
      if (res.accepted) {
        *state = res.state;
        accepted = true;
      }
    }
    if (accepted) {
      miss_count = 0;
    } else {
      ++miss_count;
      if (miss_count >= cfg.lost_after_ticks) {
        out.lost_at_us = tick_t;
        break;
      }
    }
    out.states.push_back({tick_t, state->x, state->P});
  }

  if (out.states.empty()) {
    throw TrackLost("stream ended before a track was established");
  }
  return out;
}

std::vector<std::optional<BlobDetection>> blob_oracle(const EventStream& stream,
                                                      std::int64_t t_acc_us, int min_area) {
  if (t_acc_us <= 0) throw ConfigError("blob accumulation time must be > 0");
  std::vector<std::optional<BlobDetection>> out;
  if (stream.events.empty()) return out;

  const std::int64_t t0 = stream.events.front().t_us;
  const std::int64_t t_end = stream.events.back().t_us;
  const int w = stream.geometry.width;
  const int h = stream.geometry.height;

  // Complete windows only; a truncated streak would bias the centroid.
  for (std::int64_t wt = t0; wt + t_acc_us <= t_end + 1; wt += t_acc_us) {
    AccumulatedFrame frame = accumulate(stream, wt, t_acc_us);

    // Largest 8-connected component of active pixels, weighted by counts.
    std::vector<std::uint8_t> visited(static_cast<std::size_t>(w) * h, 0);
    BlobDetection best;
    bool found = false;
    std::vector<int> stack;
    for (int sy = 0; sy < h; ++sy) {
      for (int sx = 0; sx < w; ++sx) {
        std::size_t sidx = static_cast<std::size_t>(sy) * w + sx;
        if (visited[sidx] || frame.on_counts[sidx] + frame.off_counts[sidx] == 0) continue;
        stack.assign(1, static_cast<int>(sidx));
        visited[sidx] = 1;
        int area = 0;
        double wsum = 0.0, cx = 0.0, cy = 0.0;
        while (!stack.empty()) {
          int idx = stack.back();
          stack.pop_back();
          int x = idx % w;
          int y = idx / w;
          // Unweighted area centroid: count weighting would drift toward
          // logo bursts within the window.
          ++area;
          wsum += 1.0;
          cx += x;
          cy += y;
          for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
              int nx = x + dx;
              int ny = y + dy;
              if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
              std::size_t nidx = static_cast<std::size_t>(ny) * w + nx;
              if (visited[nidx] || frame.on_counts[nidx] + frame.off_counts[nidx] == 0) continue;
              visited[nidx] = 1;
              stack.push_back(static_cast<int>(nidx));
            }
          }
        }
        if (area >= min_area && area > best.area) {
          best.area = area;
          best.cx = cx / wsum;
          best.cy = cy / wsum;
          best.r_equiv = std::sqrt(area / M_PI);
          best.t_us = wt + t_acc_us / 2;
          found = true;
        }
      }
    }
    out.push_back(found ? std::optional<BlobDetection>(best) : std::nullopt);
  }
  return out;
}

void write_track_csv(const Track& track, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "# t_us,x,y,vx,vy,r,cov_trace\n";
  char buf[256];
  for (const TrackState& s : track.states) {
    int n = std::snprintf(buf, sizeof(buf), "%lld,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                          static_cast<long long>(s.t_us), s.x(0), s.x(1), s.x(2), s.x(3),
                          s.x(4), s.P.trace());
    out.write(buf, n);
  }
  if (!out) throw IoError("write failed for " + path.string());
}

Track read_track_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Track track;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    TrackState s;
    double fields[7];
    const char* p = line.c_str();
    const char* end = p + line.size();
    for (int i = 0; i < 7; ++i) {
      char* next = nullptr;
      if (i == 0) {
        s.t_us = std::strtoll(p, &next, 10);
      } else {
        fields[i] = std::strtod(p, &next);
      }
      if (next == p) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": malformed field");
      }
      p = next;
      if (i < 6) {
        if (p >= end || *p != ',') {
          throw ParseError(path.string() + ":" + std::to_string(line_no) +
                           ": expected 7 comma-separated fields");
        }
        ++p;
      }
    }
    s.x << fields[1], fields[2], fields[3], fields[4], fields[5];
    s.P = Mat5::Identity() * (fields[6] / 5.0);
    track.states.push_back(s);
  }
  if (track.states.size() >= 2) {
    track.tick_period_us = track.states[1].t_us - track.states[0].t_us;
  }
  return track;
}

}  // namespace spinflow
