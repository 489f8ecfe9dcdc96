#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "spinflow/event_model.hpp"
#include "spinflow/tracker.hpp"

namespace spinflow {

// Event re-expressed in ball-centric pixel offsets: u = x_e - x_b(t_e),
// v = y_e - y_b(t_e).
struct LogoEvent {
  std::int64_t t_us = 0;
  double u = 0.0;
  double v = 0.0;
  Polarity polarity = Polarity::kOn;
};

struct LogoStream {
  std::vector<LogoEvent> events;
};

struct ExtractionConfig {
  // Margin against ball-edge events; < 0 selects max(2 px, 0.1 * r).
  double pad_px = -1.0;
};

struct BallSample {
  double x = 0.0;
  double y = 0.0;
  double r = 0.0;
};

// Extrapolates the ball center from the latest tick at or before t_us:
// p_b(t) = p_b(t_i) + v_b(t_i) * (t - t_i); the radius is held from that
// tick. Throws OutOfTrackRange outside [first tick, last tick + one period].
BallSample ball_position_at(const Track& track, std::int64_t t_us);

// Keeps exactly the events with (x_e - x_b)^2 + (y_e - y_b)^2 < (r - pad)^2
// and rebases them to (u, v). Events outside the track's time span are
// skipped.
LogoStream extract_logo_events(const EventStream& stream, const Track& track,
                               const ExtractionConfig& cfg);

double effective_pad(const ExtractionConfig& cfg, double r);

// Logo-event codecs mirror the event codecs with signed sub-pixel offsets;
// both quantize u,v to 0.01 px so the formats commute.
LogoStream read_logo_events(const std::filesystem::path& path, StreamFormat format);
void write_logo_events(const LogoStream& stream, const std::filesystem::path& path,
                       StreamFormat format);

}  // namespace spinflow
