#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "spinflow/errors.hpp"

namespace spinflow {

enum class Polarity : std::uint8_t { kOff = 0, kOn = 1 };

// One sensor spike. Timestamps are microseconds relative to the stream epoch.
struct Event {
  std::int64_t t_us = 0;
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  Polarity polarity = Polarity::kOn;

  friend bool operator==(const Event&, const Event&) = default;
};

struct SensorGeometry {
  int width = 0;
  int height = 0;

  bool contains(int px, int py) const {
    return px >= 0 && px < width && py >= 0 && py < height;
  }

  friend bool operator==(const SensorGeometry&, const SensorGeometry&) = default;
};

// Time-ordered event sequence over a fixed sensor geometry.
struct EventStream {
  SensorGeometry geometry;
  std::vector<Event> events;

  std::int64_t duration_us() const {
    return events.empty() ? 0 : events.back().t_us;
  }
};

enum class StreamFormat { kCsv, kBin };

// Picks CSV for a ".csv" extension, BIN otherwise.
StreamFormat format_from_path(const std::filesystem::path& path);

// Throws OrderError on a decreasing timestamp, BoundsError on an
// out-of-geometry pixel.
void validate(const EventStream& stream);

EventStream read_events(const std::filesystem::path& path, StreamFormat format);
void write_events(const EventStream& stream, const std::filesystem::path& path,
                  StreamFormat format);

}  // namespace spinflow
