#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "spinflow/event_model.hpp"

namespace spinflow {

// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool empty() const { return x1 <= x0 || y1 <= y0; }

  PixelRect clipped(const SensorGeometry& geo) const {
    return {std::max(x0, 0), std::max(y0, 0), std::min(x1, geo.width),
            std::min(y1, geo.height)};
  }
};

struct PixelCoord {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
};

// Per-pixel ON/OFF event counts over the window [t0, t0 + t_acc).
struct AccumulatedFrame {
  SensorGeometry geometry;
  std::int64_t t0_us = 0;
  std::int64_t t_acc_us = 0;
  std::vector<std::uint32_t> on_counts;
  std::vector<std::uint32_t> off_counts;

  std::uint32_t on_at(int x, int y) const {
    return on_counts[static_cast<std::size_t>(y) * geometry.width + x];
  }
  std::uint32_t off_at(int x, int y) const {
    return off_counts[static_cast<std::size_t>(y) * geometry.width + x];
  }
  std::uint32_t total_at(int x, int y) const { return on_at(x, y) + off_at(x, y); }
};

AccumulatedFrame accumulate(const EventStream& stream, std::int64_t t0_us,
                            std::int64_t t_acc_us);

// Per-pixel most-recent event time per polarity with linear decay on render.
class LinearTimeSurface {
 public:
  LinearTimeSurface(SensorGeometry geometry, std::int64_t tau_us);

  void update(const Event& e);

  // max(0, 1 - (t_now - t_last)/tau) per pixel; never-hit pixels render 0.
  // Uses the most recent event of either polarity.
  std::vector<float> render(std::int64_t t_now_us) const;

  const SensorGeometry& geometry() const { return geometry_; }
  std::int64_t tau_us() const { return tau_us_; }

 private:
  SensorGeometry geometry_;
  std::int64_t tau_us_;
  std::vector<std::int64_t> last_on_;
  std::vector<std::int64_t> last_off_;
};

// Exponential Reduced Ordinal Surface: each event multiplies its k x k
// neighborhood by the decay factor and sets its own pixel to 1.
class ErosSurface {
 public:
  ErosSurface(SensorGeometry geometry, int k_eros, double decay);

  // decay = 0.3^(1/k): an edge crossing a neighborhood k times pushes stale
  // values down to 0.3.
  static double default_decay(int k_eros) { return std::pow(0.3, 1.0 / k_eros); }

  void update(const Event& e);

  // Hit-or-miss cleanup over the whole surface or a region: a 4x4 kernel with
  // a 2x2 center and 12 background border cells. Wherever the border is all
  // background and the center holds any foreground, the center is zeroed.
  // Removes isolated single pixels and blobs up to 2x2.
  void clean_isolated();
  void clean_isolated(const PixelRect& region);

  // Incremental variant used by the tracker tick: only placements whose 2x2
  // center covers one of the given freshly-updated pixels can newly match.
  void clean_around(std::span<const PixelCoord> fresh);

  float at(int x, int y) const {
    return values_[static_cast<std::size_t>(y) * geometry_.width + x];
  }
  void set(int x, int y, float v) {
    values_[static_cast<std::size_t>(y) * geometry_.width + x] = v;
  }

  const SensorGeometry& geometry() const { return geometry_; }
  int k_eros() const { return k_eros_; }
  double decay() const { return decay_; }
  const std::vector<float>& values() const { return values_; }

 private:
  bool placement_matches(int px, int py) const;
  void zero_centers(const std::vector<std::pair<int, int>>& placements);

  SensorGeometry geometry_;
  int k_eros_;
  double decay_;
  std::vector<float> values_;
};

// 8-bit PGM for visual inspection of any rendered surface.
void write_pgm(const std::filesystem::path& path, const SensorGeometry& geometry,
               std::span<const float> values);

}  // namespace spinflow
