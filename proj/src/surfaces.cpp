#include "spinflow/surfaces.hpp"

#include <algorithm>
#include <fstream>

namespace spinflow {

AccumulatedFrame accumulate(const EventStream& stream, std::int64_t t0_us,
                            std::int64_t t_acc_us) {
  if (t_acc_us <= 0) throw ConfigError("accumulation time must be > 0");

  AccumulatedFrame frame;
  frame.geometry = stream.geometry;
  frame.t0_us = t0_us;
  frame.t_acc_us = t_acc_us;
  std::size_t n = static_cast<std::size_t>(stream.geometry.width) * stream.geometry.height;
  frame.on_counts.assign(n, 0);
  frame.off_counts.assign(n, 0);

  auto begin = std::lower_bound(stream.events.begin(), stream.events.end(), t0_us,
                                [](const Event& e, std::int64_t t) { return e.t_us < t; });
  for (auto it = begin; it != stream.events.end() && it->t_us < t0_us + t_acc_us; ++it) {
    std::size_t idx = static_cast<std::size_t>(it->y) * stream.geometry.width + it->x;
    if (it->polarity == Polarity::kOn) {
      ++frame.on_counts[idx];
    } else {
      ++frame.off_counts[idx];
    }
  }
  return frame;
}

LinearTimeSurface::LinearTimeSurface(SensorGeometry geometry, std::int64_t tau_us)
    : geometry_(geometry), tau_us_(tau_us) {
  if (tau_us_ <= 0) throw ConfigError("time-surface tau must be > 0");
  std::size_t n = static_cast<std::size_t>(geometry_.width) * geometry_.height;
  last_on_.assign(n, INT64_MIN);
  last_off_.assign(n, INT64_MIN);
}

void LinearTimeSurface::update(const Event& e) {
  std::size_t idx = static_cast<std::size_t>(e.y) * geometry_.width + e.x;
  (e.polarity == Polarity::kOn ? last_on_ : last_off_)[idx] = e.t_us;
}

std::vector<float> LinearTimeSurface::render(std::int64_t t_now_us) const {
  std::vector<float> img(last_on_.size(), 0.0f);
  for (std::size_t i = 0; i < img.size(); ++i) {
    std::int64_t last = std::max(last_on_[i], last_off_[i]);
    if (last == INT64_MIN) continue;
    double v = 1.0 - static_cast<double>(t_now_us - last) / static_cast<double>(tau_us_);
    img[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return img;
}

ErosSurface::ErosSurface(SensorGeometry geometry, int k_eros, double decay)
    : geometry_(geometry), k_eros_(k_eros), decay_(decay) {
  if (k_eros_ < 1) throw ConfigError("k_eros must be >= 1");
  if (decay_ <= 0.0 || decay_ >= 1.0) throw ConfigError("eros decay must be in (0,1)");
  values_.assign(static_cast<std::size_t>(geometry_.width) * geometry_.height, 0.0f);
}

void ErosSurface::update(const Event& e) {
  int x0 = std::max(static_cast<int>(e.x) - k_eros_ / 2, 0);
  int y0 = std::max(static_cast<int>(e.y) - k_eros_ / 2, 0);
  int x1 = std::min(static_cast<int>(e.x) - k_eros_ / 2 + k_eros_, geometry_.width);
  int y1 = std::min(static_cast<int>(e.y) - k_eros_ / 2 + k_eros_, geometry_.height);
  float d = static_cast<float>(decay_);
  for (int y = y0; y < y1; ++y) {
    float* row = values_.data() + static_cast<std::size_t>(y) * geometry_.width;
    for (int x = x0; x < x1; ++x) row[x] *= d;
  }
  values_[static_cast<std::size_t>(e.y) * geometry_.width + e.x] = 1.0f;
}

bool ErosSurface::placement_matches(int px, int py) const {
  // px,py is the top-left of the 4x4 window; cells outside the image count as
  // background.
  bool any_center = false;
  for (int dy = 0; dy < 4; ++dy) {
    int y = py + dy;
    for (int dx = 0; dx < 4; ++dx) {
      int x = px + dx;
      bool inside = geometry_.contains(x, y);
      bool fg = inside && at(x, y) > 0.0f;
      bool is_center = (dx == 1 || dx == 2) && (dy == 1 || dy == 2);
      if (is_center) {
        any_center = any_center || fg;
      } else if (fg) {
        return false;
      }
    }
  }
  return any_center;
}

void ErosSurface::clean_isolated() {
  clean_isolated({0, 0, geometry_.width, geometry_.height});
}

void ErosSurface::clean_isolated(const PixelRect& region) {
  PixelRect r = region.clipped(geometry_);
  if (r.empty()) return;
  // Placements whose 2x2 center intersects the region; the window may hang
  // over the image border. Matches are collected first so all placements see
  // the same pre-clean surface.
  std::vector<std::pair<int, int>> matched;
  for (int py = r.y0 - 2; py < r.y1 - 1; ++py) {
    for (int px = r.x0 - 2; px < r.x1 - 1; ++px) {
      if (placement_matches(px, py)) matched.emplace_back(px, py);
    }
  }
  zero_centers(matched);
}

void ErosSurface::zero_centers(const std::vector<std::pair<int, int>>& placements) {
  for (auto [px, py] : placements) {
    for (int dy = 1; dy <= 2; ++dy) {
      for (int dx = 1; dx <= 2; ++dx) {
        int x = px + dx;
        int y = py + dy;
        if (geometry_.contains(x, y)) set(x, y, 0.0f);
      }
    }
  }
}

void ErosSurface::clean_around(std::span<const PixelCoord> fresh) {
  // A new foreground pixel can only create matches for the 4 placements that
  // hold it in their 2x2 center.
  std::vector<std::pair<int, int>> matched;
  for (const PixelCoord& p : fresh) {
    for (int py = static_cast<int>(p.y) - 2; py <= static_cast<int>(p.y) - 1; ++py) {
      for (int px = static_cast<int>(p.x) - 2; px <= static_cast<int>(p.x) - 1; ++px) {
        if (placement_matches(px, py)) matched.emplace_back(px, py);
      }
    }
  }
  zero_centers(matched);
}

void write_pgm(const std::filesystem::path& path, const SensorGeometry& geometry,
               std::span<const float> values) {
  if (values.size() != static_cast<std::size_t>(geometry.width) * geometry.height) {
    throw ConfigError("pgm buffer size does not match geometry");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P5\n" << geometry.width << ' ' << geometry.height << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(geometry.width));
  for (int y = 0; y < geometry.height; ++y) {
    for (int x = 0; x < geometry.width; ++x) {
      float v = std::clamp(values[static_cast<std::size_t>(y) * geometry.width + x], 0.0f, 1.0f);
      row[static_cast<std::size_t>(x)] = static_cast<unsigned char>(v * 255.0f + 0.5f);
    }
    out.write(reinterpret_cast<const char*>(row.data()), geometry.width);
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace spinflow
