#include "spinflow/hough.hpp"

#include <algorithm>
#include <cmath>

namespace spinflow {

namespace {

constexpr int kGridStep = 2;

struct RadiusOffsets {
  double r = 0.0;
  std::vector<std::pair<int, int>> offsets;  // integer (dx, dy) on the circle
};

std::vector<RadiusOffsets> build_offsets(const HoughParams& p) {
  std::vector<RadiusOffsets> table;
  for (double r = p.r_min; r <= p.r_max + 1e-9; r += p.r_step) {
    RadiusOffsets ro;
    ro.r = r;
    int n = std::max(8, static_cast<int>(std::ceil(2.0 * M_PI * r / kGridStep)));
    ro.offsets.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      double a = 2.0 * M_PI * i / n;
      int dx = static_cast<int>(std::lround(r * std::cos(a)));
      int dy = static_cast<int>(std::lround(r * std::sin(a)));
      ro.offsets.emplace_back(dx, dy);
    }
    std::sort(ro.offsets.begin(), ro.offsets.end());
    ro.offsets.erase(std::unique(ro.offsets.begin(), ro.offsets.end()), ro.offsets.end());
    table.push_back(std::move(ro));
  }
  return table;
}

}  // namespace

std::vector<CircleDetection> hough_circles(const ErosSurface& surface,
                                           const HoughParams& params,
                                           std::optional<PixelRect> roi) {
  const SensorGeometry& geo = surface.geometry();
  if (params.r_min < 3.0) throw ConfigError("hough r_min must be >= 3");
  if (params.r_max >= std::min(geo.width, geo.height) / 2.0) {
    throw ConfigError("hough r_max must be < min(width,height)/2");
  }
  if (params.r_min > params.r_max) return {};

  PixelRect scan = roi.value_or(PixelRect{0, 0, geo.width, geo.height}).clipped(geo);
  if (scan.empty()) return {};

  const std::vector<RadiusOffsets> radii = build_offsets(params);
  const int nr = static_cast<int>(radii.size());
  const int gx0 = scan.x0 / kGridStep;
  const int gy0 = scan.y0 / kGridStep;
  const int gw = (scan.x1 - 1) / kGridStep - gx0 + 1;
  const int gh = (scan.y1 - 1) / kGridStep - gy0 + 1;

  std::vector<int> acc(static_cast<std::size_t>(nr) * gw * gh, 0);
  auto cell = [&](int ri, int gx, int gy) -> int& {
    return acc[(static_cast<std::size_t>(ri) * gh + gy) * gw + gx];
  };

  for (int y = scan.y0; y < scan.y1; ++y) {
    for (int x = scan.x0; x < scan.x1; ++x) {
      if (surface.at(x, y) < params.pixel_threshold) continue;
      for (int ri = 0; ri < nr; ++ri) {
        for (auto [dx, dy] : radii[static_cast<std::size_t>(ri)].offsets) {
          int cx = x + dx;
          int cy = y + dy;
          if (cx < scan.x0 || cx >= scan.x1 || cy < scan.y0 || cy >= scan.y1) continue;
          ++cell(ri, cx / kGridStep - gx0, cy / kGridStep - gy0);
        }
      }
    }
  }

  // Greedy peak extraction with non-maximum suppression across radii.
  std::vector<CircleDetection> detections;
  std::vector<std::pair<double, double>> taken;  // suppressed centers (px)
  while (static_cast<int>(detections.size()) < params.max_candidates) {
    int best_ri = -1, best_gx = 0, best_gy = 0;
    double best_frac = 0.0;
    int best_votes = 0;
    for (int ri = 0; ri < nr; ++ri) {
      const auto& ro = radii[static_cast<std::size_t>(ri)];
      int threshold = std::max(params.min_votes,
                               static_cast<int>(params.vote_threshold * ro.offsets.size()));
      for (int gy = 0; gy < gh; ++gy) {
        for (int gx = 0; gx < gw; ++gx) {
          int v = cell(ri, gx, gy);
          if (v < threshold) continue;
          double px = (gx0 + gx) * kGridStep + 0.5;
          double py = (gy0 + gy) * kGridStep + 0.5;
          bool suppressed = false;
          for (auto [tx, ty] : taken) {
            if (std::hypot(px - tx, py - ty) < params.suppression_radius) {
              suppressed = true;
              break;
            }
          }
          if (suppressed) continue;
          double frac = static_cast<double>(v) / ro.offsets.size();
          if (frac > best_frac) {
            best_frac = frac;
            best_votes = v;
            best_ri = ri;
            best_gx = gx;
            best_gy = gy;
          }
        }
      }
    }
    if (best_ri < 0) break;

    // Re-vote on a 1 px grid around the coarse peak, then take the centroid
    // of the 3x3 neighborhood of the refined accumulator peak.
    const double coarse_cx = (gx0 + best_gx) * kGridStep + 0.5;
    const double coarse_cy = (gy0 + best_gy) * kGridStep + 0.5;
    const double best_r = radii[static_cast<std::size_t>(best_ri)].r;
    constexpr int kFineHalf = 4;
    int fine[2 * kFineHalf + 1][2 * kFineHalf + 1] = {};
    {
      int bx0 = std::max(scan.x0, static_cast<int>(coarse_cx - best_r) - kFineHalf - 2);
      int bx1 = std::min(scan.x1, static_cast<int>(coarse_cx + best_r) + kFineHalf + 3);
      int by0 = std::max(scan.y0, static_cast<int>(coarse_cy - best_r) - kFineHalf - 2);
      int by1 = std::min(scan.y1, static_cast<int>(coarse_cy + best_r) + kFineHalf + 3);
      int n = std::max(16, static_cast<int>(std::ceil(2.0 * M_PI * best_r)));
      for (int y = by0; y < by1; ++y) {
        for (int x = bx0; x < bx1; ++x) {
          if (surface.at(x, y) < params.pixel_threshold) continue;
          double d = std::hypot(x - coarse_cx, y - coarse_cy);
          if (std::abs(d - best_r) > kFineHalf + 1.5) continue;
          for (int i = 0; i < n; ++i) {
            double a = 2.0 * M_PI * i / n;
            int cx_i = static_cast<int>(std::lround(x + best_r * std::cos(a) - coarse_cx)) +
                       kFineHalf;
            int cy_i = static_cast<int>(std::lround(y + best_r * std::sin(a) - coarse_cy)) +
                       kFineHalf;
            if (cx_i < 0 || cx_i > 2 * kFineHalf || cy_i < 0 || cy_i > 2 * kFineHalf) continue;
            ++fine[cy_i][cx_i];
          }
        }
      }
    }
    int peak_x = kFineHalf, peak_y = kFineHalf, peak_v = -1;
    for (int fy = 0; fy <= 2 * kFineHalf; ++fy) {
      for (int fx = 0; fx <= 2 * kFineHalf; ++fx) {
        if (fine[fy][fx] > peak_v) {
          peak_v = fine[fy][fx];
          peak_x = fx;
          peak_y = fy;
        }
      }
    }
    double wsum = 0.0, cx = 0.0, cy = 0.0;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        int fx = peak_x + dx;
        int fy = peak_y + dy;
        if (fx < 0 || fx > 2 * kFineHalf || fy < 0 || fy > 2 * kFineHalf) continue;
        double w = fine[fy][fx];
        wsum += w;
        cx += w * (coarse_cx + fx - kFineHalf);
        cy += w * (coarse_cy + fy - kFineHalf);
      }
    }
    cx = wsum > 0.0 ? cx / wsum : coarse_cx;
    cy = wsum > 0.0 ? cy / wsum : coarse_cy;

    double rsum = 0.0, rw = 0.0;
    for (int dri = -1; dri <= 1; ++dri) {
      int ri = best_ri + dri;
      if (ri < 0 || ri >= nr) continue;
      double w = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          int gx = best_gx + dx;
          int gy = best_gy + dy;
          if (gx < 0 || gx >= gw || gy < 0 || gy >= gh) continue;
          w += cell(ri, gx, gy);
        }
      }
      w /= radii[static_cast<std::size_t>(ri)].offsets.size();
      rw += w;
      rsum += w * radii[static_cast<std::size_t>(ri)].r;
    }

    CircleDetection det;
    det.cx = cx;
    det.cy = cy;
    det.r = rw > 0.0 ? rsum / rw : best_r;
    det.score = best_votes;
    detections.push_back(det);
    taken.emplace_back(cx, cy);
  }

  std::sort(detections.begin(), detections.end(),
            [](const CircleDetection& a, const CircleDetection& b) { return a.score > b.score; });
  return detections;
}

}  // namespace spinflow
