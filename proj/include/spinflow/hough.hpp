#pragma once

#include <optional>
#include <vector>

#include "spinflow/surfaces.hpp"

namespace spinflow {

struct CircleDetection {
  double cx = 0.0;  // sub-pixel center
  double cy = 0.0;
  double r = 0.0;
  int score = 0;  // accumulator votes at the peak
};

struct HoughParams {
  double r_min = 6.0;
  double r_max = 40.0;
  double r_step = 1.0;
  // Peak threshold as a fraction of the perimeter samples for that radius, so
  // the setting is radius-invariant.
  double vote_threshold = 0.30;
  int min_votes = 10;
  int max_candidates = 4;
  // Candidates closer than this to a stronger one are suppressed (px).
  double suppression_radius = 8.0;
  // Only pixels at or above this surface value vote. Stale regions decay
  // well below it while fresh edges sit near 1; voting from every nonzero
  // pixel would let the carpet of old activity outvote the current rim.
  float pixel_threshold = 0.5f;
};

// Votes from every nonzero surface pixel over a (cx, cy, r) accumulator on a
// 2 px center grid; peak centers are refined to sub-pixel by the centroid of
// the 3x3 accumulator neighborhood. Candidates come back sorted by score.
std::vector<CircleDetection> hough_circles(const ErosSurface& surface,
                                           const HoughParams& params,
                                           std::optional<PixelRect> roi = std::nullopt);

}  // namespace spinflow
