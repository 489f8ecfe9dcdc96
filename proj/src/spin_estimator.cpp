#include "spinflow/spin_estimator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <unordered_map>

namespace spinflow {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

struct GridKey {
  int u;
  int v;
  bool operator==(const GridKey&) const = default;
};

struct GridKeyHash {
  std::size_t operator()(const GridKey& k) const {
    return std::hash<std::int64_t>()((static_cast<std::int64_t>(k.u) << 20) ^ k.v);
  }
};

double component_median(std::vector<double>& values) {
  std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  double hi = values[mid];
  if (values.size() % 2 == 1) return hi;
  std::nth_element(values.begin(), values.begin() + mid - 1, values.begin() + mid);
  return 0.5 * (hi + values[mid - 1]);
}

Eigen::Vector3d aggregate(std::vector<Eigen::Vector3d>& spins, bool use_median) {
  if (!use_median) {
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    for (const auto& w : spins) sum += w;
    return sum / static_cast<double>(spins.size());
  }
  Eigen::Vector3d med;
  std::vector<double> comp(spins.size());
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < spins.size(); ++i) comp[i] = spins[i](c);
    med(c) = component_median(comp);
  }
  return med;
}

SpinEstimate finalize(const Eigen::Vector3d& omega, int n_flows, std::int64_t t0,
                      std::int64_t t1) {
  SpinEstimate est;
  est.omega = omega;
  double norm = omega.norm();
  est.magnitude_rps = norm / kTwoPi;
  est.axis = norm > 0.0 ? Eigen::Vector3d(omega / norm) : Eigen::Vector3d::Zero();
  est.n_flows = n_flows;
  est.t0_us = t0;
  est.t1_us = t1;
  return est;
}

}  // namespace

std::int64_t choose_t_acc(double expected_rps) {
  if (!(expected_rps > 0.0)) {
    throw InvalidSpin("expected spin must be > 0 rps");
  }
  return static_cast<std::int64_t>(std::llround(1e6 / (10.0 * expected_rps)));
}

std::vector<FlowVector> plane_fit_flow(std::span<const LogoEvent> window,
                                       const EstimatorConfig& cfg) {
  std::vector<FlowVector> flows;
  if (window.empty()) return flows;

  // Latest timestamp per integer (u, v) cell over the window.
  std::unordered_map<GridKey, double, GridKeyHash> latest;
  latest.reserve(window.size());
  const std::int64_t t_base = window.front().t_us;
  for (const LogoEvent& e : window) {
    GridKey key{static_cast<int>(std::lround(e.u)), static_cast<int>(std::lround(e.v))};
    double t_rel = static_cast<double>(e.t_us - t_base);
    auto [it, inserted] = latest.try_emplace(key, t_rel);
    if (!inserted && t_rel > it->second) it->second = t_rel;
  }

  const int hw = cfg.fit_halfwidth;
  const double residual_limit = cfg.residual_frac * static_cast<double>(cfg.t_acc_us);
  // |grad| floor in us/px equivalent to the configured flow cap.
  const double grad2_floor_us = 1e6 / cfg.max_flow_px_s;
  const double grad2_floor = grad2_floor_us * grad2_floor_us;

  std::vector<GridKey> cells;
  cells.reserve(latest.size());
  for (const auto& [key, t] : latest) cells.push_back(key);
  std::sort(cells.begin(), cells.end(), [](const GridKey& a, const GridKey& b) {
    return a.v != b.v ? a.v < b.v : a.u < b.u;
  });

  std::vector<std::array<double, 3>> pts;  // (u, v, t_rel)
  for (const GridKey& center : cells) {
    pts.clear();
    for (int dv = -hw; dv <= hw; ++dv) {
      for (int du = -hw; du <= hw; ++du) {
        auto it = latest.find(GridKey{center.u + du, center.v + dv});
        if (it != latest.end()) {
          pts.push_back({static_cast<double>(du), static_cast<double>(dv), it->second});
        }
      }
    }
    if (static_cast<int>(pts.size()) < cfg.min_neighbors) continue;

    // Least squares t = a*u + b*v + c over the neighborhood.
    Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
    Eigen::Vector3d atb = Eigen::Vector3d::Zero();
    for (const auto& p : pts) {
      Eigen::Vector3d row(p[0], p[1], 1.0);
      ata += row * row.transpose();
      atb += row * p[2];
    }
    Eigen::Vector3d coeff = ata.ldlt().solve(atb);
    double a = coeff(0);
    double b = coeff(1);

    double ss = 0.0;
    for (const auto& p : pts) {
      double r = p[2] - (a * p[0] + b * p[1] + coeff(2));
      ss += r * r;
    }
    double rms = std::sqrt(ss / static_cast<double>(pts.size()));
    if (rms > residual_limit) continue;

    double grad2 = a * a + b * b;
    if (grad2 < grad2_floor) continue;

    // Flow in px/s: the plane normal gradient is us/px.
    FlowVector f;
    f.u = center.u;
    f.v = center.v;
    f.fx_px_s = a / grad2 * 1e6;
    f.fy_px_s = b / grad2 * 1e6;
    flows.push_back(f);
  }
  return flows;
}

std::optional<Eigen::Vector3d> flow_to_spin(const FlowVector& flow, double r_px,
                                            const EstimatorConfig& cfg) {
  double rho2 = (flow.u * flow.u + flow.v * flow.v) / (r_px * r_px);
  if (rho2 >= 1.0) return std::nullopt;
  double e_rz = std::sqrt(1.0 - rho2);
  if (e_rz < cfg.e_rz_min) return std::nullopt;

  Eigen::Vector3d e_r(flow.u / r_px, flow.v / r_px, e_rz);
  double meters_per_pixel = cfg.ball_radius_m / r_px;
  double vx = flow.fx_px_s * meters_per_pixel;
  double vy = flow.fy_px_s * meters_per_pixel;
  // Tangency e_r . v = 0 completes the out-of-plane velocity component.
  double vz = (-vx * e_r(0) - vy * e_r(1)) / e_rz;
  Eigen::Vector3d v(vx, vy, vz);
  return e_r.cross(v) / cfg.ball_radius_m;
}

SpinSeries estimate_spin_flow(const LogoStream& logo, const Track& track,
                              const EstimatorConfig& cfg) {
  if (cfg.t_acc_us <= 0) throw ConfigError("t_acc must be > 0");
  if (logo.events.empty()) throw InsufficientFlow("empty logo stream");

  SpinSeries series;
  const std::int64_t t0 = logo.events.front().t_us;
  const std::int64_t t_end = logo.events.back().t_us;

  std::vector<Eigen::Vector3d> window_spins;
  std::vector<Eigen::Vector3d> window_means;
  int total_flows = 0;
  std::size_t begin = 0;

  for (std::int64_t wt = t0; wt <= t_end; wt += cfg.t_acc_us) {
    std::size_t end = begin;
    while (end < logo.events.size() && logo.events[end].t_us < wt + cfg.t_acc_us) ++end;
    std::span<const LogoEvent> window(logo.events.data() + begin, end - begin);
    begin = end;
    if (window.empty()) continue;

    double r_px = 0.0;
    try {
      r_px = ball_position_at(track, wt + cfg.t_acc_us / 2).r;
    } catch (const OutOfTrackRange&) {
      continue;
    }
    if (r_px <= 0.0) continue;

    std::vector<FlowVector> flows = plane_fit_flow(window, cfg);
    window_spins.clear();
    for (const FlowVector& f : flows) {
      if (auto spin = flow_to_spin(f, r_px, cfg)) window_spins.push_back(*spin);
    }
    if (static_cast<int>(window_spins.size()) < cfg.min_flows_per_window) continue;

    Eigen::Vector3d omega = aggregate(window_spins, cfg.use_median);
    series.windows.push_back(finalize(omega, static_cast<int>(window_spins.size()), wt,
                                      wt + cfg.t_acc_us));
    window_means.push_back(omega);
    total_flows += static_cast<int>(window_spins.size());
  }

  if (series.windows.empty()) {
    throw InsufficientFlow("no window reached " + std::to_string(cfg.min_flows_per_window) +
                           " valid flows");
  }
  Eigen::Vector3d collective = aggregate(window_means, cfg.use_median);
  series.mean = finalize(collective, total_flows, series.windows.front().t0_us,
                         series.windows.back().t1_us);
  return series;
}

double estimate_magnitude_event_rate(const LogoStream& logo, const EstimatorConfig& cfg) {
  if (cfg.rate_bin_us <= 0) throw ConfigError("rate bin must be > 0");
  if (logo.events.size() < 2) throw NoPeriodicity("too few logo events");

  const std::int64_t t0 = logo.events.front().t_us;
  const std::int64_t span = logo.events.back().t_us - t0;
  const std::size_t n_bins = static_cast<std::size_t>(span / cfg.rate_bin_us) + 1;
  std::vector<double> counts(n_bins, 0.0);
  for (const LogoEvent& e : logo.events) {
    counts[static_cast<std::size_t>((e.t_us - t0) / cfg.rate_bin_us)] += 1.0;
  }

  std::vector<double> ema(n_bins);
  ema[0] = counts[0];
  for (std::size_t i = 1; i < n_bins; ++i) {
    ema[i] = cfg.ema_alpha * counts[i] + (1.0 - cfg.ema_alpha) * ema[i - 1];
  }
  double mean = 0.0;
  for (double v : ema) mean += v;
  mean /= static_cast<double>(n_bins);
  for (double& v : ema) v -= mean;

  std::vector<double> smooth(n_bins);
  smooth[0] = ema[0];
  for (std::size_t i = 1; i < n_bins; ++i) {
    smooth[i] = cfg.smooth_alpha * ema[i] + (1.0 - cfg.smooth_alpha) * smooth[i - 1];
  }

  // Positive-to-negative sign transitions, located by linear interpolation
  // between bin centers. A transition only counts when its positive lobe
  // reached a fair share of the strongest lobe, which drops ripple
  // crossings riding on the noise floor.
  double global_peak = 0.0;
  for (double v : smooth) global_peak = std::max(global_peak, v);
  std::vector<double> crossings_us;
  double lobe_peak = 0.0;
  for (std::size_t i = 0; i + 1 < n_bins; ++i) {
    if (smooth[i] > 0.0) lobe_peak = std::max(lobe_peak, smooth[i]);
    if (smooth[i] > 0.0 && smooth[i + 1] <= 0.0) {
      if (lobe_peak >= 0.25 * global_peak) {
        double frac = smooth[i] / (smooth[i] - smooth[i + 1]);
        crossings_us.push_back((static_cast<double>(i) + 0.5 + frac) *
                               static_cast<double>(cfg.rate_bin_us));
      }
      lobe_peak = 0.0;
    }
  }
  if (crossings_us.size() < 2) {
    throw NoPeriodicity("found " + std::to_string(crossings_us.size()) +
                        " sign transitions, need at least 2");
  }

  // Weak lobes can vanish entirely, leaving multi-period gaps; normalize
  // each gap by the period count it spans before averaging.
  std::vector<double> gaps(crossings_us.size() - 1);
  for (std::size_t i = 0; i + 1 < crossings_us.size(); ++i) {
    gaps[i] = crossings_us[i + 1] - crossings_us[i];
  }
  std::vector<double> sorted = gaps;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  double median_gap = sorted[sorted.size() / 2];
  double total_us = 0.0;
  double periods = 0.0;
  for (double gap : gaps) {
    total_us += gap;
    periods += std::max(1.0, std::round(gap / median_gap));
  }
  return 1e6 / (total_us / periods);
}

SpinReport estimate_spin_report(const LogoStream& logo, const Track& track,
                                const EstimatorConfig& cfg, EstimateMode mode) {
  SpinReport report;
  report.mode = mode;
  EstimatorConfig local = cfg;

  if (mode == EstimateMode::kFast) {
    local.t_acc_us = choose_t_acc(cfg.expected_rps);
    report.series = estimate_spin_flow(logo, track, local);
    report.final = report.series.mean;
    return report;
  }

  report.event_rate_rps = estimate_magnitude_event_rate(logo, cfg);
  report.used_event_rate = true;
  local.t_acc_us = choose_t_acc(report.event_rate_rps);
  report.series = estimate_spin_flow(logo, track, local);

  // Event-rate magnitude, flow axis.
  report.final = report.series.mean;
  report.final.magnitude_rps = report.event_rate_rps;
  report.final.omega = report.final.axis * (report.event_rate_rps * kTwoPi);
  return report;
}

SpinEstimate estimate_spin(const LogoStream& logo, const Track& track,
                           const EstimatorConfig& cfg, EstimateMode mode) {
  return estimate_spin_report(logo, track, cfg, mode).final;
}

}  // namespace spinflow
