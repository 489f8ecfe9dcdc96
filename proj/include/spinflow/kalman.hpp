#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace spinflow {

using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat5 = Eigen::Matrix<double, 5, 5>;

// State [x_b, y_b, xdot_b, ydot_b, r]: pixels, pixels/s, pixels.
struct KalmanState {
  Vec5 x = Vec5::Zero();
  Mat5 P = Mat5::Identity();
};

struct KalmanConfig {
  // Process noise added per predict call (per tracker tick).
  Vec5 q_diag{(Vec5() << 1.0, 1.0, 1e4, 1e4, 0.1).finished()};
  // Measurement noise for [cx, cy, r].
  Eigen::Vector3d r_diag{0.25, 0.25, 1.0};
  double p0_pos = 4.0;
  double p0_vel = 1e6;  // high so velocity converges from position-only measurements
  double p0_radius = 4.0;
  double gate_sigma = 5.0;  // Mahalanobis gate, in sigmas
};

// Constant-velocity transition: positions advance by dt * velocity, velocity
// and radius carry over.
Eigen::Matrix<double, 5, 5> transition_matrix(double dt_s);

// Maps state to the Hough measurement [x_b, y_b, r].
Eigen::Matrix<double, 3, 5> observation_matrix();

KalmanState kf_init(const Eigen::Vector3d& z, const Eigen::Vector2d& velocity,
                    const KalmanConfig& cfg);

KalmanState kf_predict(const KalmanState& state, double dt_s, const KalmanConfig& cfg);

struct KfUpdateResult {
  KalmanState state;
  bool accepted = false;
  double mahalanobis = 0.0;
};

// Gated measurement update; on gate rejection the state is returned unchanged.
KfUpdateResult kf_update(const KalmanState& state, const Eigen::Vector3d& z,
                         const KalmanConfig& cfg);

}  // namespace spinflow
