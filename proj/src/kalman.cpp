#include "spinflow/kalman.hpp"

namespace spinflow {

Eigen::Matrix<double, 5, 5> transition_matrix(double dt_s) {
  Mat5 f = Mat5::Identity();
  f(0, 2) = dt_s;
  f(1, 3) = dt_s;
  return f;
}

Eigen::Matrix<double, 3, 5> observation_matrix() {
  Eigen::Matrix<double, 3, 5> h = Eigen::Matrix<double, 3, 5>::Zero();
  h(0, 0) = 1.0;
  h(1, 1) = 1.0;
  h(2, 4) = 1.0;
  return h;
}

KalmanState kf_init(const Eigen::Vector3d& z, const Eigen::Vector2d& velocity,
                    const KalmanConfig& cfg) {
  KalmanState s;
  s.x << z(0), z(1), velocity(0), velocity(1), z(2);
  s.P = Mat5::Zero();
  s.P(0, 0) = cfg.p0_pos;
  s.P(1, 1) = cfg.p0_pos;
  s.P(2, 2) = cfg.p0_vel;
  s.P(3, 3) = cfg.p0_vel;
  s.P(4, 4) = cfg.p0_radius;
  return s;
}

KalmanState kf_predict(const KalmanState& state, double dt_s, const KalmanConfig& cfg) {
  Mat5 f = transition_matrix(dt_s);
  KalmanState out;
  out.x = f * state.x;
  out.P = f * state.P * f.transpose();
  out.P.diagonal() += cfg.q_diag;
  out.P = 0.5 * (out.P + out.P.transpose().eval());
  return out;
}

KfUpdateResult kf_update(const KalmanState& state, const Eigen::Vector3d& z,
                         const KalmanConfig& cfg) {
  const Eigen::Matrix<double, 3, 5> h = observation_matrix();
  Eigen::Vector3d innovation = z - h * state.x;
  Eigen::Matrix3d s_mat = h * state.P * h.transpose();
  s_mat.diagonal() += cfg.r_diag;

  Eigen::LLT<Eigen::Matrix3d> llt(s_mat);
  double d2 = innovation.dot(llt.solve(innovation));
  double d = std::sqrt(std::max(d2, 0.0));

  KfUpdateResult result;
  result.mahalanobis = d;
  if (d > cfg.gate_sigma) {
    result.state = state;
    result.accepted = false;
    return result;
  }

  Eigen::Matrix<double, 5, 3> k = state.P * h.transpose() * llt.solve(Eigen::Matrix3d::Identity());
  result.state.x = state.x + k * innovation;
  // Joseph form keeps P symmetric PSD under roundoff.
  Mat5 ikh = Mat5::Identity() - k * h;
  result.state.P = ikh * state.P * ikh.transpose() + k * cfg.r_diag.asDiagonal() * k.transpose();
  result.state.P = 0.5 * (result.state.P + result.state.P.transpose().eval());
  result.accepted = true;
  return result;
}

}  // namespace spinflow
