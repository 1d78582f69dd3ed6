#pragma once

// Fixed-lag estimation and one-step prediction of a planar constant-velocity
// object under a white-noise-acceleration prior.

#include <span>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>

#include "mnbv/common.hpp"

namespace mnbv {

struct ObjectState {
  Vec2 position = Vec2::Zero();
  Vec2 velocity = Vec2::Zero();

  Vec4 stacked() const { return (Vec4() << position, velocity).finished(); }
};

struct PositionMeasurement {
  Vec2 value = Vec2::Zero();
  double timestamp = 0.0;
};

/// Gaussian over [px, py, vx, vy].
struct Belief {
  Vec4 mean = Vec4::Zero();
  Mat4 covariance = Mat4::Zero();
  double timestamp = 0.0;

  Vec2 position() const { return mean.head<2>(); }
  Vec2 velocity() const { return mean.tail<2>(); }
  Mat2 position_covariance() const { return covariance.topLeftCorner<2, 2>(); }
  Mat2 velocity_covariance() const { return covariance.bottomRightCorner<2, 2>(); }
};

struct SmootherConfig {
  int window_length = 8;
  double process_psd = 0.01;           // q_c, (m/s^2)^2 s per axis
  double measurement_variance = 0.01;  // sigma^2, m^2
  double anchor_variance = 1e4;        // weak prior on the oldest window state

  void validate() const {
    if (window_length < 2) throw InvalidArgument("window_length must be >= 2");
    if (!(process_psd > 0.0)) throw InvalidArgument("process_psd must be > 0");
    if (!(measurement_variance > 0.0)) throw InvalidArgument("measurement_variance must be > 0");
    if (!(anchor_variance > 0.0)) throw InvalidArgument("anchor_variance must be > 0");
  }
};

struct Transition {
  Mat4 phi;
  Mat4 q;
};

/// State transition and process noise of the white-noise-acceleration prior
/// over an interval dt.
inline Transition build_transition(double dt, double q_c) {
  if (!(dt >= 0.0)) throw InvalidArgument("build_transition: dt must be >= 0");
  if (q_c < 0.0) throw InvalidArgument("build_transition: q_c must be >= 0");
  const Mat2 I = Mat2::Identity();
  Transition t;
  t.phi.setIdentity();
  t.phi.topRightCorner<2, 2>() = dt * I;
  t.q.topLeftCorner<2, 2>() = (dt * dt * dt / 3.0) * q_c * I;
  t.q.topRightCorner<2, 2>() = (dt * dt / 2.0) * q_c * I;
  t.q.bottomLeftCorner<2, 2>() = (dt * dt / 2.0) * q_c * I;
  t.q.bottomRightCorner<2, 2>() = dt * q_c * I;
  return t;
}

/**
 * Fixed-lag MAP estimate of the newest state in the window.
 *
 * The factor graph is a chain: a weak anchor on the oldest state (centered on
 * its measured position, zero velocity), one position factor per state and a
 * motion factor between consecutive states. The normal equations are block
 * tridiagonal; eliminating states oldest-first leaves the marginal information
 * of the newest state, which is inverted for the returned covariance.
 */
inline Belief smooth(std::span<const PositionMeasurement> window, const SmootherConfig& config) {
  config.validate();
  if (window.size() < 2) throw InsufficientData("smooth: need at least 2 measurements");
  if (window.size() > static_cast<std::size_t>(config.window_length))
    throw InvalidArgument("smooth: window longer than window_length");
  for (std::size_t j = 0; j < window.size(); ++j) {
    if (!window[j].value.allFinite() || !std::isfinite(window[j].timestamp))
      throw InvalidArgument("smooth: non-finite measurement");
    if (j > 0 && !(window[j].timestamp > window[j - 1].timestamp))
      throw InvalidArgument("smooth: timestamps must be strictly increasing");
  }

  Eigen::Matrix<double, 2, 4> H = Eigen::Matrix<double, 2, 4>::Zero();
  H.leftCols<2>().setIdentity();
  const double r_inv = 1.0 / config.measurement_variance;
  const Mat4 meas_info = r_inv * H.transpose() * H;

  // Running Schur complement (D) and reduced information vector (e) of the
  // current state after eliminating all older states.
  Mat4 D = Mat4::Identity() / config.anchor_variance + meas_info;
  Vec4 anchor_mean = Vec4::Zero();
  anchor_mean.head<2>() = window[0].value;
  Vec4 e = anchor_mean / config.anchor_variance + r_inv * H.transpose() * window[0].value;

  for (std::size_t j = 1; j < window.size(); ++j) {
    const Transition tr = build_transition(window[j].timestamp - window[j - 1].timestamp,
                                           config.process_psd);
    const Mat4 W = tr.q.inverse();
    const Mat4 prev_diag = D + tr.phi.transpose() * W * tr.phi;
    const Mat4 off = -tr.phi.transpose() * W;  // block (j-1, j)
    Eigen::LDLT<Mat4> prev(prev_diag);
    D = W + meas_info - off.transpose() * prev.solve(off);
    e = r_inv * H.transpose() * window[j].value - off.transpose() * prev.solve(e);
  }

  Belief out;
  Eigen::LDLT<Mat4> last(D);
  out.covariance = last.solve(Mat4::Identity());
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
  out.mean = out.covariance * e;
  out.timestamp = window.back().timestamp;
  return out;
}

inline Belief predict(const Belief& belief, double dt, double q_c) {
  const Transition tr = build_transition(dt, q_c);
  Belief out;
  out.mean = tr.phi * belief.mean;
  out.covariance = tr.phi * belief.covariance * tr.phi.transpose() + tr.q;
  out.timestamp = belief.timestamp + dt;
  return out;
}

/// Heading of the mean velocity, or previous_heading when the mean speed does
/// not exceed speed_threshold.
inline double nominal_heading(const Vec2& velocity, double previous_heading, double speed_threshold) {
  if (velocity.norm() > speed_threshold) return wrap_angle(std::atan2(velocity.y(), velocity.x()));
  return wrap_angle(previous_heading);
}

inline double nominal_heading(const Belief& belief, double previous_heading, double speed_threshold) {
  return nominal_heading(belief.velocity(), previous_heading, speed_threshold);
}

}  // namespace mnbv
