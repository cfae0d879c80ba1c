#pragma once

// Planar frame conventions and small value types shared by the whole stack.
//
// World frame: fixed inertial frame in the support plane. Body frame: attached
// to the pushed object at its center, x-axis along the side of length side_x.
// Angles in radians; poses keep theta wrapped to (-pi, pi].

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace pushmpc {

inline constexpr double kPi = 3.14159265358979323846;

/// Wraps an angle to (-pi, pi]. The +pi boundary maps to +pi, not -pi.
inline double wrap_angle(double theta) {
  double w = std::remainder(theta, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;  // remainder returns [-pi, pi]; fold -pi up
  return w;
}

/// Shifts `value` by multiples of `period` so it lands nearest `anchor`.
inline double unwrap_near(double value, double anchor, double period = 2.0 * kPi) {
  return value + period * std::round((anchor - value) / period);
}

struct PlanarPose {
  double x{0.0};
  double y{0.0};
  double theta{0.0};  // wrapped to (-pi, pi]

  PlanarPose() = default;
  PlanarPose(double x_, double y_, double theta_) : x(x_), y(y_), theta(wrap_angle(theta_)) {}

  Eigen::Vector2d position() const { return {x, y}; }
};

struct BodyTwist {
  double vx{0.0};
  double vy{0.0};
  double omega{0.0};

  Eigen::Vector3d vec() const { return {vx, vy, omega}; }
  static BodyTwist from_vec(const Eigen::Vector3d& v) { return {v[0], v[1], v[2]}; }
};

struct BodyWrench {
  double fx{0.0};
  double fy{0.0};
  double tau{0.0};

  Eigen::Vector3d vec() const { return {fx, fy, tau}; }
  static BodyWrench from_vec(const Eigen::Vector3d& v) { return {v[0], v[1], v[2]}; }
};

/// Contact force at the pushed edge, in body components: fn along the body
/// +x direction (pushing into the -x face), ft along body y.
struct ContactForce {
  double fn{0.0};
  double ft{0.0};

  Eigen::Vector2d vec() const { return {fn, ft}; }
  double norm() const { return std::hypot(fn, ft); }
};

/// 2x2 rotation by theta.
inline Eigen::Matrix2d rot2(double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

/// Planar rotation embedded in a 3x3 twist/wrench transform: the usual
/// cos/sin block with a trailing 1 for the angular component.
inline Eigen::Matrix3d rotation_matrix(double theta) {
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  r.topLeftCorner<2, 2>() = rot2(theta);
  return r;
}

inline BodyTwist twist_body_to_world(const BodyTwist& twist, double theta) {
  return BodyTwist::from_vec(rotation_matrix(theta) * twist.vec());
}

inline BodyTwist twist_world_to_body(const BodyTwist& twist, double theta) {
  return BodyTwist::from_vec(rotation_matrix(theta).transpose() * twist.vec());
}

}  // namespace pushmpc
