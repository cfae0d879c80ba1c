#pragma once

// Compliant pushing model: a virtual spring between the impedance set-point
// and the contact point generates the pushing force, and the 8-dimensional
// augmented state [object pose, contact angle, body-frame set-point, body-
// frame contact force] evolves under the control input
// [phi_dot_plus, phi_dot_minus, force rate, complementarity slack].
//
// State layout:  x = [x_b, y_b, theta_b, phi_b, d_x, d_y, f_x, f_y]
// Input layout:  u = [phi_dot_plus, phi_dot_minus, fdot_x, fdot_y, eps]
//
// The auxiliary rates are named after the friction-cone edge they activate
// through the complementarity pairing: phi_dot_plus rides ft = +mu fn and
// phi_dot_minus rides ft = -mu fn. Coulomb drag moves the contact point along
// the slip direction of the pusher, and y_c decreases as phi grows, so the
// contact-angle rate reconstructs as phi_dot = phi_dot_minus - phi_dot_plus.

#include "pushmpc/pusher_slider.hpp"

namespace pushmpc {

using Vec8 = Eigen::Matrix<double, 8, 1>;
using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat8 = Eigen::Matrix<double, 8, 8>;
using Mat85 = Eigen::Matrix<double, 8, 5>;

struct StiffnessMatrix {
  double kx{300.0};  // N/m
  double ky{300.0};  // N/m

  StiffnessMatrix() = default;
  StiffnessMatrix(double kx_, double ky_) : kx(kx_), ky(ky_) {
    if (!(kx > 0.0) || !(ky > 0.0)) {
      throw std::invalid_argument("StiffnessMatrix: stiffness must be positive");
    }
  }

  Eigen::Vector2d diag() const { return {kx, ky}; }
  Eigen::Vector2d apply(const Eigen::Vector2d& v) const { return {kx * v.x(), ky * v.y()}; }
  Eigen::Vector2d solve(const Eigen::Vector2d& v) const { return {v.x() / kx, v.y() / ky}; }
};

struct AugmentedState {
  ObjectState object;
  Eigen::Vector2d setpoint_body{0.0, 0.0};  // x_d^b
  Eigen::Vector2d force_body{0.0, 0.0};     // f_c^b

  Vec8 vec() const {
    Vec8 x;
    x << object.pose.x, object.pose.y, object.pose.theta, object.phi, setpoint_body, force_body;
    return x;
  }
  static AugmentedState from_vec(const Vec8& x) {
    AugmentedState s;
    s.object.pose = PlanarPose(x[0], x[1], x[2]);
    s.object.phi = x[3];
    s.setpoint_body = x.segment<2>(4);
    s.force_body = x.segment<2>(6);
    return s;
  }
};

struct ControlInput {
  double phi_dot_plus{0.0};
  double phi_dot_minus{0.0};
  Eigen::Vector2d force_rate{0.0, 0.0};
  double slack{0.0};

  Vec5 vec() const {
    Vec5 u;
    u << phi_dot_plus, phi_dot_minus, force_rate, slack;
    return u;
  }
  static ControlInput from_vec(const Vec5& u) {
    return {u[0], u[1], u.segment<2>(2), u[4]};
  }
  double phi_dot() const { return phi_dot_minus - phi_dot_plus; }
};

/// Spring law: f_c^b = K (x_d^b - x_c^b(phi)).
inline Eigen::Vector2d spring_force(const Eigen::Vector2d& setpoint_body, double phi,
                                    const StiffnessMatrix& K, const ObjectParams& p) {
  return K.apply(setpoint_body - contact_point(phi, p));
}

/// Set-point velocity decomposition: K^-1 fdot (force dynamics) plus the
/// sliding contribution [0, -(l/2) phi_dot / cos^2 phi].
inline Eigen::Vector2d setpoint_velocity(const Eigen::Vector2d& force_rate, double phi,
                                         double phi_dot, const StiffnessMatrix& K,
                                         const ObjectParams& p) {
  check_phi(phi);
  const double c = std::cos(phi);
  Eigen::Vector2d v = K.solve(force_rate);
  v.y() += -p.half_x() * phi_dot / (c * c);
  return v;
}

/// Time derivative of the augmented state.
inline Vec8 augmented_dynamics(const Vec8& x, const Vec5& u, const LimitSurface& ls,
                               const StiffnessMatrix& K, const ObjectParams& p) {
  const double theta = x[2], phi = x[3];
  check_phi(phi);
  const double a = p.half_x();
  const double t = std::tan(phi);
  const Eigen::Vector2d f = x.segment<2>(6);
  const double phi_dot = u[1] - u[0];
  const Eigen::Vector2d fdot = u.segment<2>(2);

  // Body wrench through the contact Jacobian, then the limit-surface map.
  const Eigen::Vector3d wrench(f.x(), f.y(), a * t * f.x() - a * f.y());
  const Eigen::Vector3d tw = ls.L_diag.cwiseProduct(wrench);

  Vec8 dx;
  dx.segment<2>(0) = rot2(theta) * tw.head<2>();
  dx[2] = tw[2];
  dx[3] = phi_dot;
  dx.segment<2>(4) = setpoint_velocity(fdot, phi, phi_dot, K, p);
  dx.segment<2>(6) = fdot;
  return dx;
}

/// Analytic Jacobians of augmented_dynamics w.r.t. state and input.
inline void dynamics_jacobians(const Vec8& x, const Vec5& u, const LimitSurface& ls,
                               const StiffnessMatrix& K, const ObjectParams& p, Mat8& A,
                               Mat85& B) {
  const double theta = x[2], phi = x[3];
  check_phi(phi);
  const double a = p.half_x();
  const double c = std::cos(phi);
  const double t = std::tan(phi);
  const double sec2 = 1.0 / (c * c);
  const Eigen::Vector2d f = x.segment<2>(6);
  const double phi_dot = u[1] - u[0];
  const double L1 = ls.L_diag[0], L3 = ls.L_diag[2];

  const Eigen::Matrix2d R = rot2(theta);
  Eigen::Matrix2d S;
  S << 0.0, -1.0, 1.0, 0.0;
  const Eigen::Vector2d v_lin(L1 * f.x(), L1 * f.y());

  A.setZero();
  B.setZero();

  // d(world linear velocity)/d theta = S R v_lin
  A.block<2, 1>(0, 2) = S * R * v_lin;
  // d(world linear velocity)/d f = R * L1
  A.block<2, 2>(0, 6) = L1 * R;
  // theta_dot = L3 a (t f_x - f_y)
  A(2, 3) = L3 * a * sec2 * f.x();
  A(2, 6) = L3 * a * t;
  A(2, 7) = -L3 * a;
  // setpoint y rate: -(a phi_dot) sec^2;  d/dphi = -a phi_dot * 2 t sec^2
  A(5, 3) = -2.0 * a * phi_dot * t * sec2;

  B(3, 0) = -1.0;
  B(3, 1) = 1.0;
  B(4, 2) = 1.0 / K.kx;
  B(5, 3) = 1.0 / K.ky;
  B(5, 0) = a * sec2;
  B(5, 1) = -a * sec2;
  B(6, 2) = 1.0;
  B(7, 3) = 1.0;
}

/// One explicit RK4 step of the augmented dynamics.
inline Vec8 rk4_step(const Vec8& x, const Vec5& u, double h, const LimitSurface& ls,
                     const StiffnessMatrix& K, const ObjectParams& p) {
  const Vec8 k1 = augmented_dynamics(x, u, ls, K, p);
  const Vec8 k2 = augmented_dynamics(x + 0.5 * h * k1, u, ls, K, p);
  const Vec8 k3 = augmented_dynamics(x + 0.5 * h * k2, u, ls, K, p);
  const Vec8 k4 = augmented_dynamics(x + h * k3, u, ls, K, p);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// RK4 step together with discrete sensitivities d(x+)/dx and d(x+)/du,
/// chained from the analytic continuous Jacobians.
inline Vec8 rk4_step_with_sensitivities(const Vec8& x, const Vec5& u, double h,
                                        const LimitSurface& ls, const StiffnessMatrix& K,
                                        const ObjectParams& p, Mat8& Ad, Mat85& Bd) {
  Mat8 A1, A2, A3, A4;
  Mat85 B1, B2, B3, B4;

  const Vec8 k1 = augmented_dynamics(x, u, ls, K, p);
  dynamics_jacobians(x, u, ls, K, p, A1, B1);
  const Vec8 x2 = x + 0.5 * h * k1;
  const Vec8 k2 = augmented_dynamics(x2, u, ls, K, p);
  dynamics_jacobians(x2, u, ls, K, p, A2, B2);
  const Vec8 x3 = x + 0.5 * h * k2;
  const Vec8 k3 = augmented_dynamics(x3, u, ls, K, p);
  dynamics_jacobians(x3, u, ls, K, p, A3, B3);
  const Vec8 x4 = x + h * k3;
  const Vec8 k4 = augmented_dynamics(x4, u, ls, K, p);
  dynamics_jacobians(x4, u, ls, K, p, A4, B4);

  // dk_i/dx and dk_i/du chains.
  const Mat8 K1x = A1;
  const Mat85 K1u = B1;
  const Mat8 K2x = A2 * (Mat8::Identity() + 0.5 * h * K1x);
  const Mat85 K2u = B2 + 0.5 * h * A2 * K1u;
  const Mat8 K3x = A3 * (Mat8::Identity() + 0.5 * h * K2x);
  const Mat85 K3u = B3 + 0.5 * h * A3 * K2u;
  const Mat8 K4x = A4 * (Mat8::Identity() + h * K3x);
  const Mat85 K4u = B4 + h * A4 * K3u;

  Ad = Mat8::Identity() + (h / 6.0) * (K1x + 2.0 * K2x + 2.0 * K3x + K4x);
  Bd = (h / 6.0) * (K1u + 2.0 * K2u + 2.0 * K3u + K4u);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace pushmpc
