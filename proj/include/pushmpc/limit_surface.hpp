#pragma once

// Ellipsoidal limit surface for a rectangular slider on a flat support.
//
// The friction wrenches the ground contact can sustain are approximated by
// the ellipsoid H(f) = 1/2 f^T L f with semi-axes f_max (linear) and tau_max
// (angular). Under maximal dissipation the body twist is the gradient L f.

#include <cmath>
#include <stdexcept>

#include "pushmpc/planar.hpp"

namespace pushmpc {

struct ObjectParams {
  double mass{0.5};        // kg
  double side_x{0.1};      // m, side parallel to body x (the pushed depth)
  double side_y{0.1};      // m, side parallel to body y (the pushed face width)
  double mu_ground{0.2};   // object-support friction
  double mu_contact{0.2};  // pusher-object friction
  double gravity{9.81};    // m/s^2
  Eigen::Vector2d center_offset{0.0, 0.0};  // body origin minus geometric center

  void validate() const {
    if (!(mass > 0.0) || !(side_x > 0.0) || !(side_y > 0.0) || !(mu_ground > 0.0) ||
        !(mu_contact > 0.0) || !(gravity > 0.0)) {
      throw std::invalid_argument("ObjectParams: all physical parameters must be positive");
    }
  }

  double half_x() const { return 0.5 * side_x; }
  double half_y() const { return 0.5 * side_y; }
  double area() const { return side_x * side_y; }
};

namespace detail {

// Primitive F(a,b) = integral of sqrt(x^2+y^2) over [0,a]x[0,b], extended as
// an odd function of each argument so shifted rectangles decompose into
// signed corner terms.
inline double corner_norm_integral(double a, double b) {
  const double sa = a < 0.0 ? -1.0 : 1.0;
  const double sb = b < 0.0 ? -1.0 : 1.0;
  a = std::abs(a);
  b = std::abs(b);
  if (a < 1e-300 || b < 1e-300) return 0.0;
  const double r = std::hypot(a, b);
  const double val = a * b * r / 3.0 + (b * b * b / 6.0) * std::log((a + r) / b) +
                     (a * a * a / 6.0) * std::log((b + r) / a);
  return sa * sb * val;
}

}  // namespace detail

/// Closed-form integral of ||r|| over the rectangle [x0,x1]x[y0,y1].
inline double rectangle_norm_integral(double x0, double x1, double y0, double y1) {
  using detail::corner_norm_integral;
  return corner_norm_integral(x1, y1) - corner_norm_integral(x0, y1) -
         corner_norm_integral(x1, y0) + corner_norm_integral(x0, y0);
}

struct LimitSurface {
  double f_max{0.0};    // N
  double tau_max{0.0};  // N*m
  Eigen::Vector3d L_diag{0.0, 0.0, 0.0};  // diag of L = (f_max^-2, f_max^-2, tau_max^-2)

  Eigen::Matrix3d L() const { return L_diag.asDiagonal(); }
};

/// f_max = mu_g m g; tau_max = (mu_g m g / A) * integral of ||r|| over the
/// support rectangle (closed form), with the body origin offset from the
/// geometric center shifting the integration domain.
inline LimitSurface build_limit_surface(const ObjectParams& p) {
  p.validate();
  LimitSurface ls;
  ls.f_max = p.mu_ground * p.mass * p.gravity;
  const double ox = p.center_offset.x();
  const double oy = p.center_offset.y();
  const double integral =
      rectangle_norm_integral(-p.half_x() - ox, p.half_x() - ox, -p.half_y() - oy, p.half_y() - oy);
  ls.tau_max = ls.f_max / p.area() * integral;
  ls.L_diag = {1.0 / (ls.f_max * ls.f_max), 1.0 / (ls.f_max * ls.f_max),
               1.0 / (ls.tau_max * ls.tau_max)};
  return ls;
}

/// Motion map of the limit surface: body twist = L * body wrench.
inline BodyTwist wrench_to_twist(const LimitSurface& ls, const BodyWrench& wrench) {
  return BodyTwist::from_vec(ls.L_diag.cwiseProduct(wrench.vec()));
}

}  // namespace pushmpc
