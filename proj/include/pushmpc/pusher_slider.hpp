#pragma once

// Hybrid quasi-static pusher-slider model.
//
// The pusher touches the object face at x^b = -side_x/2. The contact point is
// parametrized by the angle phi via x_c^b = [-l/2, -(l/2) tan(phi)]; tan and
// cos^2 are pi-periodic so phi may live on any branch (the stock initial
// condition uses phi = pi).
//
// Contact modes: sticking (phi_dot = 0, force inside the friction cone) and
// two sliding modes pinned to the cone edges. Coulomb drag acts on the object
// along the pusher's slip direction, and y_c = -(l/2) tan(phi) decreases as
// phi grows, so sliding CCW (phi_dot > 0, tip slipping toward -y_c) carries
// ft = -mu fn and sliding CW carries ft = +mu fn. A Separated mode covers
// contact loss.
//
// oracle_step resolves the hybrid model for a position-driven pusher tip by
// brute-force mode enumeration. The force is derived from the kinematic
// constraint that the tip stays on the edge, an independent path from the
// controller's spring model.

#include <array>
#include <optional>
#include <stdexcept>

#include "pushmpc/limit_surface.hpp"
#include "pushmpc/planar.hpp"

namespace pushmpc {

struct ObjectState {
  PlanarPose pose;
  double phi{kPi};  // contact angle, unwrapped (pi-periodic in the model)
};

enum class ContactMode { Sticking, SlidingCCW, SlidingCW, Separated };

inline const char* to_string(ContactMode m) {
  switch (m) {
    case ContactMode::Sticking: return "sticking";
    case ContactMode::SlidingCCW: return "sliding_ccw";
    case ContactMode::SlidingCW: return "sliding_cw";
    case ContactMode::Separated: return "separated";
  }
  return "?";
}

class NoConsistentMode : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void check_phi(double phi) {
  if (std::abs(std::cos(phi)) < 1e-9) {
    throw std::domain_error("contact angle at tangent singularity (|cos phi| < 1e-9)");
  }
}

/// Contact point in body frame: [-l/2, -(l/2) tan(phi)].
inline Eigen::Vector2d contact_point(double phi, const ObjectParams& p) {
  check_phi(phi);
  const double a = p.half_x();
  return {-a, -a * std::tan(phi)};
}

/// J_c maps the body twist to the contact-point velocity; its transpose maps
/// the contact force to the body wrench.
inline Eigen::Matrix<double, 2, 3> contact_jacobian(double phi, const ObjectParams& p) {
  const Eigen::Vector2d xc = contact_point(phi, p);
  Eigen::Matrix<double, 2, 3> j;
  j << 1.0, 0.0, -xc.y(), 0.0, 1.0, xc.x();
  return j;
}

/// World-frame object twist produced by a contact force: R(theta) L J_c^T f.
inline BodyTwist object_velocity(const ObjectState& state, const ContactForce& force,
                                 const LimitSurface& ls, const ObjectParams& p) {
  const Eigen::Matrix<double, 2, 3> j = contact_jacobian(state.phi, p);
  const Eigen::Vector3d wrench = j.transpose() * force.vec();
  const Eigen::Vector3d body_twist = ls.L_diag.cwiseProduct(wrench);
  return BodyTwist::from_vec(rotation_matrix(state.pose.theta) * body_twist);
}

struct ModeTolerances {
  double force{1e-9};  // N
  double rate{1e-9};   // rad/s
};

/// Classifies the contact mode of a resolved (force, phi_dot) pair.
/// Throws if the pair is inconsistent with every mode (e.g. sliding rate with
/// a force strictly inside the friction cone).
inline ContactMode classify_mode(const ContactForce& force, double phi_dot, double mu_contact,
                                 const ModeTolerances& tol = {}) {
  if (force.fn <= tol.force) return ContactMode::Separated;
  const double cone = mu_contact * force.fn;
  if (std::abs(phi_dot) <= tol.rate) {
    if (std::abs(force.ft) <= cone + tol.force) return ContactMode::Sticking;
    throw std::runtime_error("classify_mode: force outside friction cone with zero slide rate");
  }
  if (phi_dot > tol.rate) {
    if (std::abs(force.ft + cone) <= tol.force) return ContactMode::SlidingCCW;
  } else {
    if (std::abs(force.ft - cone) <= tol.force) return ContactMode::SlidingCW;
  }
  throw std::runtime_error("classify_mode: slide rate inconsistent with the drag edge");
}

struct OracleResult {
  ObjectState state;
  ContactForce force;
  ContactMode mode{ContactMode::Separated};
  BodyTwist twist_world;   // resolved object twist (world frame)
  double phi_dot{0.0};     // resolved contact-angle rate
  double penetration{0.0}; // tip depth past the edge plane before the step
};

struct OracleOptions {
  double baumgarte{1.0};       // fraction of penetration removed per step
  double contact_gap{1e-12};   // tip depth below which contact is released
  double force_tol{1e-9};
  double rate_tol{1e-9};
  Eigen::Vector3d external_wrench{0.0, 0.0, 0.0};  // extra body wrench on the object
};

namespace detail {

inline double phi_from_edge_offset(double yc, double half_x, double phi_anchor) {
  const double raw = std::atan(-yc / half_x);  // branch in (-pi/2, pi/2)
  return unwrap_near(raw, phi_anchor, kPi);
}

}  // namespace detail

/// Advances the object one step under an imposed pusher-tip displacement.
///
/// Enumerates sticking / sliding CCW / sliding CW / separated, solves each
/// mode's algebraic conditions for (f_c, phi_dot) against the tip velocity,
/// keeps the unique consistent mode (ties at the cone boundary prefer
/// sticking), and integrates the pose with explicit Euler. The new phi is
/// recovered from the actual tip-edge geometry, which keeps the tip exactly
/// on the edge across steps.
inline OracleResult oracle_step(const ObjectState& state, const Eigen::Vector2d& tip,
                                const Eigen::Vector2d& tip_prev, double dt,
                                const LimitSurface& ls, const ObjectParams& p,
                                const OracleOptions& opt = {}) {
  if (!(dt > 0.0)) throw std::invalid_argument("oracle_step: dt must be positive");
  const double a = p.half_x();
  const Eigen::Matrix2d R = rot2(state.pose.theta);
  const Eigen::Vector2d center = state.pose.position();
  const Eigen::Vector2d rel = R.transpose() * (tip_prev - center);
  const Eigen::Vector2d v_tip_body = R.transpose() * (tip - tip_prev) / dt;
  const double depth = rel.x() + a;                    // tip depth at step start
  const double depth_end = depth + dt * v_tip_body.x();  // if the object stayed put

  OracleResult out;
  out.state = state;
  out.penetration = std::max(depth, 0.0);
  const Eigen::Vector3d ext = opt.external_wrench;
  const bool has_ext = ext.squaredNorm() > 0.0;

  auto integrate_free = [&]() {
    if (has_ext) {
      const Eigen::Vector3d tw = ls.L_diag.cwiseProduct(ext);
      out.twist_world = BodyTwist::from_vec(rotation_matrix(state.pose.theta) * tw);
      out.state.pose = PlanarPose(center.x() + dt * out.twist_world.vx,
                                  center.y() + dt * out.twist_world.vy,
                                  state.pose.theta + dt * out.twist_world.omega);
    }
  };

  if (depth_end < -opt.contact_gap || std::abs(rel.y()) > p.half_y() + 0.5 * p.side_y) {
    out.mode = ContactMode::Separated;
    integrate_free();
    return out;
  }
  if (depth > 0.1 * p.side_x) {
    throw NoConsistentMode("oracle_step: tip penetration exceeds side_x/10 sanity bound");
  }

  // Contact geometry at step start; phi clamped at the face corners.
  const double yc = std::min(std::max(rel.y(), -p.half_y()), p.half_y());
  const double phi = detail::phi_from_edge_offset(yc, a, state.phi);
  const double cos2 = std::cos(phi) * std::cos(phi);
  const Eigen::Matrix<double, 2, 3> J = contact_jacobian(phi, p);
  const Eigen::Matrix2d G = J * ls.L_diag.asDiagonal() * J.transpose();

  // The normal row carries a stabilization term that lands the tip exactly on
  // the edge at step end (it is negative while the tip is still approaching).
  Eigen::Vector2d w = v_tip_body;
  w.x() += opt.baumgarte * depth / dt;
  // External wrench contribution to the contact-point material velocity.
  const Eigen::Vector2d bias = J * ls.L_diag.cwiseProduct(ext);

  const double mu = p.mu_contact;
  struct Candidate {
    ContactMode mode;
    Eigen::Vector2d f;
    double phi_dot;
    bool ok;
  };
  std::array<Candidate, 3> cands;

  // Sticking: contact material point moves with the tip.
  {
    const Eigen::Vector2d f = G.ldlt().solve(w - bias);
    const bool ok = f.x() >= -opt.force_tol &&
                    std::abs(f.y()) <= mu * f.x() + opt.force_tol;
    cands[0] = {ContactMode::Sticking, f, 0.0, ok};
  }
  // Sliding: force pinned to a cone edge, tip slipping along the drag
  // direction of that edge (ft = +mu fn drags +y, so the tip slips +y there).
  auto sliding = [&](double sign) {
    const Eigen::Vector2d edge(1.0, sign * mu);
    const double denom = (G * edge).x();
    Candidate c{sign > 0 ? ContactMode::SlidingCW : ContactMode::SlidingCCW,
                Eigen::Vector2d::Zero(), 0.0, false};
    if (denom > 1e-12) {
      const double fn = (w.x() - bias.x()) / denom;
      c.f = fn * edge;
      const double yc_dot = v_tip_body.y() - (G * c.f + bias).y();
      c.phi_dot = -yc_dot * cos2 / a;
      c.ok = fn >= -opt.force_tol && -sign * c.phi_dot > opt.rate_tol;
    }
    return c;
  };
  cands[1] = sliding(+1.0);  // CW:  ft = +mu fn, tip slipping +y_c
  cands[2] = sliding(-1.0);  // CCW: ft = -mu fn, tip slipping -y_c

  const Candidate* chosen = nullptr;
  for (const auto& c : cands) {
    if (c.ok) {
      chosen = &c;
      break;  // order encodes the sticking-first tie-break
    }
  }
  if (chosen == nullptr) {
    // All contact modes need a pulling force: the tip is receding.
    const Eigen::Vector2d f_stick = G.ldlt().solve(w - bias);
    if (f_stick.x() < opt.force_tol) {
      out.mode = ContactMode::Separated;
      integrate_free();
      return out;
    }
    throw NoConsistentMode("oracle_step: no contact mode satisfies its inequality conditions");
  }

  out.mode = chosen->mode;
  out.force = ContactForce{std::max(chosen->f.x(), 0.0), chosen->f.y()};
  out.phi_dot = chosen->phi_dot;

  const Eigen::Vector3d wrench = J.transpose() * chosen->f + ext;
  const Eigen::Vector3d body_twist = ls.L_diag.cwiseProduct(wrench);
  out.twist_world = BodyTwist::from_vec(rotation_matrix(state.pose.theta) * body_twist);

  const Eigen::Vector2d new_center = center + dt * Eigen::Vector2d(out.twist_world.vx, out.twist_world.vy);
  const double new_theta = state.pose.theta + dt * out.twist_world.omega;
  out.state.pose = PlanarPose(new_center.x(), new_center.y(), new_theta);

  // Recover phi from the actual tip-edge geometry after the step.
  const Eigen::Vector2d rel_new = rot2(new_theta).transpose() * (tip - new_center);
  const double yc_new = std::min(std::max(rel_new.y(), -p.half_y()), p.half_y());
  out.state.phi = detail::phi_from_edge_offset(yc_new, a, phi);
  return out;
}

}  // namespace pushmpc
