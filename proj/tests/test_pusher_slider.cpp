#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "pushmpc/pusher_slider.hpp"

using namespace pushmpc;

namespace {

ObjectParams square_params() {
  ObjectParams p;
  p.mass = 0.5;
  p.side_x = 0.1;
  p.side_y = 0.1;
  p.mu_ground = 0.2;
  p.mu_contact = 0.2;
  p.gravity = 9.81;
  return p;
}

Eigen::Vector2d tip_on_edge(const ObjectState& s, const ObjectParams& p) {
  return s.pose.position() + rot2(s.pose.theta) * contact_point(s.phi, p);
}

// Independent re-derivation of the per-mode algebra: counts how many contact
// modes are consistent with an imposed tip velocity.
int count_consistent_modes(const ObjectState& s, const Eigen::Vector2d& v_tip_world,
                           const LimitSurface& ls, const ObjectParams& p) {
  const Eigen::Matrix2d R = rot2(s.pose.theta);
  const Eigen::Matrix<double, 2, 3> J = contact_jacobian(s.phi, p);
  const Eigen::Matrix2d G = J * ls.L_diag.asDiagonal() * J.transpose();
  const Eigen::Vector2d w = R.transpose() * v_tip_world;
  const double mu = p.mu_contact;
  const double a = p.half_x();
  const double cos2 = std::cos(s.phi) * std::cos(s.phi);
  int count = 0;

  const Eigen::Vector2d f_stick = G.inverse() * w;
  const bool stick_ok = f_stick.x() > 1e-9 && std::abs(f_stick.y()) < mu * f_stick.x() - 1e-9;
  if (stick_ok) ++count;

  for (double sgn : {1.0, -1.0}) {
    // Edge ft = sgn * mu * fn is consistent when the tip slips along the
    // drag direction of that edge.
    const Eigen::Vector2d edge(1.0, sgn * mu);
    const double fn = w.x() / (G * edge).x();
    const double ycdot = w.y() - (G * (fn * edge)).y();
    if (fn > 1e-9 && sgn * ycdot > 1e-9) ++count;
  }
  // Separation: the tip recedes from the edge, so zero force keeps the gap.
  if (w.x() < -1e-9) ++count;
  return count;
}

}  // namespace

TEST_CASE("contact_point examples") {
  const ObjectParams p = square_params();
  const Eigen::Vector2d c0 = contact_point(0.0, p);
  REQUIRE(c0.x() == Catch::Approx(-0.05));
  REQUIRE(c0.y() == Catch::Approx(0.0).margin(1e-15));

  const Eigen::Vector2d c1 = contact_point(std::atan(0.5), p);
  REQUIRE(c1.y() == Catch::Approx(-0.025).epsilon(1e-12));

  const Eigen::Vector2d c2 = contact_point(std::atan(p.side_y / p.side_x), p);
  REQUIRE(c2.x() == Catch::Approx(-p.side_x / 2));
  REQUIRE(c2.y() == Catch::Approx(-p.side_y / 2).epsilon(1e-12));

  // pi-periodic: the stock initial condition phi = pi is the centered contact.
  const Eigen::Vector2d cpi = contact_point(kPi, p);
  REQUIRE(cpi.y() == Catch::Approx(0.0).margin(1e-12));

  REQUIRE_THROWS_AS(contact_point(kPi / 2, p), std::domain_error);
}

TEST_CASE("contact_jacobian examples") {
  const ObjectParams p = square_params();
  const auto j = contact_jacobian(0.0, p);
  REQUIRE(j(0, 0) == 1.0);
  REQUIRE(j(0, 2) == Catch::Approx(0.0).margin(1e-15));
  REQUIRE(j(1, 2) == Catch::Approx(-0.05));

  const Eigen::Vector3d w_n = j.transpose() * Eigen::Vector2d(1.0, 0.0);
  REQUIRE(w_n.isApprox(Eigen::Vector3d(1.0, 0.0, 0.0), 1e-12));
  const Eigen::Vector3d w_t = j.transpose() * Eigen::Vector2d(0.0, 1.0);
  REQUIRE(w_t.isApprox(Eigen::Vector3d(0.0, 1.0, -0.05), 1e-12));
}

TEST_CASE("object_velocity examples") {
  const ObjectParams p = square_params();
  const LimitSurface ls = build_limit_surface(p);

  ObjectState s;
  s.pose = PlanarPose(0, 0, 0);
  s.phi = 0.0;

  const BodyTwist zero = object_velocity(s, {0.0, 0.0}, ls, p);
  REQUIRE(zero.vec().norm() == 0.0);

  const BodyTwist t = object_velocity(s, {1.0, 0.0}, ls, p);
  // L11 * 1 = 1 / f_max^2 (the chain J_c^T, L, R_b by hand at phi=0, theta=0)
  REQUIRE(t.vx == Catch::Approx(1.0391).epsilon(1e-4));
  REQUIRE(t.vy == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(t.omega == Catch::Approx(0.0).margin(1e-12));

  s.pose = PlanarPose(0, 0, kPi / 2);
  const BodyTwist tr = object_velocity(s, {1.0, 0.0}, ls, p);
  REQUIRE(tr.vx == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(tr.vy == Catch::Approx(1.0391).epsilon(1e-4));
}

TEST_CASE("classify_mode examples") {
  REQUIRE(classify_mode({1.0, 0.1}, 0.0, 0.2) == ContactMode::Sticking);
  // Sliding CCW (phi_dot > 0): the tip slips toward -y_c and drags the
  // object with ft = -mu fn; CW is symmetric.
  REQUIRE(classify_mode({1.0, -0.2}, 0.1, 0.2) == ContactMode::SlidingCCW);
  REQUIRE(classify_mode({1.0, 0.2}, -0.1, 0.2) == ContactMode::SlidingCW);
  REQUIRE(classify_mode({0.0, 0.0}, 0.0, 0.2) == ContactMode::Separated);
  // Slide rate with the force strictly inside the cone is inconsistent.
  REQUIRE_THROWS(classify_mode({1.0, 0.0}, 0.1, 0.2));
  // A slide rate paired with the opposite cone edge is inconsistent too.
  REQUIRE_THROWS(classify_mode({1.0, 0.2}, 0.1, 0.2));
}

TEST_CASE("oracle: no contact when the tip is away from the edge") {
  const ObjectParams p = square_params();
  const LimitSurface ls = build_limit_surface(p);
  ObjectState s;
  s.pose = PlanarPose(0.3, -0.2, 0.4);
  s.phi = kPi;

  const Eigen::Vector2d tip = tip_on_edge(s, p) - 0.01 * (rot2(s.pose.theta) * Eigen::Vector2d::UnitX());
  const auto res = oracle_step(s, tip, tip, 1e-3, ls, p);
  REQUIRE(res.mode == ContactMode::Separated);
  REQUIRE(res.force.fn == 0.0);
  REQUIRE(res.state.pose.x == s.pose.x);
  REQUIRE(res.state.pose.y == s.pose.y);
}

TEST_CASE("oracle: centered push sticks and translates along body x") {
  const ObjectParams p = square_params();
  const LimitSurface ls = build_limit_surface(p);
  ObjectState s;
  s.pose = PlanarPose(0, 0, 0);
  s.phi = kPi;  // centered contact

  const Eigen::Vector2d tip0 = tip_on_edge(s, p);
  const double dt = 1e-3;
  const Eigen::Vector2d v(0.05, 0.0);  // straight into the face
  const auto res = oracle_step(s, tip0 + dt * v, tip0, dt, ls, p);

  REQUIRE(res.mode == ContactMode::Sticking);
  REQUIRE(res.force.ft == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(res.force.fn > 0.0);
  REQUIRE(res.twist_world.vy == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(res.twist_world.omega == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(res.state.pose.x == Catch::Approx(dt * res.twist_world.vx));
}

TEST_CASE("oracle: strong tangential drive saturates the cone") {
  const ObjectParams p = square_params();
  const LimitSurface ls = build_limit_surface(p);
  ObjectState s;
  s.pose = PlanarPose(0, 0, 0);
  s.phi = kPi;

  const Eigen::Vector2d tip0 = tip_on_edge(s, p);
  const double dt = 1e-3;
  const Eigen::Vector2d v(0.02, 0.08);  // mostly sideways
  const auto res = oracle_step(s, tip0 + dt * v, tip0, dt, ls, p);

  REQUIRE((res.mode == ContactMode::SlidingCCW || res.mode == ContactMode::SlidingCW));
  REQUIRE(std::abs(std::abs(res.force.ft) - p.mu_contact * res.force.fn) < 1e-9);
  REQUIRE(res.force.fn >= 0.0);
  REQUIRE(classify_mode(res.force, res.phi_dot, p.mu_contact) == res.mode);
}

TEST_CASE("oracle: random samples are consistent and mode-exclusive") {
  const ObjectParams p = square_params();
  const LimitSurface ls = build_limit_surface(p);
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> upos(-0.5, 0.5);
  std::uniform_real_distribution<double> uang(-3.0, 3.0);
  std::uniform_real_distribution<double> uphi(-0.35, 0.35);
  std::uniform_real_distribution<double> uv(-0.1, 0.1);

  int contact_samples = 0;
  for (int i = 0; i < 10000; ++i) {
    ObjectState s;
    s.pose = PlanarPose(upos(rng), upos(rng), uang(rng));
    s.phi = kPi + uphi(rng);
    const Eigen::Vector2d tip0 = tip_on_edge(s, p);
    const Eigen::Vector2d v(uv(rng), uv(rng));
    const double dt = 1e-3;

    const auto res = oracle_step(s, tip0 + dt * v, tip0, dt, ls, p);

    // Unilaterality and cone respect always.
    REQUIRE(res.force.fn >= 0.0);
    REQUIRE(std::abs(res.force.ft) <= p.mu_contact * res.force.fn + 1e-9);

    if (res.mode != ContactMode::Separated) {
      ++contact_samples;
      // Quasi-static consistency with the limit-surface map.
      ObjectState at_phi = s;
      const BodyTwist tw = object_velocity(at_phi, res.force, ls, p);
      REQUIRE((tw.vec() - res.twist_world.vec()).lpNorm<Eigen::Infinity>() < 1e-9);
      // Mode classification agrees with the resolved pair.
      REQUIRE(classify_mode(res.force, res.phi_dot, p.mu_contact) == res.mode);
    }

    // Exclusivity: at most one strictly-consistent mode; zero only at the
    // boundary ties which the oracle breaks toward sticking.
    const int n = count_consistent_modes(s, v, ls, p);
    REQUIRE(n <= 1);
  }
  REQUIRE(contact_samples > 4000);
}

TEST_CASE("oracle: frame equivariance") {
  const ObjectParams p = square_params();
  const LimitSurface ls = build_limit_surface(p);
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  for (int i = 0; i < 300; ++i) {
    ObjectState s;
    s.pose = PlanarPose(u(rng), u(rng), u(rng));
    s.phi = kPi + 0.3 * u(rng);
    const Eigen::Vector2d tip0 = tip_on_edge(s, p);
    const Eigen::Vector2d v(0.05 * u(rng) + 0.03, 0.05 * u(rng));
    const double dt = 1e-3;
    const double gamma = 2.0 * u(rng);
    const Eigen::Matrix2d Rg = rot2(gamma);

    const auto res = oracle_step(s, tip0 + dt * v, tip0, dt, ls, p);

    ObjectState s2;
    s2.pose = PlanarPose((Rg * s.pose.position()).x(), (Rg * s.pose.position()).y(),
                         s.pose.theta + gamma);
    s2.phi = s.phi;
    const Eigen::Vector2d tip2 = Rg * tip0;
    const auto res2 = oracle_step(s2, tip2 + dt * (Rg * v), tip2, dt, ls, p);

    REQUIRE(res2.mode == res.mode);
    const Eigen::Vector2d d1 = res.state.pose.position() - s.pose.position();
    const Eigen::Vector2d d2 = res2.state.pose.position() - s2.pose.position();
    REQUIRE((d2 - Rg * d1).lpNorm<Eigen::Infinity>() < 1e-9);
    REQUIRE(std::abs(wrap_angle(res2.state.pose.theta - s2.pose.theta) -
                     wrap_angle(res.state.pose.theta - s.pose.theta)) < 1e-9);
  }
}

TEST_CASE("oracle: separation and re-contact without force impulse") {
  const ObjectParams p = square_params();
  const LimitSurface ls = build_limit_surface(p);
  ObjectState s;
  s.pose = PlanarPose(0, 0, 0);
  s.phi = kPi;

  const double dt = 1e-3;
  Eigen::Vector2d tip = tip_on_edge(s, p);
  // Retreat, then approach again.
  double max_first_contact_force = 0.0;
  Eigen::Vector2d v(-0.05, 0.0);
  bool was_separated = false;
  for (int k = 0; k < 400; ++k) {
    if (k == 100) v = Eigen::Vector2d(0.05, 0.0);
    const Eigen::Vector2d tip_new = tip + dt * v;
    const auto res = oracle_step(s, tip_new, tip, dt, ls, p);
    s = res.state;
    tip = tip_new;
    if (res.mode == ContactMode::Separated) was_separated = true;
    if (was_separated && res.mode != ContactMode::Separated) {
      max_first_contact_force = res.force.fn;
      break;
    }
  }
  REQUIRE(was_separated);
  // Re-contact force stays at the quasi-static scale of the approach speed,
  // far below any impulsive spike.
  REQUIRE(max_first_contact_force < 0.5);
}

TEST_CASE("oracle: penetration stays bounded over a long push") {
  const ObjectParams p = square_params();
  const LimitSurface ls = build_limit_surface(p);
  ObjectState s;
  s.pose = PlanarPose(0, 0, 0.3);
  s.phi = kPi + 0.1;

  const double dt = 1e-3;
  Eigen::Vector2d tip = tip_on_edge(s, p);
  const Eigen::Vector2d v = rot2(s.pose.theta) * Eigen::Vector2d(0.04, 0.01);
  double max_depth = 0.0;
  for (int k = 0; k < 2000; ++k) {
    const Eigen::Vector2d tip_new = tip + dt * v;
    const auto res = oracle_step(s, tip_new, tip, dt, ls, p);
    s = res.state;
    tip = tip_new;
    max_depth = std::max(max_depth, res.penetration);
  }
  REQUIRE(max_depth < 1e-6);
}
