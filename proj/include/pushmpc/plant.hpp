#pragma once

// Simulated plant: a planar Cartesian-impedance flange pushing the object
// through a spherical-tipped tool.
//
// The flange follows mass-spring-damper dynamics around the filtered
// set-point. Contact with the object edge is resolved by the pusher-slider
// oracle with the tool tip (flange offset by the tool radius along the
// contact normal) imposed kinematically; the object's quasi-static motion and
// the transmitted force come out of the mode enumeration. A BlockingWall
// disturbance freezes the object when its next step would cross the wall
// plane, in which case the flange is resolved against the frozen edge and the
// implied wall wrench is reported. Integration is explicit position-first
// Euler at the plant rate, which keeps the alpha = 0 set-point freeze exact.

#include <optional>

#include "pushmpc/pusher_slider.hpp"
#include "pushmpc/tank.hpp"

namespace pushmpc {

struct ImpedanceParams {
  Eigen::Vector2d apparent_mass{2.0, 2.0};  // kg
  Eigen::Vector2d stiffness{300.0, 300.0};  // N/m, upper block of K_d
  Eigen::Vector2d damping{50.0, 50.0};      // N s/m, upper block of D_d

  void validate() const {
    if ((apparent_mass.array() <= 0.0).any() || (stiffness.array() <= 0.0).any() ||
        (damping.array() <= 0.0).any()) {
      throw std::invalid_argument("ImpedanceParams: diagonal entries must be positive");
    }
  }
};

struct PlantState {
  Eigen::Vector2d flange_pos{0.0, 0.0};
  Eigen::Vector2d flange_vel{0.0, 0.0};
  double tool_radius{0.01};
  ContactMode contact{ContactMode::Separated};
  ContactForce last_contact_force{};
  bool wall_latched{false};  // pressed against an active blocking wall
};

struct WallPlane {
  Eigen::Vector2d point{0.0, 0.0};   // a point on the wall
  Eigen::Vector2d normal{1.0, 0.0};  // unit; motion along +normal is blocked
};

struct DisturbanceSpec {
  enum class Kind { None, BlockingWall, ScheduledWrench };
  Kind kind{Kind::None};
  double start_s{0.0};
  double end_s{0.0};
  double wall_gap{0.015};        // wall spawns this far ahead of the object
  Eigen::Vector2d wrench_force{0.0, 0.0};  // world force for ScheduledWrench

  void validate() const {
    if (kind != Kind::None && !(start_s < end_s)) {
      throw std::invalid_argument("DisturbanceSpec: start_s < end_s required");
    }
  }
};

/// Planar contact force (world) lifted to the 6D flange wrench:
/// force rows plus the torque p_ec x (f, 0).
inline Vec6 lift_wrench(const Eigen::Vector2d& f_c_world, const Eigen::Vector3d& p_ec) {
  Vec6 w = Vec6::Zero();
  w[0] = f_c_world.x();
  w[1] = f_c_world.y();
  const Eigen::Vector3d f3(f_c_world.x(), f_c_world.y(), 0.0);
  w.tail<3>() = p_ec.cross(f3);
  return w;
}

struct PlantStepResult {
  ContactForce force_body;                    // resolved contact force, body frame
  Eigen::Vector2d f_e_world{0.0, 0.0};        // transmitted force on the object, world
  Eigen::Vector2d f_h_wall_world{0.0, 0.0};   // implied wall counter-force on the object
  Eigen::Vector2d err_disp{0.0, 0.0};         // set-point-minus-flange displacement this tick
  ContactMode mode{ContactMode::Separated};
  bool wall_blocked{false};
};


/// Reports contact loss from geometry and the last resolved normal force.
inline ContactMode contact_loss_guard(const PlantState& plant, const ObjectState& object,
                                      const ObjectParams& p) {
  const Eigen::Vector2d n_hat = rot2(object.pose.theta) * Eigen::Vector2d::UnitX();
  const Eigen::Vector2d tip = plant.flange_pos + plant.tool_radius * n_hat;
  const Eigen::Vector2d rel = rot2(object.pose.theta).transpose() * (tip - object.pose.position());
  const double depth = rel.x() + p.half_x();
  if (depth < -1e-9 || std::abs(rel.y()) > p.half_y() + 1e-9 ||
      plant.last_contact_force.fn <= 1e-12) {
    return ContactMode::Separated;
  }
  return plant.contact;
}

/// One plant tick. `setpoint_pos` is the filtered flange set-point after this
/// tick's integration, `setpoint_vel` the rate applied over the tick. `wall`
/// is the resolved blocking plane when that disturbance is active. With a
/// ZOH cache the tracking-error dynamics integrate exactly; `error_frozen`
/// marks passivity-filter holds (the error state then stays constant by
/// construction).
inline PlantStepResult plant_step(PlantState& plant, ObjectState& object,
                                  const Eigen::Vector2d& setpoint_pos,
                                  const Eigen::Vector2d& setpoint_vel,
                                  const std::optional<WallPlane>& wall,
                                  const Eigen::Vector2d& scheduled_force_world, double dt,
                                  const LimitSurface& ls, const ObjectParams& p,
                                  const ImpedanceParams& imp,
                                  const Eigen::Vector2d& sp_accel_ff = Eigen::Vector2d::Zero(),
                                  bool error_frozen = false) {
  if (!(dt > 0.0)) throw std::invalid_argument("plant_step: dt must be positive");
  PlantStepResult out;
  const Eigen::Vector2d flange_pos_pre = plant.flange_pos;
  const Eigen::Vector2d sp_pos_pre = setpoint_pos - dt * setpoint_vel;

  const double theta = object.pose.theta;
  const Eigen::Matrix2d R = rot2(theta);
  const Eigen::Vector2d n_hat = R * Eigen::Vector2d::UnitX();
  const Eigen::Vector2d tip = plant.flange_pos + plant.tool_radius * n_hat;

  if (!wall.has_value()) plant.wall_latched = false;

  OracleOptions opt;
  if (scheduled_force_world.squaredNorm() > 0.0) {
    const Eigen::Vector2d fb = R.transpose() * scheduled_force_world;
    opt.external_wrench = Eigen::Vector3d(fb.x(), fb.y(), 0.0);
  }

  OracleResult res;
  bool blocked = plant.wall_latched;
  if (!blocked) {
    res = oracle_step(object, tip + dt * plant.flange_vel, tip, dt, ls, p, opt);
    if (wall.has_value() && res.mode != ContactMode::Separated) {
      const double adv_new = wall->normal.dot(res.state.pose.position() - wall->point);
      const double v_n =
          wall->normal.dot(Eigen::Vector2d(res.twist_world.vx, res.twist_world.vy));
      // Once the step would end at or past the plane while not receding, the
      // object is pressed against the wall and stays latched there for the
      // rest of the disturbance window.
      if (adv_new > -1e-12 && v_n > -1e-12) {
        blocked = true;
        plant.wall_latched = true;
      }
    }
  }

  if (!blocked) {
    object = res.state;
    out.force_body = res.force;
    out.mode = res.mode;
    out.f_e_world = R * res.force.vec();

    if (error_frozen) {
      // Filter hold: the set-point rides the flange, the error is constant.
      const Eigen::Vector2d x_err = sp_pos_pre - plant.flange_pos;
      plant.flange_pos += dt * plant.flange_vel;
      const Eigen::Vector2d f_hold =
          imp.stiffness.cwiseProduct(x_err) - out.f_e_world;
      plant.flange_vel += dt * f_hold.cwiseQuotient(imp.apparent_mass);
    } else {
      // Flange: position first, then velocity. The elastic force acts at the
      // midpoint of the tick's error path, which makes the discrete elastic
      // work match the stored energy exactly; the set-point acceleration
      // feedforward is part of the impedance law.
      plant.flange_pos += dt * plant.flange_vel;
      const Eigen::Vector2d x_err_mid =
          0.5 * ((sp_pos_pre - flange_pos_pre) + (setpoint_pos - plant.flange_pos));
      const Eigen::Vector2d v_err = setpoint_vel - plant.flange_vel;
      const Eigen::Vector2d f_sd =
          imp.stiffness.cwiseProduct(x_err_mid) + imp.damping.cwiseProduct(v_err);
      plant.flange_vel += dt * (f_sd - out.f_e_world).cwiseQuotient(imp.apparent_mass) +
                          dt * sp_accel_ff;
    }
  } else {
    // Object frozen against the wall; resolve the flange against the rigid
    // edge with quasi-static force transmission.
    out.wall_blocked = true;
    const Eigen::Vector2d t_hat(-n_hat.y(), n_hat.x());

    plant.flange_pos += dt * plant.flange_vel;
    // Keep the tip on the frozen edge plane.
    const Eigen::Vector2d tip_new = plant.flange_pos + plant.tool_radius * n_hat;
    const double depth = n_hat.dot(tip_new - object.pose.position()) + p.half_x();
    if (depth > 0.0) plant.flange_pos -= depth * n_hat;

    const Eigen::Vector2d x_err = setpoint_pos - plant.flange_pos;
    // Quasi-static transmission: the held flange transmits the commanded
    // impedance wrench evaluated at the constrained (stopped) velocity.
    const Eigen::Vector2d f_sd_held =
        imp.stiffness.cwiseProduct(x_err) + imp.damping.cwiseProduct(setpoint_vel);
    const double fn_cmd = n_hat.dot(f_sd_held);

    if (depth < 0.0 || fn_cmd <= 0.0) {
      // Tip not (or no longer) pressing the jammed object: free flange.
      const Eigen::Vector2d v_err = setpoint_vel - plant.flange_vel;
      const Eigen::Vector2d f_sd =
          imp.stiffness.cwiseProduct(x_err) + imp.damping.cwiseProduct(v_err);
      out.force_body = ContactForce{0.0, 0.0};
      out.mode = ContactMode::Separated;
      plant.flange_vel += dt * f_sd.cwiseQuotient(imp.apparent_mass);
    } else {
      const double ft_cmd = t_hat.dot(f_sd_held);
      const double cone = p.mu_contact * fn_cmd;
      double ft;
      if (std::abs(ft_cmd) <= cone) {
        ft = ft_cmd;
        plant.flange_vel.setZero();  // tip stuck on the frozen edge
      } else {
        ft = std::copysign(cone, ft_cmd);
        const double vt = t_hat.dot(plant.flange_vel);
        const double m_t = t_hat.dot(imp.apparent_mass.asDiagonal() * t_hat);
        const double vt_new = vt + dt * (ft_cmd - ft) / m_t;
        plant.flange_vel = vt_new * t_hat;  // normal component stopped
      }
      out.f_e_world = fn_cmd * n_hat + ft * t_hat;
      const Eigen::Vector2d fb = R.transpose() * out.f_e_world;
      out.force_body = ContactForce{std::max(fb.x(), 0.0), fb.y()};
      out.mode = ContactMode::Sticking;
      out.f_h_wall_world = -out.f_e_world;
    }
  }

  plant.contact = out.mode;
  plant.last_contact_force = out.force_body;
  out.err_disp =
      (setpoint_pos - plant.flange_pos) - (sp_pos_pre - flange_pos_pre);
  return out;
}

}  // namespace pushmpc
