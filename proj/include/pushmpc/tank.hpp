#pragma once

// Energy-tank passivity filter.
//
// A scalar storage state z (tank energy T = z^2/2) absorbs dissipated energy
// and pays for energy injected through the pushing-wrench port. The filter
// law rewrites the commanded set-point rate as
//   xdot*_ep = alpha (Lambda (x*_e - x*_ep) + xdot*_e) + (1 - alpha) xdot_e,
// so alpha = 0 freezes the tracking-error rate when the tank is empty and the
// interaction would inject energy. beta/gamma gate the tank recharge at the
// upper bound. Everything runs on 6-vectors; in the planar plant only the
// first two entries are ever non-zero, which the diagonal gain structure
// makes exact.
//
// Discrete evaluation order per step: candidate rate -> alpha -> filtered
// rate -> tank integration -> set-point integration.

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "pushmpc/planar.hpp"

namespace pushmpc {

using Vec6 = Eigen::Matrix<double, 6, 1>;

struct TankConfig {
  double initial_energy{1e-2};  // T_0, J
  double upper_bound{1e-2};     // T_bar
  double lower_bound{5e-4};     // T_eps
  Vec6 gain = (Vec6() << 50.0, 50.0, 0.0, 0.0, 0.0, 0.0).finished();  // Lambda diag
  bool enabled{true};  // false: alpha forced to 1, tank bypassed (non-passive case)

  void validate() const {
    if (!(lower_bound > 0.0) || !(initial_energy >= lower_bound) ||
        !(upper_bound >= initial_energy)) {
      throw std::invalid_argument("TankConfig: require 0 < T_eps <= T_0 <= T_bar");
    }
  }
};

struct TankState {
  double z{0.0};
  int alpha{1};
  int beta{1};
  int gamma{1};
  Vec6 filtered_setpoint_pose = Vec6::Zero();   // x*_ep
  Vec6 filtered_setpoint_twist = Vec6::Zero();  // xdot*_ep
  double last_interaction_power{0.0};           // xtilde_dot_ep^T f_p
  double last_dissipation_power{0.0};
  bool clamped_low{false}, clamped_high{false};

  double energy() const { return 0.5 * z * z; }
};

inline TankState make_tank(const TankConfig& cfg, const Vec6& setpoint_pose0) {
  cfg.validate();
  TankState t;
  t.z = std::sqrt(2.0 * cfg.initial_energy);
  t.filtered_setpoint_pose = setpoint_pose0;
  return t;
}

/// Storage of the impedance-controlled plant: elastic plus kinetic energy of
/// the tracking error.
inline double storage_V(const Vec6& error_pose, const Vec6& error_twist, const Vec6& Kd_diag,
                        const Vec6& M_diag) {
  return 0.5 * error_pose.dot(Kd_diag.cwiseProduct(error_pose)) +
         0.5 * error_twist.dot(M_diag.cwiseProduct(error_twist));
}

/// Tank dynamics zdot = (beta/z) xtilde_dot^T D xtilde_dot - (gamma/z)
/// xtilde_dot^T f_p, explicit Euler, with a post-step clamp that trims
/// one-step overshoot beyond [T_eps, T_bar].
inline void tank_step(TankState& tank, const TankConfig& cfg, const Vec6& error_twist,
                      const Vec6& Dd_diag, const Vec6& f_p, double dt) {
  if (!(tank.z > 0.0)) throw std::logic_error("tank_step: z must stay positive");
  const double T = tank.energy();
  tank.beta = T < cfg.upper_bound ? 1 : 0;
  const double p_int = error_twist.dot(f_p);
  tank.gamma = p_int < 0.0 ? tank.beta : 1;
  const double p_diss = error_twist.dot(Dd_diag.cwiseProduct(error_twist));
  tank.last_interaction_power = p_int;
  tank.last_dissipation_power = p_diss;

  const double zdot = (tank.beta * p_diss - tank.gamma * p_int) / tank.z;
  tank.z += dt * zdot;

  tank.clamped_low = tank.clamped_high = false;
  const double Tnew = 0.5 * tank.z * tank.z;
  if (Tnew < cfg.lower_bound || tank.z <= 0.0) {
    tank.z = std::sqrt(2.0 * cfg.lower_bound);
    tank.clamped_low = true;
  } else if (Tnew > cfg.upper_bound) {
    tank.z = std::sqrt(2.0 * cfg.upper_bound);
    tank.clamped_high = true;
  }
}

/// One filter step: computes the switching state alpha from the candidate
/// error rate, produces the filtered set-point twist, steps the tank with the
/// realized error rate, and integrates the filtered set-point pose.
inline void filter_setpoint(TankState& tank, const TankConfig& cfg, const Vec6& mpc_pose,
                            const Vec6& mpc_twist, const Vec6& plant_twist, const Vec6& f_p,
                            const Vec6& Dd_diag, double dt) {
  const Vec6 drive = cfg.gain.cwiseProduct(mpc_pose - tank.filtered_setpoint_pose) + mpc_twist;
  const Vec6 candidate = drive - plant_twist;  // error rate if the filter stays open

  if (cfg.enabled && tank.energy() <= cfg.lower_bound && candidate.dot(f_p) > 0.0) {
    tank.alpha = 0;
  } else {
    tank.alpha = 1;
  }

  tank.filtered_setpoint_twist = tank.alpha * drive + (1 - tank.alpha) * plant_twist;
  const Vec6 error_twist = tank.filtered_setpoint_twist - plant_twist;  // = alpha * candidate
  if (cfg.enabled) {
    tank_step(tank, cfg, error_twist, Dd_diag, f_p, dt);
  } else {
    tank.last_interaction_power = error_twist.dot(f_p);
    tank.last_dissipation_power = error_twist.dot(Dd_diag.cwiseProduct(error_twist));
  }
  tank.filtered_setpoint_pose += dt * tank.filtered_setpoint_twist;
}

struct PassivityReport {
  bool violated{false};
  double max_margin{0.0};  // max over time of V(t) - V(0) - integral of human power
  double eta{0.0};
  std::size_t worst_index{0};
};

/// Checks the discrete passivity inequality
///   V(t_k) - V(0) <= sum_i p_h(t_i) dt + eta
/// with eta = eta_scale * dt * (peak instantaneous power), the peak taken
/// over the terms of the storage balance (human and interaction port powers
/// and the damping dissipation) so the slop budget scales with the largest
/// integrand.
inline PassivityReport passivity_monitor(const std::vector<double>& storage,
                                         const std::vector<double>& human_power,
                                         const std::vector<double>& interaction_power,
                                         double dt, double eta_scale = 10.0,
                                         const std::vector<double>* dissipation_power = nullptr) {
  if (storage.empty() || storage.size() != human_power.size()) {
    throw std::invalid_argument("passivity_monitor: need equal-length, non-empty traces");
  }
  double peak = 0.0;
  for (std::size_t i = 0; i < human_power.size(); ++i) {
    peak = std::max(peak, std::abs(human_power[i]));
    if (i < interaction_power.size()) peak = std::max(peak, std::abs(interaction_power[i]));
    if (dissipation_power && i < dissipation_power->size()) {
      peak = std::max(peak, std::abs((*dissipation_power)[i]));
    }
  }
  PassivityReport rep;
  rep.eta = eta_scale * dt * peak + 1e-12;
  double integral = 0.0;
  for (std::size_t k = 0; k < storage.size(); ++k) {
    const double margin = storage[k] - storage[0] - integral;
    if (margin > rep.max_margin) {
      rep.max_margin = margin;
      rep.worst_index = k;
    }
    integral += human_power[k] * dt;
  }
  rep.violated = rep.max_margin > rep.eta;
  return rep;
}

}  // namespace pushmpc
