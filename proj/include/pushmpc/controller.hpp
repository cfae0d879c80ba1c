#pragma once

// Receding-horizon wrapper around the OCP solver.
//
// Per step the measured object state replaces the pose/contact-angle block of
// the internal 8-state (with angle unwrapping so the solver sees continuous
// angles), while the set-point and force sub-states are carried forward from
// the model prediction. The first-stage input is applied to the internal
// state, and the set-point position/velocity are rotated to the world frame
// for the impedance plant.

#include "pushmpc/ocp.hpp"

namespace pushmpc {

struct ControllerStep {
  Eigen::Vector2d setpoint_pos_world{0.0, 0.0};
  Eigen::Vector2d setpoint_vel_world{0.0, 0.0};
  Eigen::Vector2d predicted_force_body{0.0, 0.0};
  Eigen::Vector2d predicted_force_world{0.0, 0.0};
  OcpStatus status{OcpStatus::Converged};
  bool held{false};  // solver infeasible: previous set-point held, velocity zero
  int iterations{0};
  int qp_iterations{0};
  double kkt_residual{0.0};
  double defect_residual{0.0};
  double compl_residual{0.0};
  bool sliding_in_plan{false};
};

class MpcController {
 public:
  MpcController(const MpcConfig& config, const ModelParams& model, QpSettings qp = {})
      : config_(config), model_(model), solver_(qp) {
    config_.validate();
  }

  void initialize(const Vec8& x0) {
    x_ = x0;
    have_warm_ = false;
    last_ = ControllerStep{};
    last_.setpoint_pos_world = Eigen::Vector2d::Zero();
  }

  const Vec8& internal_state() const { return x_; }
  const MpcConfig& config() const { return config_; }

  /// One receding-horizon step. `ref` must hold at least N+1 pose samples.
  ControllerStep step(const ObjectState& measured, const Reference& ref) {
    // Measurement update of the object block; angles unwrapped onto the
    // internal branch (theta mod 2pi, phi mod pi).
    x_[0] = measured.pose.x;
    x_[1] = measured.pose.y;
    x_[2] = unwrap_near(measured.pose.theta, x_[2]);
    x_[3] = unwrap_near(measured.phi, x_[3], kPi);

    Reference window(ref.begin(), ref.begin() + config_.horizon_samples + 1);
    for (auto& r : window) r[2] = unwrap_near(r[2], x_[2]);

    const OcpNlp nlp = transcribe(config_, x_, window, model_);
    const OcpSolution sol = solver_.solve(nlp, have_warm_ ? &warm_ : nullptr);

    ControllerStep out;
    out.status = sol.status;
    out.iterations = sol.iterations;
    out.qp_iterations = sol.qp_iterations;
    out.kkt_residual = sol.kkt_residual;
    out.defect_residual = sol.defect_residual;
    out.compl_residual = sol.compl_residual;
    out.sliding_in_plan = sol.sliding_in_plan;

    if (sol.status == OcpStatus::Infeasible) {
      out.held = true;
      out.setpoint_pos_world = last_.setpoint_pos_world;
      out.setpoint_vel_world.setZero();
      out.predicted_force_body = x_.segment<2>(6);
      out.predicted_force_world = rot2(x_[2]) * out.predicted_force_body;
      last_ = out;
      return out;
    }

    warm_ = sol;
    have_warm_ = true;

    const Vec5 u0 = sol.U[0];
    const Eigen::Vector2d sp_vel_body = setpoint_velocity(
        u0.segment<2>(2), x_[3], u0[1] - u0[0], model_.stiffness, model_.object);
    out.predicted_force_body = x_.segment<2>(6);

    // The set-point is carried by the object frame, so its world velocity is
    // the in-frame rate plus the frame transport. The transport follows the
    // planned frame motion (the reference rate), which keeps the velocity
    // command free of the force-to-velocity feedthrough of the quasi-static
    // model.
    const double ref_dt = config_.dt();
    const Eigen::Vector2d ref_vel = (window[1].head<2>() - window[0].head<2>()) / ref_dt;
    const double ref_rate = (window[1][2] - window[0][2]) / ref_dt;

    const Eigen::Matrix2d R = rot2(x_[2]);
    const Eigen::Vector2d obj_pos(x_[0], x_[1]);
    x_ = rk4_step(x_, u0, config_.dt(), model_.ls, model_.stiffness, model_.object);

    const Eigen::Vector2d d_world = R * x_.segment<2>(4);
    out.setpoint_pos_world = obj_pos + d_world;
    out.setpoint_vel_world = ref_vel +
                             ref_rate * Eigen::Vector2d(-d_world.y(), d_world.x()) +
                             R * sp_vel_body;
    out.predicted_force_world = R * out.predicted_force_body;
    last_ = out;
    return out;
  }

 private:
  MpcConfig config_;
  ModelParams model_;
  OcpSolver solver_;
  Vec8 x_ = Vec8::Zero();
  OcpSolution warm_;
  bool have_warm_{false};
  ControllerStep last_;
};

}  // namespace pushmpc
