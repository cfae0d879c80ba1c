#pragma once

// Closed-loop scenario runner: plant, controller, and passivity filter on a
// deterministic interleaved schedule (no wall-clock dependence), trace
// recording, metrics, and the runtime passivity monitor.
//
// Loop order per plant tick: (controller at its rate) -> raw set-point
// interpolation -> passivity filter (candidate, alpha, tank, set-point
// integration) -> plant step -> bookkeeping. The reference clock freezes
// while alpha = 0 so the planner is aware of the tank activation.

#include <chrono>
#include <random>

#include "pushmpc/controller.hpp"
#include "pushmpc/csv.hpp"
#include "pushmpc/scenario.hpp"

namespace pushmpc {

struct TraceRow {
  double t{0.0};
  double ref_t{0.0};
  Eigen::Vector3d obj_pose{0, 0, 0};
  double obj_phi{0.0};
  Eigen::Vector3d ref_pose{0, 0, 0};
  Eigen::Vector2d flange_pos{0, 0}, flange_vel{0, 0};
  Eigen::Vector2d sp_raw{0, 0}, sp_filt{0, 0}, sp_filt_vel{0, 0};
  ContactForce force;                      // resolved, body frame
  Eigen::Vector2d force_pred_body{0, 0};   // MPC prediction
  ContactMode mode{ContactMode::Separated};
  bool disturbance_active{false};
  bool wall_blocked{false};
  double tank_T{0.0};
  int alpha{1}, beta{1}, gamma{1};
  double power_interaction{0.0}, power_human{0.0};
  double storage_V{0.0}, storage_total{0.0};
  int solver_status{0};
  int solver_iterations{0};
  double solver_kkt{0.0}, solver_compl{0.0};
  bool sliding_in_plan{false};
};

struct RunMetrics {
  // Nominal window: after the startup transient, outside the interaction
  // window plus a 2 s recovery margin.
  double rmse_pos{0.0};
  double rmse_rot{0.0};
  double max_abs_pos_err{0.0};
  double max_abs_rot_err{0.0};
  // Whole run (after the startup transient only).
  double overall_rmse_pos{0.0};
  double overall_rmse_rot{0.0};
  double max_force_norm{0.0};       // peak predicted pushing-force norm
  double max_resolved_force{0.0};
  double tank_min{0.0};
  double alpha_zero_fraction{0.0};
  long solve_count{0};
  long infeasible_steps{0};
  long nonconverged_steps{0};
  double max_solver_compl{0.0};
  double mean_sqp_iters{0.0};
  double transient_s{2.0};
};

struct RunResult {
  RunMetrics metrics;
  PassivityReport monitor;
  std::vector<TraceRow> trace;
  double wall_contact_time{-1.0};   // first blocked step
  double alpha_drop_time{-1.0};     // first alpha = 0
  double alpha_recover_time{-1.0};  // first alpha = 1 after the drop
  double force_at_switch{0.0};      // predicted force norm when alpha dropped
  double max_force_during_block{0.0};
  bool any_sliding_in_plan{false};
  bool aborted{false};
  std::string abort_reason;
};

struct SolveLogEntry {
  double t;
  int status;
  int iterations;
  int qp_iterations;
  double kkt, defect, compl_res;
  double wall_ms;
};

class ScenarioRunner {
 public:
  explicit ScenarioRunner(const ScenarioConfig& cfg) : cfg_(cfg) { cfg_.validate(); }

  RunResult run(bool keep_trace = true) {
    const double dt = 1.0 / cfg_.plant.rate_hz;
    const int n_steps = static_cast<int>(std::round(cfg_.duration / dt));
    const int mpc_every =
        std::max(1, static_cast<int>(std::round(cfg_.plant.rate_hz / cfg_.mpc.sample_rate)));
    const int interp_every =
        cfg_.plant.setpoint_interp_hz > 0.0
            ? std::max(1, static_cast<int>(std::round(cfg_.plant.rate_hz /
                                                      cfg_.plant.setpoint_interp_hz)))
            : 1;

    const ModelParams model = make_model(cfg_);
    const LimitSurface plant_ls = build_limit_surface(cfg_.object);
    const ImpedanceParams imp = cfg_.robot.planar();
    const Vec6 Kd6 = cfg_.robot.Kd;
    const Vec6 Dd6 = cfg_.robot.Dd_effective();
    const Vec6 M6 = cfg_.robot.M;

    // Initial geometry: object at x0's pose, pusher resting at the contact
    // point with a relaxed spring.
    ObjectState object;
    object.pose = PlanarPose(cfg_.x0[0], cfg_.x0[1], cfg_.x0[2]);
    object.phi = cfg_.x0[3];
    const PlanarPose start_pose = object.pose;

    PlantState plant;
    plant.tool_radius = cfg_.robot.tool_radius;
    const Eigen::Vector2d n_hat0 = rot2(object.pose.theta) * Eigen::Vector2d::UnitX();
    const Eigen::Vector2d contact0 =
        object.pose.position() + rot2(object.pose.theta) * contact_point(object.phi, cfg_.object);
    plant.flange_pos = contact0 - plant.tool_radius * n_hat0;
    plant.flange_vel.setZero();

    MpcController controller(cfg_.mpc, model);
    controller.initialize(cfg_.x0);

    Vec6 sp_pose6 = Vec6::Zero();
    sp_pose6.head<2>() = plant.flange_pos;
    TankState tank = make_tank(cfg_.tank, sp_pose6);

    const ReferenceTrajectory ref = ReferenceTrajectory::generate(
        cfg_.path, cfg_.mean_velocity, cfg_.duration + 2.0, start_pose);

    std::mt19937_64 rng(cfg_.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Raw set-point state, linearly interpolated between controller updates.
    Eigen::Vector2d raw_sp = plant.flange_pos;
    Eigen::Vector2d raw_sp_target = raw_sp;
    Eigen::Vector2d raw_sp_interp_step = Eigen::Vector2d::Zero();
    Eigen::Vector2d raw_sp_vel = Eigen::Vector2d::Zero();
    Eigen::Vector2d pred_force_body = Eigen::Vector2d::Zero();
    Eigen::Vector2d pred_force_world = Eigen::Vector2d::Zero();
    int alpha_prev = 1;
    Eigen::Vector2d filt_vel_prev = Eigen::Vector2d::Zero();
    Eigen::Vector2d ref_vel_now = Eigen::Vector2d::Zero();
    Eigen::Vector2d vel_lp_state = Eigen::Vector2d::Zero();
    // Command smoother state (tracks the raw target with zero ramp lag).
    Eigen::Vector2d smooth_pos = raw_sp;
    Eigen::Vector2d smooth_vel = Eigen::Vector2d::Zero();
    ControllerStep last_cs;

    std::optional<WallPlane> wall;
    bool wall_placed = false;

    RunResult out;
    out.metrics.tank_min = tank.energy();
    std::vector<double> storage_trace, ph_trace, pint_trace, pdiss_trace;
    storage_trace.reserve(n_steps);
    ph_trace.reserve(n_steps);
    pint_trace.reserve(n_steps);
    pdiss_trace.reserve(n_steps);
    if (keep_trace) out.trace.reserve(n_steps);
    solver_log_.clear();

    double ref_clock = 0.0;
    long alpha_zero = 0;
    double err_sq_sum_nom = 0.0, rot_sq_sum_nom = 0.0;
    long nom_count = 0;
    double err_sq_sum_all = 0.0, rot_sq_sum_all = 0.0;
    long all_count = 0;
    long sqp_iter_sum = 0;

    for (int k = 0; k < n_steps; ++k) {
      const double t = k * dt;

      // Disturbance activation.
      const bool window_active = cfg_.disturbance.kind != DisturbanceSpec::Kind::None &&
                                 t >= cfg_.disturbance.start_s && t < cfg_.disturbance.end_s;
      if (cfg_.disturbance.kind == DisturbanceSpec::Kind::BlockingWall) {
        if (window_active && !wall_placed) {
          WallPlane w;
          w.normal = rot2(object.pose.theta) * Eigen::Vector2d::UnitX();
          w.point = object.pose.position() + cfg_.disturbance.wall_gap * w.normal;
          wall = w;
          wall_placed = true;
        }
        if (!window_active) wall.reset();
      }
      const Eigen::Vector2d sched_force =
          (cfg_.disturbance.kind == DisturbanceSpec::Kind::ScheduledWrench && window_active)
              ? cfg_.disturbance.wrench_force
              : Eigen::Vector2d::Zero();

      // Controller at its own rate.
      if (k % mpc_every == 0) {
        ObjectState meas = object;
        if (cfg_.plant.noise_pos_sigma > 0.0) {
          meas.pose = PlanarPose(meas.pose.x + cfg_.plant.noise_pos_sigma * gauss(rng),
                                 meas.pose.y + cfg_.plant.noise_pos_sigma * gauss(rng),
                                 meas.pose.theta + cfg_.plant.noise_theta_sigma * gauss(rng));
        }
        Reference window;
        window.reserve(cfg_.mpc.horizon_samples + 1);
        for (int j = 0; j <= cfg_.mpc.horizon_samples; ++j) {
          window.push_back(ref.sample(ref_clock + j * cfg_.mpc.dt()));
        }
        const auto tic = std::chrono::steady_clock::now();
        const ControllerStep cs = controller.step(meas, window);
        const double wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - tic)
                .count();
        last_cs = cs;
        ++out.metrics.solve_count;
        sqp_iter_sum += cs.iterations;
        if (cs.status == OcpStatus::Infeasible) ++out.metrics.infeasible_steps;
        if (cs.status != OcpStatus::Converged) ++out.metrics.nonconverged_steps;
        if (cs.status == OcpStatus::Converged) {
          out.metrics.max_solver_compl = std::max(out.metrics.max_solver_compl, cs.compl_residual);
        }
        out.any_sliding_in_plan = out.any_sliding_in_plan || cs.sliding_in_plan;
        solver_log_.push_back({t, static_cast<int>(cs.status), cs.iterations, cs.qp_iterations,
                               cs.kkt_residual, cs.defect_residual, cs.compl_residual, wall_ms});

        // Convert the contact set-point to the flange set-point (tool radius
        // along the current contact normal) and set up interpolation.
        const Eigen::Vector2d n_hat = rot2(meas.pose.theta) * Eigen::Vector2d::UnitX();
        const Eigen::Vector2d flange_target =
            cs.setpoint_pos_world - cfg_.robot.tool_radius * n_hat;
        raw_sp_target = flange_target;
        const int interp_updates = std::max(1, mpc_every / interp_every);
        raw_sp_interp_step = (raw_sp_target - raw_sp) / static_cast<double>(interp_updates);
        raw_sp_vel = cs.setpoint_vel_world;
        const Eigen::Vector3d r0 = ref.sample(ref_clock);
        const Eigen::Vector3d r1 = ref.sample(ref_clock + cfg_.mpc.dt());
        ref_vel_now = (r1.head<2>() - r0.head<2>()) / cfg_.mpc.dt();
        pred_force_body = cs.predicted_force_body;
        pred_force_world = cs.predicted_force_world;
      }
      if (k % interp_every == 0) {
        raw_sp += raw_sp_interp_step;
      }

      // Command smoother: position first, then velocity, matching the plant
      // integration order.
      // Rate conditioning: the deviation of the commanded rate from the
      // reference transport is low-passed (exact at DC, so no steady lag).
      Eigen::Vector2d raw_vel_fed = raw_sp_vel;
      if (cfg_.plant.velocity_lp_omega > 0.0) {
        const double a = std::min(1.0, cfg_.plant.velocity_lp_omega * dt);
        vel_lp_state += a * ((raw_sp_vel - ref_vel_now) - vel_lp_state);
        raw_vel_fed = ref_vel_now + vel_lp_state;
      }

      Eigen::Vector2d smooth_acc = Eigen::Vector2d::Zero();
      if (cfg_.plant.smoother_omega > 0.0) {
        const double wc = cfg_.plant.smoother_omega;
        const double zc = cfg_.plant.smoother_zeta;
        smooth_acc =
            wc * wc * (raw_sp - smooth_pos) + 2.0 * zc * wc * (raw_vel_fed - smooth_vel);
        smooth_pos += dt * smooth_vel;
        smooth_vel += dt * smooth_acc;
      } else {
        smooth_pos = raw_sp;
        smooth_vel = raw_vel_fed;
      }

      // Passivity filter on 6D embeddings (planar entries only).
      Vec6 raw6 = Vec6::Zero(), rawv6 = Vec6::Zero(), plantv6 = Vec6::Zero();
      raw6.head<2>() = smooth_pos;
      rawv6.head<2>() = smooth_vel;
      plantv6.head<2>() = plant.flange_vel;
      const Eigen::Vector2d tip_off = cfg_.robot.tool_radius *
                                      (rot2(object.pose.theta) * Eigen::Vector2d::UnitX());
      const Eigen::Vector3d p_ec(tip_off.x(), tip_off.y(), -cfg_.robot.tool_length);
      const Vec6 fp6 = lift_wrench(pred_force_world, p_ec);
      filter_setpoint(tank, cfg_.tank, raw6, rawv6, plantv6, fp6, Dd6, dt);
      if (tank.alpha == 0) ++alpha_zero;

      // Set-point acceleration feedforward: backward difference of the
      // filtered set-point rate; off while the filter holds the error.
      Eigen::Vector2d sp_accel_ff = Eigen::Vector2d::Zero();
      const Eigen::Vector2d filt_vel_now = tank.filtered_setpoint_twist.head<2>();
      if (tank.alpha == 1 && alpha_prev == 1) {
        sp_accel_ff = (filt_vel_now - filt_vel_prev) / dt;
      }
      filt_vel_prev = filt_vel_now;
      alpha_prev = tank.alpha;
      (void)smooth_acc;

      // Plant tick with the filtered flange set-point.
      const auto pres = plant_step(plant, object, tank.filtered_setpoint_pose.head<2>(),
                                   tank.filtered_setpoint_twist.head<2>(), wall, sched_force, dt,
                                   plant_ls, cfg_.object, imp, sp_accel_ff, tank.alpha == 0);

      // Energy bookkeeping: human power from the exact per-tick error
      // displacement (the lift's torque rows are inert against the planar
      // error rate).
      const double p_h = pres.err_disp.dot(pres.f_e_world - pred_force_world) / dt;
      Vec6 err_pose6 = tank.filtered_setpoint_pose;
      err_pose6.head<2>() -= plant.flange_pos;
      Vec6 err_twist_now = tank.filtered_setpoint_twist;
      err_twist_now.head<2>() -= plant.flange_vel;
      const double V = storage_V(err_pose6, err_twist_now, Kd6, M6);
      const double Vt = V + tank.energy();
      storage_trace.push_back(Vt);
      ph_trace.push_back(p_h);
      pint_trace.push_back(tank.last_interaction_power);
      {
        const Eigen::Vector2d u_exact = pres.err_disp / dt;
        pdiss_trace.push_back(u_exact.dot(imp.damping.cwiseProduct(u_exact)));
      }

      // Interaction milestones.
      if (pres.wall_blocked && out.wall_contact_time < 0.0) out.wall_contact_time = t;
      if (tank.alpha == 0 && out.alpha_drop_time < 0.0) {
        out.alpha_drop_time = t;
        out.force_at_switch = pred_force_world.norm();
      }
      if (tank.alpha == 1 && out.alpha_drop_time >= 0.0 && out.alpha_recover_time < 0.0) {
        out.alpha_recover_time = t;
      }
      if (window_active) {
        out.max_force_during_block =
            std::max(out.max_force_during_block, pred_force_world.norm());
      }

      // Metrics.
      const Eigen::Vector3d ref_pose = ref.sample(ref_clock);
      const double ex = object.pose.x - ref_pose[0];
      const double ey = object.pose.y - ref_pose[1];
      const double er = wrap_angle(object.pose.theta - ref_pose[2]);
      const bool in_transient = t < out.metrics.transient_s;
      const bool in_interaction =
          cfg_.disturbance.kind != DisturbanceSpec::Kind::None &&
          t >= cfg_.disturbance.start_s && t < cfg_.disturbance.end_s + 2.0;
      if (!in_transient) {
        err_sq_sum_all += ex * ex + ey * ey;
        rot_sq_sum_all += er * er;
        ++all_count;
        if (!in_interaction) {
          err_sq_sum_nom += ex * ex + ey * ey;
          rot_sq_sum_nom += er * er;
          ++nom_count;
          out.metrics.max_abs_pos_err =
              std::max({out.metrics.max_abs_pos_err, std::abs(ex), std::abs(ey)});
          out.metrics.max_abs_rot_err = std::max(out.metrics.max_abs_rot_err, std::abs(er));
        }
      }
      out.metrics.max_force_norm = std::max(out.metrics.max_force_norm, pred_force_world.norm());
      out.metrics.max_resolved_force =
          std::max(out.metrics.max_resolved_force, pres.force_body.norm());
      out.metrics.tank_min = std::min(out.metrics.tank_min, tank.energy());

      if (keep_trace) {
        TraceRow row;
        row.t = t;
        row.ref_t = ref_clock;
        row.obj_pose = Eigen::Vector3d(object.pose.x, object.pose.y, object.pose.theta);
        row.obj_phi = object.phi;
        row.ref_pose = ref_pose;
        row.flange_pos = plant.flange_pos;
        row.flange_vel = plant.flange_vel;
        row.sp_raw = raw_sp;
        row.sp_filt = tank.filtered_setpoint_pose.head<2>();
        row.sp_filt_vel = tank.filtered_setpoint_twist.head<2>();
        row.force = pres.force_body;
        row.force_pred_body = pred_force_body;
        row.mode = pres.mode;
        row.disturbance_active = window_active;
        row.wall_blocked = pres.wall_blocked;
        row.tank_T = tank.energy();
        row.alpha = tank.alpha;
        row.beta = tank.beta;
        row.gamma = tank.gamma;
        row.power_interaction = tank.last_interaction_power;
        row.power_human = p_h;
        row.storage_V = V;
        row.storage_total = Vt;
        row.solver_status = static_cast<int>(last_cs.status);
        row.solver_iterations = last_cs.iterations;
        row.solver_kkt = last_cs.kkt_residual;
        row.solver_compl = last_cs.compl_residual;
        row.sliding_in_plan = last_cs.sliding_in_plan;
        out.trace.push_back(row);
      }

      // Clocks: the reference is held while the filter is closed.
      if (tank.alpha == 1) ref_clock = std::min(ref_clock + dt, cfg_.duration + 2.0);

      if (out.metrics.solve_count > 0 &&
          out.metrics.infeasible_steps > 0.01 * static_cast<double>(out.metrics.solve_count) &&
          out.metrics.infeasible_steps > 5) {
        out.aborted = true;
        out.abort_reason = "solver infeasible on more than 1% of steps";
        break;
      }
    }

    out.metrics.alpha_zero_fraction =
        static_cast<double>(alpha_zero) / static_cast<double>(std::max(1, n_steps));
    if (nom_count > 0) {
      out.metrics.rmse_pos = std::sqrt(err_sq_sum_nom / static_cast<double>(nom_count));
      out.metrics.rmse_rot = std::sqrt(rot_sq_sum_nom / static_cast<double>(nom_count));
    }
    if (all_count > 0) {
      out.metrics.overall_rmse_pos = std::sqrt(err_sq_sum_all / static_cast<double>(all_count));
      out.metrics.overall_rmse_rot = std::sqrt(rot_sq_sum_all / static_cast<double>(all_count));
    }
    if (out.metrics.solve_count > 0) {
      out.metrics.mean_sqp_iters =
          static_cast<double>(sqp_iter_sum) / static_cast<double>(out.metrics.solve_count);
    }
    out.monitor = passivity_monitor(storage_trace, ph_trace, pint_trace, dt, 10.0, &pdiss_trace);
    return out;
  }

  const std::vector<SolveLogEntry>& solver_log() const { return solver_log_; }

  static void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace);
  void write_solver_log_csv(const std::string& path) const;

 private:
  ScenarioConfig cfg_;
  std::vector<SolveLogEntry> solver_log_;
};

inline void ScenarioRunner::write_trace_csv(const std::string& path,
                                            const std::vector<TraceRow>& trace) {
  CsvWriter w(path, {"t",
                     "ref_t",
                     "obj_x",
                     "obj_y",
                     "obj_theta",
                     "obj_phi",
                     "ref_x",
                     "ref_y",
                     "ref_theta",
                     "flange_x",
                     "flange_y",
                     "flange_vx",
                     "flange_vy",
                     "sp_raw_x",
                     "sp_raw_y",
                     "sp_filt_x",
                     "sp_filt_y",
                     "sp_filt_vx",
                     "sp_filt_vy",
                     "force_fn",
                     "force_ft",
                     "force_pred_x",
                     "force_pred_y",
                     "contact_mode",
                     "disturbance_active",
                     "wall_blocked",
                     "tank_T",
                     "alpha",
                     "beta",
                     "gamma",
                     "power_interaction",
                     "power_human",
                     "storage_V",
                     "storage_total",
                     "solver_status",
                     "solver_iterations",
                     "solver_kkt",
                     "solver_compl",
                     "sliding_in_plan"});
  for (const auto& r : trace) {
    w.field(r.t);
    w.field(r.ref_t);
    w.field(r.obj_pose[0]);
    w.field(r.obj_pose[1]);
    w.field(r.obj_pose[2]);
    w.field(r.obj_phi);
    w.field(r.ref_pose[0]);
    w.field(r.ref_pose[1]);
    w.field(r.ref_pose[2]);
    w.field(r.flange_pos.x());
    w.field(r.flange_pos.y());
    w.field(r.flange_vel.x());
    w.field(r.flange_vel.y());
    w.field(r.sp_raw.x());
    w.field(r.sp_raw.y());
    w.field(r.sp_filt.x());
    w.field(r.sp_filt.y());
    w.field(r.sp_filt_vel.x());
    w.field(r.sp_filt_vel.y());
    w.field(r.force.fn);
    w.field(r.force.ft);
    w.field(r.force_pred_body.x());
    w.field(r.force_pred_body.y());
    w.field(std::string(to_string(r.mode)));
    w.field(r.disturbance_active ? 1 : 0);
    w.field(r.wall_blocked ? 1 : 0);
    w.field(r.tank_T);
    w.field(r.alpha);
    w.field(r.beta);
    w.field(r.gamma);
    w.field(r.power_interaction);
    w.field(r.power_human);
    w.field(r.storage_V);
    w.field(r.storage_total);
    w.field(r.solver_status);
    w.field(r.solver_iterations);
    w.field(r.solver_kkt);
    w.field(r.solver_compl);
    w.field(r.sliding_in_plan ? 1 : 0);
    w.end_row();
  }
}

inline void ScenarioRunner::write_solver_log_csv(const std::string& path) const {
  CsvWriter w(path, {"t", "status", "iterations", "qp_iterations", "kkt", "defect",
                     "complementarity", "wall_ms"});
  for (const auto& e : solver_log_) {
    w.field(e.t);
    w.field(e.status);
    w.field(e.iterations);
    w.field(e.qp_iterations);
    w.field(e.kkt);
    w.field(e.defect);
    w.field(e.compl_res);
    w.field(e.wall_ms);
    w.end_row();
  }
}

}  // namespace pushmpc
