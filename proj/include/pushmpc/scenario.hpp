#pragma once

// Scenario configuration: named parameter profiles (simulation, Mobile YuMi,
// KUKA LBR iiwa), disturbance specs, and JSON round-tripping so every run is
// reproducible from a dumped config.

#include <json.hpp>
#include <optional>
#include <string>

#include "pushmpc/ocp.hpp"
#include "pushmpc/plant.hpp"
#include "pushmpc/reference.hpp"
#include "pushmpc/tank.hpp"

namespace pushmpc {

enum class Profile { SimTableI, YumiTableII, KukaTableIII };

inline const char* to_string(Profile p) {
  switch (p) {
    case Profile::SimTableI: return "sim";
    case Profile::YumiTableII: return "yumi";
    case Profile::KukaTableIII: return "kuka";
  }
  return "?";
}

struct RobotConfig {
  Vec6 Kd = (Vec6() << 300, 300, 300, 90, 90, 90).finished();
  Vec6 Dd = (Vec6() << 50, 50, 50, 15, 15, 15).finished();
  Vec6 M = (Vec6() << 2, 2, 2, 1, 1, 1).finished();  // apparent Cartesian inertia
  bool damping_is_ratio{false};  // true: Dd holds ratios, D = 2 zeta sqrt(K M)
  double tool_radius{0.01};
  double tool_length{0.1};  // flange-to-tip drop used by the wrench lift

  ImpedanceParams planar() const {
    ImpedanceParams imp;
    imp.stiffness = Kd.head<2>();
    imp.apparent_mass = M.head<2>();
    if (damping_is_ratio) {
      imp.damping = 2.0 * Dd.head<2>().cwiseProduct(
                              (Kd.head<2>().cwiseProduct(M.head<2>())).cwiseSqrt());
    } else {
      imp.damping = Dd.head<2>();
    }
    return imp;
  }
  Vec6 Dd_effective() const {
    Vec6 d = Dd;
    if (damping_is_ratio) {
      d = 2.0 * Dd.cwiseProduct((Kd.cwiseProduct(M)).cwiseSqrt());
    }
    return d;
  }
};

struct PlantConfig {
  double rate_hz{1000.0};
  double setpoint_interp_hz{0.0};  // 0: hold between controller updates
  double noise_pos_sigma{0.0};     // measurement noise, meters
  double noise_theta_sigma{0.0};   // radians
  // Second-order command smoother between the controller output and the
  // passivity filter (zero lag on consistent ramps); 0 disables it.
  double smoother_omega{100.0};    // rad/s
  double smoother_zeta{1.0};
  // First-order conditioning of the commanded set-point rate around the
  // reference transport (DC-exact); 0 disables it.
  double velocity_lp_omega{0.0};   // rad/s
};

struct ScenarioConfig {
  Profile profile{Profile::SimTableI};
  std::string name{"sim"};
  ObjectParams object;                 // plant-side truth
  std::optional<ObjectParams> model_object;  // controller model; defaults to object
  MpcConfig mpc;
  Vec8 x0 = Vec8::Zero();
  RobotConfig robot;
  TankConfig tank;
  PlantConfig plant;
  PathKind path{PathKind::Eight};
  double mean_velocity{0.05};
  double duration{15.0};
  DisturbanceSpec disturbance;
  unsigned long long seed{1};

  ObjectParams controller_object() const { return model_object ? *model_object : object; }

  void validate() const {
    object.validate();
    if (model_object) model_object->validate();
    mpc.validate();
    tank.validate();
    disturbance.validate();
    if (!(mean_velocity > 0.0)) throw std::invalid_argument("scenario: mean_velocity > 0");
    if (!(duration > 0.0)) throw std::invalid_argument("scenario: duration > 0");
    if (!(plant.rate_hz > 0.0)) throw std::invalid_argument("scenario: plant rate > 0");
  }
};

namespace detail {

inline MpcConfig base_mpc(const ObjectParams& obj) {
  MpcConfig c;
  const double phi_span = 0.98 * std::atan2(obj.half_y(), obj.half_x());
  c.state_lower << -1e20, -1e20, -1e20, kPi - phi_span, -1.0, -1.0, 0.0, -30.0;
  c.state_upper << 1e20, 1e20, 1e20, kPi + phi_span, 1.0, 1.0, 30.0, 30.0;
  c.input_lower << 0.0, 0.0, -200.0, -200.0, -10.0;
  c.input_upper << 3.0, 3.0, 200.0, 200.0, 10.0;
  c.max_sqp_iters = 30;
  c.kkt_tolerance = 1e-8;
  c.step_tolerance = 1e-6;
  return c;
}

inline Vec8 start_state(double x, double y, double theta, double half_x) {
  Vec8 x0;
  x0 << x, y, theta, kPi, -half_x, 0.0, 0.0, 0.0;
  return x0;
}

}  // namespace detail

inline ScenarioConfig make_profile(Profile p) {
  ScenarioConfig c;
  c.profile = p;
  c.name = to_string(p);
  switch (p) {
    case Profile::SimTableI: {
      c.object = ObjectParams{0.5, 0.1, 0.1, 0.2, 0.2, 9.81, {0.0, 0.0}};
      c.mpc = detail::base_mpc(c.object);
      c.mpc.horizon_samples = 5;
      c.mpc.sample_rate = 1000.0;
      c.mpc.state_weights << 1e6, 1e6, 1.5e6, 0, 0, 0, 1e-2, 0.1;
      c.mpc.input_weights << 1e-3, 1e-3, 1e-2, 1.0, 10.0;
      c.x0 = detail::start_state(0.0, 0.6, kPi / 4.0, c.object.half_x());
      c.robot = RobotConfig{};
      c.tank = TankConfig{1e-2, 1e-2, 5e-4};
      c.plant = PlantConfig{1000.0, 0.0, 0.0, 0.0};
      c.path = PathKind::Eight;
      c.mean_velocity = 0.05;
      c.duration = 15.0;
      break;
    }
    case Profile::YumiTableII: {
      c.object = ObjectParams{0.474, 0.21, 0.09, 0.2, 0.2, 9.81, {0.0, 0.0}};
      c.mpc = detail::base_mpc(c.object);
      c.mpc.horizon_samples = 3;
      c.mpc.sample_rate = 15.0;
      c.mpc.state_weights << 3e2, 3e2, 3e2, 0, 0, 0, 0, 1e-4;
      c.mpc.input_weights << 0.1, 0.1, 0.1, 0.0, 0.1;
      c.x0 = detail::start_state(0.0, 0.0, 0.0, c.object.half_x());
      c.robot = RobotConfig{};
      c.robot.tool_radius = 0.0075;
      c.tank = TankConfig{5e-3, 6e-3, 1.5e-3};
      c.plant = PlantConfig{1000.0, 0.0, 1.5e-3, 0.01};
      c.path = PathKind::Line;
      c.mean_velocity = 0.02;
      c.duration = 15.0;
      break;
    }
    case Profile::KukaTableIII: {
      // Plant truth defaults to the nominal sweep cell: aluminum table,
      // half-full rack.
      c.object = ObjectParams{0.2843, 0.21, 0.09, 0.35, 0.2, 9.81, {0.0, 0.0}};
      c.mpc = detail::base_mpc(c.object);
      c.mpc.horizon_samples = 25;
      c.mpc.sample_rate = 25.0;
      c.mpc.state_weights << 1e2, 1e2, 1e2, 0, 0, 0, 1e-4, 1e-4;
      c.mpc.input_weights << 0.1, 0.1, 0.5, 0.5, 1e-2;
      c.x0 = detail::start_state(0.0, 0.0, 0.0, c.object.half_x());
      c.robot = RobotConfig{};
      c.robot.Kd = (Vec6() << 300, 300, 300, 300, 300, 300).finished();
      c.robot.Dd = (Vec6() << 0.7, 0.7, 0.7, 0.7, 0.7, 0.7).finished();
      c.robot.damping_is_ratio = true;
      c.robot.tool_radius = 0.0125;
      c.tank = TankConfig{1e-2, 1e-2, 5e-4};
      c.plant = PlantConfig{1000.0, 200.0, 1.5e-3, 0.01};
      c.path = PathKind::Line;
      c.mean_velocity = 0.0313;
      c.duration = 16.0;
      break;
    }
  }
  return c;
}

inline ModelParams make_model(const ScenarioConfig& c) {
  const ObjectParams obj = c.controller_object();
  return ModelParams{build_limit_surface(obj),
                     StiffnessMatrix(c.robot.Kd[0], c.robot.Kd[1]), obj};
}

// ---- JSON (de)serialization ------------------------------------------------

namespace jsonio {

using nlohmann::json;

template <typename Derived>
json vec(const Eigen::MatrixBase<Derived>& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

template <typename VecT>
void read_vec(const json& j, VecT& v) {
  if (static_cast<int>(j.size()) != v.size()) {
    throw std::invalid_argument("config: vector length mismatch");
  }
  for (int i = 0; i < v.size(); ++i) v[i] = j.at(i).get<double>();
}

inline json to_json(const ScenarioConfig& c) {
  json j;
  j["profile"] = to_string(c.profile);
  j["name"] = c.name;
  j["object"] = {{"mass", c.object.mass},
                 {"side_x", c.object.side_x},
                 {"side_y", c.object.side_y},
                 {"mu_ground", c.object.mu_ground},
                 {"mu_contact", c.object.mu_contact},
                 {"gravity", c.object.gravity},
                 {"center_offset", vec(c.object.center_offset)}};
  if (c.model_object) {
    j["model_object"] = {{"mass", c.model_object->mass},
                         {"side_x", c.model_object->side_x},
                         {"side_y", c.model_object->side_y},
                         {"mu_ground", c.model_object->mu_ground},
                         {"mu_contact", c.model_object->mu_contact},
                         {"gravity", c.model_object->gravity},
                         {"center_offset", vec(c.model_object->center_offset)}};
  }
  j["mpc"] = {{"horizon_samples", c.mpc.horizon_samples},
              {"sample_rate", c.mpc.sample_rate},
              {"state_weights", vec(c.mpc.state_weights)},
              {"input_weights", vec(c.mpc.input_weights)},
              {"stage_state_scale", c.mpc.stage_state_scale},
              {"mayer_on_tracking_error", c.mpc.mayer_on_tracking_error},
              {"state_lower", vec(c.mpc.state_lower)},
              {"state_upper", vec(c.mpc.state_upper)},
              {"input_lower", vec(c.mpc.input_lower)},
              {"input_upper", vec(c.mpc.input_upper)},
              {"max_sqp_iters", c.mpc.max_sqp_iters},
              {"kkt_tolerance", c.mpc.kkt_tolerance},
              {"step_tolerance", c.mpc.step_tolerance},
              {"warm_start", c.mpc.warm_start}};
  j["x0"] = vec(c.x0);
  j["robot"] = {{"Kd", vec(c.robot.Kd)},
                {"Dd", vec(c.robot.Dd)},
                {"M", vec(c.robot.M)},
                {"damping_is_ratio", c.robot.damping_is_ratio},
                {"tool_radius", c.robot.tool_radius},
                {"tool_length", c.robot.tool_length}};
  j["tank"] = {{"initial_energy", c.tank.initial_energy},
               {"upper_bound", c.tank.upper_bound},
               {"lower_bound", c.tank.lower_bound},
               {"gain", vec(c.tank.gain)},
               {"enabled", c.tank.enabled}};
  j["plant"] = {{"rate_hz", c.plant.rate_hz},
                {"setpoint_interp_hz", c.plant.setpoint_interp_hz},
                {"noise_pos_sigma", c.plant.noise_pos_sigma},
                {"noise_theta_sigma", c.plant.noise_theta_sigma},
                {"smoother_omega", c.plant.smoother_omega},
                {"smoother_zeta", c.plant.smoother_zeta},
                {"velocity_lp_omega", c.plant.velocity_lp_omega}};
  j["scenario"] = {{"path", to_string(c.path)},
                   {"mean_velocity", c.mean_velocity},
                   {"duration", c.duration},
                   {"seed", c.seed}};
  json d;
  switch (c.disturbance.kind) {
    case DisturbanceSpec::Kind::None: d["kind"] = "none"; break;
    case DisturbanceSpec::Kind::BlockingWall: d["kind"] = "blocking_wall"; break;
    case DisturbanceSpec::Kind::ScheduledWrench: d["kind"] = "scheduled_wrench"; break;
  }
  d["start_s"] = c.disturbance.start_s;
  d["end_s"] = c.disturbance.end_s;
  d["wall_gap"] = c.disturbance.wall_gap;
  d["wrench_force"] = vec(c.disturbance.wrench_force);
  j["disturbance"] = d;
  return j;
}

inline Profile profile_from_string(const std::string& s) {
  if (s == "sim") return Profile::SimTableI;
  if (s == "yumi") return Profile::YumiTableII;
  if (s == "kuka") return Profile::KukaTableIII;
  throw std::invalid_argument("config: unknown profile '" + s + "'");
}

inline PathKind path_from_string(const std::string& s) {
  if (s == "line") return PathKind::Line;
  if (s == "curve") return PathKind::Curve;
  if (s == "eight") return PathKind::Eight;
  throw std::invalid_argument("config: unknown path '" + s + "'");
}

inline void read_object(const json& j, ObjectParams& o) {
  o.mass = j.value("mass", o.mass);
  o.side_x = j.value("side_x", o.side_x);
  o.side_y = j.value("side_y", o.side_y);
  o.mu_ground = j.value("mu_ground", o.mu_ground);
  o.mu_contact = j.value("mu_contact", o.mu_contact);
  o.gravity = j.value("gravity", o.gravity);
  if (j.contains("center_offset")) read_vec(j["center_offset"], o.center_offset);
}

/// Applies a (possibly partial) JSON document on top of an existing config.
inline void merge_json(ScenarioConfig& c, const json& j) {
  if (j.contains("profile")) {
    c = make_profile(profile_from_string(j["profile"].get<std::string>()));
  }
  if (j.contains("name")) c.name = j["name"].get<std::string>();
  if (j.contains("object")) read_object(j["object"], c.object);
  if (j.contains("model_object")) {
    ObjectParams m = c.object;
    read_object(j["model_object"], m);
    c.model_object = m;
  }
  if (j.contains("mpc")) {
    const json& m = j["mpc"];
    c.mpc.horizon_samples = m.value("horizon_samples", c.mpc.horizon_samples);
    c.mpc.sample_rate = m.value("sample_rate", c.mpc.sample_rate);
    if (m.contains("state_weights")) read_vec(m["state_weights"], c.mpc.state_weights);
    if (m.contains("input_weights")) read_vec(m["input_weights"], c.mpc.input_weights);
    c.mpc.stage_state_scale = m.value("stage_state_scale", c.mpc.stage_state_scale);
    c.mpc.mayer_on_tracking_error =
        m.value("mayer_on_tracking_error", c.mpc.mayer_on_tracking_error);
    if (m.contains("state_lower")) read_vec(m["state_lower"], c.mpc.state_lower);
    if (m.contains("state_upper")) read_vec(m["state_upper"], c.mpc.state_upper);
    if (m.contains("input_lower")) read_vec(m["input_lower"], c.mpc.input_lower);
    if (m.contains("input_upper")) read_vec(m["input_upper"], c.mpc.input_upper);
    c.mpc.max_sqp_iters = m.value("max_sqp_iters", c.mpc.max_sqp_iters);
    c.mpc.kkt_tolerance = m.value("kkt_tolerance", c.mpc.kkt_tolerance);
    c.mpc.step_tolerance = m.value("step_tolerance", c.mpc.step_tolerance);
    c.mpc.warm_start = m.value("warm_start", c.mpc.warm_start);
  }
  if (j.contains("x0")) read_vec(j["x0"], c.x0);
  if (j.contains("robot")) {
    const json& r = j["robot"];
    if (r.contains("Kd")) read_vec(r["Kd"], c.robot.Kd);
    if (r.contains("Dd")) read_vec(r["Dd"], c.robot.Dd);
    if (r.contains("M")) read_vec(r["M"], c.robot.M);
    c.robot.damping_is_ratio = r.value("damping_is_ratio", c.robot.damping_is_ratio);
    c.robot.tool_radius = r.value("tool_radius", c.robot.tool_radius);
    c.robot.tool_length = r.value("tool_length", c.robot.tool_length);
  }
  if (j.contains("tank")) {
    const json& t = j["tank"];
    c.tank.initial_energy = t.value("initial_energy", c.tank.initial_energy);
    c.tank.upper_bound = t.value("upper_bound", c.tank.upper_bound);
    c.tank.lower_bound = t.value("lower_bound", c.tank.lower_bound);
    if (t.contains("gain")) read_vec(t["gain"], c.tank.gain);
    c.tank.enabled = t.value("enabled", c.tank.enabled);
  }
  if (j.contains("plant")) {
    const json& p = j["plant"];
    c.plant.rate_hz = p.value("rate_hz", c.plant.rate_hz);
    c.plant.setpoint_interp_hz = p.value("setpoint_interp_hz", c.plant.setpoint_interp_hz);
    c.plant.noise_pos_sigma = p.value("noise_pos_sigma", c.plant.noise_pos_sigma);
    c.plant.noise_theta_sigma = p.value("noise_theta_sigma", c.plant.noise_theta_sigma);
    c.plant.smoother_omega = p.value("smoother_omega", c.plant.smoother_omega);
    c.plant.smoother_zeta = p.value("smoother_zeta", c.plant.smoother_zeta);
    c.plant.velocity_lp_omega = p.value("velocity_lp_omega", c.plant.velocity_lp_omega);
  }
  if (j.contains("scenario")) {
    const json& s = j["scenario"];
    if (s.contains("path")) c.path = path_from_string(s["path"].get<std::string>());
    c.mean_velocity = s.value("mean_velocity", c.mean_velocity);
    c.duration = s.value("duration", c.duration);
    c.seed = s.value("seed", c.seed);
  }
  if (j.contains("disturbance")) {
    const json& d = j["disturbance"];
    if (d.contains("kind")) {
      const std::string k = d["kind"].get<std::string>();
      if (k == "none") {
        c.disturbance.kind = DisturbanceSpec::Kind::None;
      } else if (k == "blocking_wall") {
        c.disturbance.kind = DisturbanceSpec::Kind::BlockingWall;
      } else if (k == "scheduled_wrench") {
        c.disturbance.kind = DisturbanceSpec::Kind::ScheduledWrench;
      } else {
        throw std::invalid_argument("config: unknown disturbance kind '" + k + "'");
      }
    }
    c.disturbance.start_s = d.value("start_s", c.disturbance.start_s);
    c.disturbance.end_s = d.value("end_s", c.disturbance.end_s);
    c.disturbance.wall_gap = d.value("wall_gap", c.disturbance.wall_gap);
    if (d.contains("wrench_force")) read_vec(d["wrench_force"], c.disturbance.wrench_force);
  }
}

}  // namespace jsonio

}  // namespace pushmpc
