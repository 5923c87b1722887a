#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <string>

#include "json.hpp"

#include "evasim/camera_percept.hpp"
#include "evasim/control.hpp"
#include "evasim/core.hpp"
#include "evasim/lidar_percept.hpp"
#include "evasim/predict.hpp"
#include "evasim/sensors.hpp"
#include "evasim/simworld.hpp"
#include "evasim/threat.hpp"

namespace evasim {

/// Forecasting setup shared by the threat evaluator and the reflex planner.
/// A zero horizon means "one control step" and is resolved against sim.dt at
/// run time. The default leads the target by the reaction budget instead, so
/// threat scores reflect where the obstacle will be when the command lands.
struct PredictSpec {
  std::string backend = "lsq";
  double horizon = 0.2;
};

/// Everything a trial needs, bundled so a single JSON file pins down the
/// world, the sensors, both perception stages, and the controller.
struct ScenarioConfig {
  SimParams sim;
  SpawnParams spawn;
  LidarSpec lidar;
  CameraRig camera;
  DetectorNoise detector;
  LidarPerceptParams lidar_percept;
  CameraPerceptParams camera_percept;
  ThreatParams threat;
  ControlGains control;
  PredictSpec predict;

  void validate() const;
  nlohmann::json to_json() const;
  std::string digest() const;
};

namespace detail {

/// Applies overrides from a JSON object section. Every key must be consumed
/// by one of the field bindings, otherwise the config is rejected; silent
/// typos in tuning files are worse than a hard error.
class SectionReader {
 public:
  SectionReader(const nlohmann::json& j, std::string section)
      : j_(j), section_(std::move(section)) {
    if (!j_.is_object())
      throw ConfigError("config section '" + section_ + "' must be an object");
  }

  template <typename T>
  void bind(const char* key, T& field) {
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      field = it->get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config key '" + section_ + "." + key + "' has the wrong type");
    }
    seen_.insert(key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (seen_.find(it.key()) == seen_.end())
        throw ConfigError("unknown config key '" + section_ + "." + it.key() + "'");
  }

 private:
  const nlohmann::json& j_;
  std::string section_;
  std::set<std::string> seen_;
};

inline void load_section(const nlohmann::json& j, const std::string& name, SimParams& p) {
  SectionReader r(j, name);
  r.bind("dt", p.dt);
  r.bind("duration", p.duration);
  r.bind("v_max", p.v_max);
  r.bind("a_max", p.a_max);
  r.bind("omega_max", p.omega_max);
  r.bind("body_radius", p.body_radius);
  r.bind("mass", p.mass);
  r.finish();
}

inline void load_section(const nlohmann::json& j, const std::string& name, SpawnParams& p) {
  SectionReader r(j, name);
  r.bind("count", p.count);
  r.bind("bearing_lo", p.bearing_lo);
  r.bind("bearing_hi", p.bearing_hi);
  r.bind("range_lo", p.range_lo);
  r.bind("range_hi", p.range_hi);
  r.bind("speed_lo", p.speed_lo);
  r.bind("speed_hi", p.speed_hi);
  r.bind("radius_lo", p.radius_lo);
  r.bind("radius_hi", p.radius_hi);
  r.bind("w_linear", p.w_linear);
  r.bind("w_ballistic", p.w_ballistic);
  r.bind("w_waypoint", p.w_waypoint);
  r.bind("w_sudden", p.w_sudden);
  r.bind("aim_jitter", p.aim_jitter);
  r.finish();
}

inline void load_section(const nlohmann::json& j, const std::string& name, LidarSpec& p) {
  SectionReader r(j, name);
  r.bind("rays_azimuth", p.rays_azimuth);
  r.bind("rays_elevation", p.rays_elevation);
  r.bind("elev_lo", p.elev_lo);
  r.bind("elev_hi", p.elev_hi);
  r.bind("max_range", p.max_range);
  r.bind("sigma_range", p.sigma_range);
  r.bind("dropout", p.dropout);
  r.bind("sensor_height", p.sensor_height);
  r.finish();
}

inline void load_section(const nlohmann::json& j, const std::string& name, CameraRig& p) {
  SectionReader r(j, name);
  r.bind("fx", p.fx);
  r.bind("fy", p.fy);
  r.bind("width", p.width);
  r.bind("height", p.height);
  r.bind("mount_height", p.mount_height);
  r.bind("far_plane", p.far_plane);
  r.bind("sigma_depth", p.sigma_depth);
  r.finish();
}

inline void load_section(const nlohmann::json& j, const std::string& name, DetectorNoise& p) {
  SectionReader r(j, name);
  r.bind("sigma_px", p.sigma_px);
  r.bind("p_fn", p.p_fn);
  r.bind("p_fp", p.p_fp);
  r.bind("p_lowconf", p.p_lowconf);
  r.bind("min_extent", p.min_extent);
  r.finish();
}

inline void load_section(const nlohmann::json& j, const std::string& name, KalmanParams& p) {
  SectionReader r(j, name);
  r.bind("sigma_a", p.sigma_a);
  r.bind("sigma_z", p.sigma_z);
  r.bind("init_pos_var", p.init_pos_var);
  r.bind("init_vel_var", p.init_vel_var);
  r.finish();
}

inline void load_section(const nlohmann::json& j, const std::string& name,
                         LidarPerceptParams& p) {
  SectionReader r(j, name);
  r.bind("eps", p.eps);
  r.bind("min_pts", p.min_pts);
  r.bind("v_ds", p.v_ds);
  r.bind("r_roi", p.r_roi);
  r.bind("ground_margin", p.ground_margin);
  r.bind("gate_xy", p.gate_xy);
  r.bind("m_confirm", p.m_confirm);
  r.bind("m_die", p.m_die);
  r.bind("history_k", p.history_k);
  r.bind("eps_p", p.eps_p);
  r.bind("eps_v", p.eps_v);
  r.bind("sensor_height", p.sensor_height);
  if (j.contains("kalman")) load_section(j.at("kalman"), name + ".kalman", p.kalman);
  const char* known[] = {"eps",  "min_pts", "v_ds",      "r_roi",     "ground_margin",
                         "gate_xy", "m_confirm", "m_die", "history_k", "eps_p",
                         "eps_v",   "sensor_height", "kalman"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("unknown config key '" + name + "." + it.key() + "'");
  }
}

inline void load_section(const nlohmann::json& j, const std::string& name,
                         CameraPerceptParams& p) {
  SectionReader r(j, name);
  r.bind("conf_high", p.conf_high);
  r.bind("m2_die", p.m2_die);
  r.bind("tau_depth", p.tau_depth);
  r.bind("n_min", p.n_min);
  r.bind("seed_search_px", p.seed_search_px);
  r.bind("k_c", p.k_c);
  r.bind("lambda_v", p.lambda_v);
  r.bind("bridge_tol", p.bridge_tol);
  r.finish();
}

inline void load_section(const nlohmann::json& j, const std::string& name, ThreatParams& p) {
  SectionReader r(j, name);
  r.bind("alpha", p.alpha);
  r.bind("gamma", p.gamma);
  r.bind("r_safe", p.r_safe);
  r.bind("eps", p.eps);
  r.bind("n_switch", p.n_switch);
  r.bind("t_lo", p.t_lo);
  r.bind("t_hi", p.t_hi);
  r.bind("camera_stale_frames", p.camera_stale_frames);
  r.finish();
}

inline void load_section(const nlohmann::json& j, const std::string& name, RewardWeights& p) {
  SectionReader r(j, name);
  r.bind("safe", p.safe);
  r.bind("dir", p.dir);
  r.bind("ene", p.ene);
  r.bind("stab", p.stab);
  r.bind("rec", p.rec);
  r.finish();
}

inline void load_section(const nlohmann::json& j, const std::string& name, ControlGains& p) {
  SectionReader r(j, name);
  r.bind("k_psi", p.k_psi);
  r.bind("yaw_sat", p.yaw_sat);
  r.bind("k_r_min", p.k_r_min);
  r.bind("k_r_max", p.k_r_max);
  r.bind("beta_trig", p.beta_trig);
  r.bind("reflex_horizon", p.reflex_horizon);
  r.bind("ttc_trig", p.ttc_trig);
  if (j.contains("weights")) load_section(j.at("weights"), name + ".weights", p.weights);
  const char* known[] = {"k_psi",     "yaw_sat",        "k_r_min",  "k_r_max",
                         "beta_trig", "reflex_horizon", "ttc_trig", "weights"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("unknown config key '" + name + "." + it.key() + "'");
  }
}

inline void load_section(const nlohmann::json& j, const std::string& name, PredictSpec& p) {
  SectionReader r(j, name);
  r.bind("backend", p.backend);
  r.bind("horizon", p.horizon);
  r.finish();
}

}  // namespace detail

inline ScenarioConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  ScenarioConfig c;
  const char* known[] = {"sim",          "spawn",          "lidar",  "camera",
                         "detector",     "lidar_percept",  "camera_percept",
                         "threat",       "control",        "predict"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("unknown config section '" + it.key() + "'");
  }
  if (j.contains("sim")) detail::load_section(j.at("sim"), "sim", c.sim);
  if (j.contains("spawn")) detail::load_section(j.at("spawn"), "spawn", c.spawn);
  if (j.contains("lidar")) detail::load_section(j.at("lidar"), "lidar", c.lidar);
  if (j.contains("camera")) detail::load_section(j.at("camera"), "camera", c.camera);
  if (j.contains("detector")) detail::load_section(j.at("detector"), "detector", c.detector);
  if (j.contains("lidar_percept"))
    detail::load_section(j.at("lidar_percept"), "lidar_percept", c.lidar_percept);
  if (j.contains("camera_percept"))
    detail::load_section(j.at("camera_percept"), "camera_percept", c.camera_percept);
  if (j.contains("threat")) detail::load_section(j.at("threat"), "threat", c.threat);
  if (j.contains("control")) detail::load_section(j.at("control"), "control", c.control);
  if (j.contains("predict")) detail::load_section(j.at("predict"), "predict", c.predict);
  c.validate();
  return c;
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error in '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

inline void ScenarioConfig::validate() const {
  if (sim.dt <= 0.0 || sim.duration <= 0.0) throw ConfigError("sim timing must be positive");
  if (sim.v_max <= 0.0 || sim.a_max <= 0.0 || sim.omega_max <= 0.0)
    throw ConfigError("sim limits must be positive");
  if (sim.body_radius <= 0.0 || sim.mass <= 0.0)
    throw ConfigError("sim body parameters must be positive");
  if (spawn.count < 0) throw ConfigError("spawn count must be non-negative");
  if (spawn.range_lo > spawn.range_hi || spawn.range_lo <= 0.0)
    throw ConfigError("spawn range bounds invalid");
  if (spawn.speed_lo > spawn.speed_hi || spawn.speed_lo < 0.0)
    throw ConfigError("spawn speed bounds invalid");
  if (spawn.radius_lo > spawn.radius_hi || spawn.radius_lo <= 0.0)
    throw ConfigError("spawn radius bounds invalid");
  if (spawn.w_linear < 0.0 || spawn.w_ballistic < 0.0 || spawn.w_waypoint < 0.0 ||
      spawn.w_sudden < 0.0)
    throw ConfigError("spawn trajectory weights must be non-negative");
  if (spawn.count > 0 &&
      spawn.w_linear + spawn.w_ballistic + spawn.w_waypoint + spawn.w_sudden <= 0.0)
    throw ConfigError("spawn trajectory weights must not all vanish");
  if (lidar.rays_azimuth < 1 || lidar.rays_elevation < 1)
    throw ConfigError("lidar ray counts must be positive");
  if (lidar.max_range <= 0.0) throw ConfigError("lidar max range must be positive");
  if (camera.fx <= 0.0 || camera.fy <= 0.0 || camera.width < 1 || camera.height < 1)
    throw ConfigError("camera intrinsics invalid");
  if (lidar_percept.eps <= 0.0 || lidar_percept.min_pts < 1 || lidar_percept.v_ds <= 0.0)
    throw ConfigError("lidar clustering parameters invalid");
  if (lidar_percept.m_confirm < 1 || lidar_percept.m_die < 0 || lidar_percept.history_k < 2)
    throw ConfigError("lidar track lifecycle parameters invalid");
  if (camera_percept.n_min < 1 || camera_percept.k_c < 2)
    throw ConfigError("camera refinement parameters invalid");
  threat.validate();
  control.validate();
  predict_backend_from_string(predict.backend);
  if (predict.horizon < 0.0) throw ConfigError("predict horizon must be non-negative");
}

inline nlohmann::json ScenarioConfig::to_json() const {
  nlohmann::json j;
  j["sim"] = {{"dt", sim.dt},
              {"duration", sim.duration},
              {"v_max", sim.v_max},
              {"a_max", sim.a_max},
              {"omega_max", sim.omega_max},
              {"body_radius", sim.body_radius},
              {"mass", sim.mass}};
  j["spawn"] = {{"count", spawn.count},
                {"bearing_lo", spawn.bearing_lo},
                {"bearing_hi", spawn.bearing_hi},
                {"range_lo", spawn.range_lo},
                {"range_hi", spawn.range_hi},
                {"speed_lo", spawn.speed_lo},
                {"speed_hi", spawn.speed_hi},
                {"radius_lo", spawn.radius_lo},
                {"radius_hi", spawn.radius_hi},
                {"w_linear", spawn.w_linear},
                {"w_ballistic", spawn.w_ballistic},
                {"w_waypoint", spawn.w_waypoint},
                {"w_sudden", spawn.w_sudden},
                {"aim_jitter", spawn.aim_jitter}};
  j["lidar"] = {{"rays_azimuth", lidar.rays_azimuth},
                {"rays_elevation", lidar.rays_elevation},
                {"elev_lo", lidar.elev_lo},
                {"elev_hi", lidar.elev_hi},
                {"max_range", lidar.max_range},
                {"sigma_range", lidar.sigma_range},
                {"dropout", lidar.dropout},
                {"sensor_height", lidar.sensor_height}};
  j["camera"] = {{"fx", camera.fx},
                 {"fy", camera.fy},
                 {"width", camera.width},
                 {"height", camera.height},
                 {"mount_height", camera.mount_height},
                 {"far_plane", camera.far_plane},
                 {"sigma_depth", camera.sigma_depth}};
  j["detector"] = {{"sigma_px", detector.sigma_px},
                   {"p_fn", detector.p_fn},
                   {"p_fp", detector.p_fp},
                   {"p_lowconf", detector.p_lowconf},
                   {"min_extent", detector.min_extent}};
  j["lidar_percept"] = {{"eps", lidar_percept.eps},
                        {"min_pts", lidar_percept.min_pts},
                        {"v_ds", lidar_percept.v_ds},
                        {"r_roi", lidar_percept.r_roi},
                        {"ground_margin", lidar_percept.ground_margin},
                        {"gate_xy", lidar_percept.gate_xy},
                        {"m_confirm", lidar_percept.m_confirm},
                        {"m_die", lidar_percept.m_die},
                        {"history_k", lidar_percept.history_k},
                        {"eps_p", lidar_percept.eps_p},
                        {"eps_v", lidar_percept.eps_v},
                        {"sensor_height", lidar_percept.sensor_height},
                        {"kalman",
                         {{"sigma_a", lidar_percept.kalman.sigma_a},
                          {"sigma_z", lidar_percept.kalman.sigma_z},
                          {"init_pos_var", lidar_percept.kalman.init_pos_var},
                          {"init_vel_var", lidar_percept.kalman.init_vel_var}}}};
  j["camera_percept"] = {{"conf_high", camera_percept.conf_high},
                         {"m2_die", camera_percept.m2_die},
                         {"tau_depth", camera_percept.tau_depth},
                         {"n_min", camera_percept.n_min},
                         {"seed_search_px", camera_percept.seed_search_px},
                         {"k_c", camera_percept.k_c},
                         {"lambda_v", camera_percept.lambda_v},
                         {"bridge_tol", camera_percept.bridge_tol}};
  j["threat"] = {{"alpha", threat.alpha},
                 {"gamma", threat.gamma},
                 {"r_safe", threat.r_safe},
                 {"eps", threat.eps},
                 {"n_switch", threat.n_switch},
                 {"t_lo", threat.t_lo},
                 {"t_hi", threat.t_hi},
                 {"camera_stale_frames", threat.camera_stale_frames}};
  j["control"] = {{"k_psi", control.k_psi},
                  {"yaw_sat", control.yaw_sat},
                  {"k_r_min", control.k_r_min},
                  {"k_r_max", control.k_r_max},
                  {"beta_trig", control.beta_trig},
                  {"reflex_horizon", control.reflex_horizon},
                  {"ttc_trig", control.ttc_trig},
                  {"weights",
                   {{"safe", control.weights.safe},
                    {"dir", control.weights.dir},
                    {"ene", control.weights.ene},
                    {"stab", control.weights.stab},
                    {"rec", control.weights.rec}}}};
  j["predict"] = {{"backend", predict.backend}, {"horizon", predict.horizon}};
  return j;
}

inline std::string ScenarioConfig::digest() const {
  // FNV-1a over the canonical dump. nlohmann objects iterate in sorted key
  // order, so equal configs always hash equal regardless of load order.
  const std::string dump = to_json().dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : dump) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace evasim
