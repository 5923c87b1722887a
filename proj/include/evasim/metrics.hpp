#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "evasim/core.hpp"

namespace evasim {

/// One control step of a trial as seen by the evaluator. Clearance and TTC
/// are ground truth; beta, fused threat and target id echo the controller.
struct StepLog {
  double t = 0.0;
  Vec3 robot_pos = Vec3::Zero();
  Vec3 robot_vel = Vec3::Zero();
  double yaw = 0.0;
  double beta = 0.0;
  double t_fused = 0.0;
  int target_id = -1;
  double d_clear = std::numeric_limits<double>::infinity();
  double ttc_truth = std::numeric_limits<double>::infinity();
  Vec3 a_cmd = Vec3::Zero();
};

struct TrialMetrics {
  double d_min = std::numeric_limits<double>::infinity();
  double t_closest = 0.0;
  std::optional<double> t_trig;
  std::optional<double> ttc_at_trig;
  std::optional<double> tnl;
  std::optional<double> energy;
  std::optional<double> t_rec;
};

struct TrialResult {
  int seed = 0;
  std::string variant;
  bool collided = false;
  bool success = false;
  double final_speed = 0.0;
  double spawn_bearing = 0.0;  ///< initial bearing of the first obstacle [rad]
  TrialMetrics metrics;
  std::vector<StepLog> steps;
};

/// Scans a step log for the trial-level metrics. The trigger is the first
/// beta crossing; lead time is normalized by the ground-truth TTC at that
/// instant. Effort integrates the planar work-rate surrogate m*|a|*|v| from
/// the trigger to recovery, where recovery means the robot has slowed below
/// 0.1 m/s after the closest approach with the blend released, capped at the
/// end of the trial.
inline TrialMetrics compute_metrics(const std::vector<StepLog>& steps, double beta_trig,
                                    double mass, double dt) {
  TrialMetrics m;
  if (steps.empty()) return m;

  std::size_t closest_idx = 0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i].d_clear < m.d_min) {
      m.d_min = steps[i].d_clear;
      closest_idx = i;
    }
  }
  m.t_closest = steps[closest_idx].t;

  std::size_t trig_idx = steps.size();
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i].beta >= beta_trig) {
      trig_idx = i;
      break;
    }
  }
  if (trig_idx == steps.size()) return m;

  m.t_trig = steps[trig_idx].t;
  m.ttc_at_trig = steps[trig_idx].ttc_truth;
  if (*m.ttc_at_trig > 0.0 && std::isfinite(*m.ttc_at_trig))
    m.tnl = (m.t_closest - *m.t_trig) / *m.ttc_at_trig;

  double t_rec = steps.back().t;
  for (std::size_t i = closest_idx + 1; i < steps.size(); ++i) {
    if (steps[i].robot_vel.norm() < 0.1 && steps[i].beta < beta_trig) {
      t_rec = steps[i].t;
      break;
    }
  }
  m.t_rec = t_rec;

  double e = 0.0;
  for (std::size_t i = trig_idx; i < steps.size() && steps[i].t <= t_rec; ++i)
    e += mass * steps[i].a_cmd.norm() * steps[i].robot_vel.norm() * dt;
  m.energy = e;
  return m;
}

namespace detail {

inline std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return std::string(buf);
}

}  // namespace detail

inline void write_steps_csv(std::ostream& out, const std::vector<StepLog>& steps) {
  out << "t,px,py,pz,vx,vy,yaw,beta,T_fused,target_id,d_clear\n";
  for (const StepLog& s : steps) {
    out << detail::fmt_g(s.t) << ',' << detail::fmt_g(s.robot_pos.x()) << ','
        << detail::fmt_g(s.robot_pos.y()) << ',' << detail::fmt_g(s.robot_pos.z()) << ','
        << detail::fmt_g(s.robot_vel.x()) << ',' << detail::fmt_g(s.robot_vel.y()) << ','
        << detail::fmt_g(s.yaw) << ',' << detail::fmt_g(s.beta) << ','
        << detail::fmt_g(s.t_fused) << ',' << s.target_id << ','
        << detail::fmt_g(s.d_clear) << '\n';
  }
}

/// One result line for the JSONL stream. Keys serialize in sorted order and
/// doubles round-trip exactly, so identical trials produce identical bytes.
inline std::string trial_to_jsonl(const TrialResult& r) {
  nlohmann::json j;
  j["seed"] = r.seed;
  j["variant"] = r.variant;
  j["success"] = r.success;
  j["collided"] = r.collided;
  j["final_speed"] = r.final_speed;
  j["spawn_bearing"] = r.spawn_bearing;
  j["d_min"] = r.metrics.d_min;
  j["t_closest"] = r.metrics.t_closest;
  auto opt = [&j](const char* key, const std::optional<double>& v) {
    if (v)
      j[key] = *v;
    else
      j[key] = nullptr;
  };
  opt("t_trig", r.metrics.t_trig);
  opt("ttc_at_trig", r.metrics.ttc_at_trig);
  opt("tnl", r.metrics.tnl);
  opt("energy", r.metrics.energy);
  opt("t_rec", r.metrics.t_rec);
  return j.dump();
}

}  // namespace evasim
