#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "evasim/core.hpp"
#include "evasim/simworld.hpp"

namespace evasim {

struct RewardWeights {
  double safe = 1.0;
  double dir = 0.5;
  double ene = 0.1;
  double stab = 0.1;
  double rec = 0.3;
};

struct ControlGains {
  double k_psi = 2.0;
  double yaw_sat = 3.0;     // rad/s
  double k_r_min = 0.2;     // m/s
  double k_r_max = 1.2;     // m/s
  double beta_trig = 0.5;
  double reflex_horizon = 0.5;  // s
  double ttc_trig = 1.0;        // s, fixed-rule trigger for the no-threat ablation
  RewardWeights weights;

  void validate() const {
    if (k_psi <= 0.0 || yaw_sat <= 0.0) throw ConfigError("yaw gains must be positive");
    if (k_r_min > k_r_max) throw ConfigError("velocity gain bounds inverted");
    if (beta_trig <= 0.0 || beta_trig >= 1.0) throw ConfigError("beta_trig must be in (0,1)");
    if (reflex_horizon <= 0.0) throw ConfigError("reflex horizon must be positive");
    if (weights.safe < 0 || weights.dir < 0 || weights.ene < 0 || weights.stab < 0 ||
        weights.rec < 0) {
      throw ConfigError("reward weights must be non-negative");
    }
  }
};

inline double schedule_g(double t, double t_lo, double t_hi) {
  return std::clamp((t - t_lo) / (t_hi - t_lo), 0.0, 1.0);
}

// Yaw-rate reference that turns the robot toward a target the coarse tracker
// rates as more threatening than the currently fused estimate; the command
// fades to zero once the fused view has caught up.
inline double reorient(const RobotState& robot, const Vec3& dp, double t_lidar, double t_fused,
                       const ControlGains& gains) {
  const double gap = std::max(0.0, t_lidar - t_fused);
  const double phi = std::atan2(dp.y(), dp.x());
  const double raw = gains.k_psi * gap * wrap_angle(phi - robot.yaw);
  return std::clamp(raw, -gains.yaw_sat, gains.yaw_sat);
}

// Planar retreat: move away from the obstacle at a threat-scheduled speed.
class Navigator {
 public:
  Vec2 step(const Vec2& robot_xy, const Vec2& obstacle_xy, double g_value,
            const ControlGains& gains) {
    const Vec2 away = robot_xy - obstacle_xy;
    if (away.norm() > 1e-9) {
      u_ = away.normalized();
    }  // else: coincident, keep retreating the way we last did (+x before any history)
    const double speed = gains.k_r_min + (gains.k_r_max - gains.k_r_min) * g_value;
    return speed * u_;
  }

  const Vec2& retreat_direction() const { return u_; }

 private:
  Vec2 u_ = Vec2(1.0, 0.0);
};

struct RolloutTrace {
  double dt = 0.02;
  std::vector<Vec3> robot_pos;     // n+1 samples including the start state
  std::vector<Vec3> obstacle_pos;  // n+1 samples
  std::vector<Vec2> accel;         // n commanded accelerations
  Vec2 prev_accel = Vec2::Zero();  // command applied just before the window
  Vec2 final_velocity = Vec2::Zero();
  double final_heading_error = 0.0;
  double clearance_offset = 0.0;  // combined body + obstacle radius
  // Unit direction of the obstacle's travel, zero when it is not meaningfully
  // moving; selects between lateral-escape and radial-retreat displacement
  // credit in the direction term.
  Vec2 approach_dir = Vec2::Zero();
  // Clearance floor from beyond the simulated window (constant-velocity
  // closest approach); +inf when not evaluated.
  double post_window_clearance = std::numeric_limits<double>::infinity();
};

inline double min_clearance(const RolloutTrace& trace) {
  double best = trace.post_window_clearance;
  for (size_t i = 0; i < trace.robot_pos.size(); ++i) {
    best = std::min(best,
                    (trace.robot_pos[i] - trace.obstacle_pos[i]).norm() - trace.clearance_offset);
  }
  return best;
}

inline double reward_eval(const RolloutTrace& trace, const RewardWeights& weights, double g_value,
                          double r_safe_scale) {
  const double r_safe = -std::exp(-min_clearance(trace) / r_safe_scale);

  Vec2 toward = (trace.obstacle_pos.front() - trace.robot_pos.front()).head<2>();
  if (toward.norm() > 1e-9) {
    toward.normalize();
  } else {
    toward.setZero();
  }
  const Vec2 disp = (trace.robot_pos.back() - trace.robot_pos.front()).head<2>();
  // Escaping a moving obstacle means leaving its path sideways; backpedaling
  // along the approach line only postpones the encounter and earns nothing.
  // Against a static obstacle the radial component is the escape.
  const double escape = trace.approach_dir.squaredNorm() > 0.0
                            ? (disp - disp.dot(trace.approach_dir) * trace.approach_dir).norm()
                            : disp.dot(-toward);
  const double r_dir = -std::max(0.0, trace.final_velocity.dot(toward)) + escape;

  double r_ene = 0.0;
  double r_stab = 0.0;
  Vec2 prev = trace.prev_accel;
  for (const Vec2& a : trace.accel) {
    r_ene -= a.squaredNorm() * trace.dt;
    r_stab -= (a - prev).squaredNorm() * trace.dt;
    prev = a;
  }

  const double r_rec = -(trace.final_velocity.norm() + std::abs(trace.final_heading_error));

  return g_value * (weights.safe * r_safe + weights.dir * r_dir + weights.ene * r_ene +
                    weights.stab * r_stab + weights.rec * r_rec);
}

struct ReflexChoice {
  ManeuverTag tag = ManeuverTag::kDodgeLeft;
  Vec2 v_ref = Vec2::Zero();
  double score = 0.0;
  double min_clearance = 0.0;  ///< rollout clearance floor of the chosen primitive
};

namespace detail {

inline RolloutTrace roll_primitive(const RobotState& robot, const Vec2& v_cmd,
                                   const Vec3& obs_pos, const Vec3& obs_vel, double obs_radius,
                                   const SimParams& sim, const Vec2& prev_accel, int steps) {
  RolloutTrace trace;
  trace.dt = sim.dt;
  trace.prev_accel = prev_accel;
  trace.clearance_offset = sim.body_radius + obs_radius;
  const Vec2 obs_vel_xy = obs_vel.head<2>();
  if (obs_vel_xy.norm() > 0.1) trace.approach_dir = obs_vel_xy.normalized();
  Vec3 rp = robot.position;
  Vec3 rv = robot.velocity;
  Vec3 op = obs_pos;
  trace.robot_pos.push_back(rp);
  trace.obstacle_pos.push_back(op);
  const Vec3 desired = clamp_norm(Vec3(v_cmd.x(), v_cmd.y(), 0.0), sim.v_max);
  for (int i = 0; i < steps; ++i) {
    const Vec3 accel = clamp_norm((desired - rv) / sim.dt, sim.a_max);
    rv += accel * sim.dt;
    rp += rv * sim.dt;
    op += obs_vel * sim.dt;
    trace.accel.push_back(accel.head<2>());
    trace.robot_pos.push_back(rp);
    trace.obstacle_pos.push_back(op);
  }
  trace.final_velocity = rv.head<2>();
  trace.final_heading_error = 0.0;  // primitives translate, the heading holds

  // Constant-velocity closest approach beyond the window keeps the scorer from
  // favoring dodges that drift into the obstacle's path right after it ends.
  const Vec3 relp = trace.robot_pos.back() - trace.obstacle_pos.back();
  const Vec3 relv = rv - obs_vel;
  const double vv = relv.squaredNorm();
  const double t_star = vv > 1e-12 ? std::max(0.0, -relp.dot(relv) / vv) : 0.0;
  trace.post_window_clearance = (relp + t_star * relv).norm() - trace.clearance_offset;
  return trace;
}

}  // namespace detail

// Scores a small maneuver library against the obstacle forecast and picks the
// best; commanded speed scales with the threat schedule. Dodges sidestep the
// approach line with a back-off tilt, so their quality rides on how well the
// obstacle's travel direction has been estimated. A non-kNone hold pins the
// selection to that primitive: a maneuver in flight executes as a unit, its
// vector refreshed against the latest estimate but its side never flipped.
inline ReflexChoice reflex_select(const RobotState& robot, const Vec3& obs_pos,
                                  const Vec3& obs_vel, double obs_radius, double g_value,
                                  const ControlGains& gains, const SimParams& sim,
                                  double r_safe_scale, const Vec2& prev_accel,
                                  ManeuverTag hold = ManeuverTag::kNone) {
  constexpr double kDodgeBackoff = 0.35;
  const double speed = sim.v_max * g_value;
  Vec2 away = (robot.position - obs_pos).head<2>();
  if (away.norm() > 1e-9) {
    away.normalize();
  } else {
    away = Vec2(-std::cos(robot.yaw), -std::sin(robot.yaw));
  }
  const Vec2 obs_vel_xy = obs_vel.head<2>();
  // Approach axis: the obstacle's travel when it is moving, the sight line
  // otherwise (a static obstacle "approaches" along the axis that joins you).
  const Vec2 approach = obs_vel_xy.norm() > 0.1 ? Vec2(obs_vel_xy.normalized()) : Vec2(-away);
  const Vec2 side_l = Vec2(approach.y(), -approach.x());
  const Vec2 dodge_l = (side_l + kDodgeBackoff * away).normalized();
  const Vec2 dodge_r = (-side_l + kDodgeBackoff * away).normalized();
  const int steps = std::max(1, static_cast<int>(std::lround(gains.reflex_horizon / sim.dt)));

  const std::pair<ManeuverTag, Vec2> library[3] = {
      {ManeuverTag::kDodgeLeft, speed * dodge_l},
      {ManeuverTag::kDodgeRight, speed * dodge_r},
      {ManeuverTag::kRetreatBurst, speed * away},
  };
  ReflexChoice best;
  bool first = true;
  for (const auto& [tag, v_cmd] : library) {
    if (hold != ManeuverTag::kNone && tag != hold) continue;
    const RolloutTrace trace = detail::roll_primitive(robot, v_cmd, obs_pos, obs_vel, obs_radius,
                                                      sim, prev_accel, steps);
    const double score = reward_eval(trace, gains.weights, g_value, r_safe_scale);
    const ReflexChoice choice{tag, v_cmd, score, min_clearance(trace)};
#ifdef EVASIM_TRACE
    std::fprintf(stderr, "  reflex tag=%d v=(%.3f,%.3f) score=%.5f minclr=%.3f\n",
                 static_cast<int>(tag), v_cmd.x(), v_cmd.y(), score, choice.min_clearance);
#endif
    if (first || score > best.score) {
      best = choice;
      first = false;
    }
  }
  return best;
}

inline Command blend(const Vec2& v_nav, double yaw_nav, const ReflexChoice& reflex,
                     double yaw_reflex, double beta, const ControlGains& gains) {
  Command cmd;
  cmd.v_ref = (1.0 - beta) * v_nav + beta * reflex.v_ref;
  cmd.yaw_rate_ref = (1.0 - beta) * yaw_nav + beta * yaw_reflex;
  cmd.beta = beta;
  cmd.tag = beta >= gains.beta_trig ? reflex.tag : ManeuverTag::kNone;
  return cmd;
}

}  // namespace evasim
