#pragma once

#include "evasim/core.hpp"
#include "evasim/rng.hpp"

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

namespace evasim {

constexpr double kGravity = 9.81;  ///< [m/s^2]

/// RNG stream ids; one generator per concern keeps trials reproducible when
/// one consumer changes its draw count.
constexpr std::uint64_t kStreamSpawn = 1;
constexpr std::uint64_t kStreamLidar = 2;
constexpr std::uint64_t kStreamCamera = 3;

enum class ManeuverTag { kNone, kDodgeLeft, kDodgeRight, kRetreatBurst };

/// Planar velocity/yaw-rate reference produced by the controller each frame.
struct Command {
  Vec2 v_ref{0.0, 0.0};       ///< world frame [m/s]
  double yaw_rate_ref = 0.0;  ///< [rad/s]
  double beta = 0.0;          ///< reflex blend weight in [0, 1]
  ManeuverTag tag = ManeuverTag::kNone;
};

enum class TrajectoryType { kLinear, kBallistic, kWaypoint, kSudden };

struct ObstacleTruth {
  int id = 0;
  Vec3 position{0.0, 0.0, 0.0};  ///< sphere center, world frame [m]
  Vec3 velocity{0.0, 0.0, 0.0};  ///< [m/s]
  double radius = 0.2;           ///< [m], > 0
  TrajectoryType trajectory = TrajectoryType::kLinear;
  bool active = true;
  std::string label = "obstacle";  ///< detector class only; shape is always a sphere

  std::vector<Vec3> waypoints;  ///< kWaypoint: visited in order at constant speed
  int waypoint_idx = 0;
  double sudden_time = 0.0;    ///< kSudden: dwell before the velocity jump [s]
  double sudden_factor = 1.0;  ///< kSudden: one-shot speed multiplier
  bool sudden_done = false;
  int ballistic_steps = 0;     ///< kBallistic: flight step counter, see step_obstacle
  double ballistic_v0z = 0.0;  ///< kBallistic: launch vertical speed [m/s]
  bool grounded = false;       ///< kBallistic: true once rolling on the floor
};

struct SimParams {
  double dt = 0.02;          ///< control period [s]
  double duration = 12.0;    ///< trial length [s], long enough for passed obstacles
                             ///< to leave the tracking region so recovery can land
  double v_max = 1.5;        ///< robot speed limit [m/s]
  double a_max = 6.0;        ///< robot acceleration limit [m/s^2]
  double omega_max = 3.0;    ///< robot yaw-rate limit [rad/s]
  double body_radius = 0.3;  ///< robot collision radius [m]
  double mass = 15.0;        ///< robot mass for the effort metric [kg]
};

struct SpawnParams {
  int count = 1;
  double bearing_lo = -M_PI;  ///< spawn bearing around the robot [rad]
  double bearing_hi = M_PI;
  double range_lo = 4.5;  ///< spawn distance [m]
  double range_hi = 7.0;
  double speed_lo = 2.2;  ///< obstacle speed [m/s]
  double speed_hi = 4.5;
  double radius_lo = 0.15;  ///< obstacle radius [m]
  double radius_hi = 0.4;
  double w_linear = 0.3;  ///< trajectory type weights, need not sum to 1
  double w_ballistic = 0.2;
  double w_waypoint = 0.2;
  double w_sudden = 0.3;
  double aim_jitter = 0.3;  ///< radius of the disk around the robot aimed at [m]
};

struct WorldState {
  double time = 0.0;
  RobotState robot;
  std::vector<ObstacleTruth> obstacles;
  bool collided = false;
};

struct CollisionCheck {
  double clearance = std::numeric_limits<double>::infinity();  ///< [m], surface to surface
  bool collided = false;
};

/// Smallest surface-to-surface distance across active obstacles; +inf when
/// there are none. Negative clearance means interpenetration.
inline CollisionCheck check_collision(const WorldState& w, double body_radius) {
  CollisionCheck out;
  for (const ObstacleTruth& o : w.obstacles) {
    if (!o.active) continue;
    const double c = (o.position - w.robot.position).norm() - o.radius - body_radius;
    out.clearance = std::min(out.clearance, c);
  }
  out.collided = out.clearance < 0.0;
  return out;
}

namespace detail {

inline Vec3 clamp_norm(const Vec3& v, double limit) {
  const double n = v.norm();
  return n > limit ? Vec3(v * (limit / n)) : v;
}

inline void step_obstacle(ObstacleTruth& o, double time, double dt) {
  switch (o.trajectory) {
    case TrajectoryType::kLinear:
      break;
    case TrajectoryType::kBallistic:
      // v_z is recomputed from the launch speed and elapsed flight time so it
      // equals v0z - g*t bitwise, instead of drifting by per-step rounding.
      if (!o.grounded) {
        if (o.ballistic_steps == 0) o.ballistic_v0z = o.velocity.z();
        o.ballistic_steps++;
        o.velocity.z() = o.ballistic_v0z - kGravity * (dt * o.ballistic_steps);
      }
      break;
    case TrajectoryType::kWaypoint: {
      if (o.waypoint_idx < static_cast<int>(o.waypoints.size())) {
        const double speed = o.velocity.norm();
        Vec3 to_wp = o.waypoints[o.waypoint_idx] - o.position;
        if (to_wp.norm() <= speed * dt) {
          o.waypoint_idx++;
          if (o.waypoint_idx < static_cast<int>(o.waypoints.size())) {
            to_wp = o.waypoints[o.waypoint_idx] - o.position;
          }
        }
        if (to_wp.norm() > 1e-12 && speed > 0.0) o.velocity = speed * to_wp.normalized();
      }
      break;
    }
    case TrajectoryType::kSudden:
      if (!o.sudden_done && time >= o.sudden_time) {
        o.velocity *= o.sudden_factor;
        o.sudden_done = true;
      }
      break;
  }
  o.position += o.velocity * dt;
  // Ballistic bodies ground to rolling instead of tunneling below the floor.
  if (o.trajectory == TrajectoryType::kBallistic && o.position.z() < o.radius &&
      o.velocity.z() < 0.0) {
    o.position.z() = o.radius;
    o.velocity.z() = 0.0;
    o.grounded = true;
  }
}

}  // namespace detail

/// Advances one control period: first-order velocity tracking with an
/// acceleration clamp for the robot, trajectory models for obstacles,
/// then the collision latch. Symplectic: velocities update before positions.
inline void step_world(WorldState& w, const Command& cmd, const SimParams& sp) {
  Vec3 desired(cmd.v_ref.x(), cmd.v_ref.y(), 0.0);
  desired = detail::clamp_norm(desired, sp.v_max);
  const Vec3 accel = detail::clamp_norm((desired - w.robot.velocity) / sp.dt, sp.a_max);
  w.robot.velocity += accel * sp.dt;
  w.robot.position += w.robot.velocity * sp.dt;
  const double yr = std::clamp(cmd.yaw_rate_ref, -sp.omega_max, sp.omega_max);
  w.robot.yaw_rate = yr;
  w.robot.yaw = wrap_angle(w.robot.yaw + yr * sp.dt);

  for (ObstacleTruth& o : w.obstacles) {
    if (o.active) detail::step_obstacle(o, w.time, sp.dt);
  }

  w.time += sp.dt;
  if (check_collision(w, sp.body_radius).collided) w.collided = true;
}

namespace detail {

inline TrajectoryType sample_type(const SpawnParams& s, Pcg32& rng) {
  const double total = s.w_linear + s.w_ballistic + s.w_waypoint + s.w_sudden;
  double x = rng.uniform(0.0, total);
  if ((x -= s.w_linear) < 0.0) return TrajectoryType::kLinear;
  if ((x -= s.w_ballistic) < 0.0) return TrajectoryType::kBallistic;
  if ((x -= s.w_waypoint) < 0.0) return TrajectoryType::kWaypoint;
  return TrajectoryType::kSudden;
}

}  // namespace detail

/// Builds the seeded initial world. Obstacles spawn on a bearing/range ring
/// and are aimed at a jittered point near the robot so the default suite is
/// dominated by genuine approach trajectories.
inline WorldState spawn_scenario(std::uint64_t seed, const SpawnParams& s, const SimParams& sp) {
  if (s.range_lo > s.range_hi || s.speed_lo > s.speed_hi || s.radius_lo > s.radius_hi ||
      s.bearing_lo > s.bearing_hi) {
    throw ConfigError("spawn ranges must satisfy lo <= hi");
  }
  if (s.speed_hi <= 0.0 || s.range_lo <= 0.0 || s.count < 0) {
    throw ConfigError("spawn ranges must be positive");
  }
  if (s.range_lo / s.speed_hi > sp.duration) {
    throw ConfigError("no spawnable obstacle can reach the robot within the trial duration");
  }
  const double total_w = s.w_linear + s.w_ballistic + s.w_waypoint + s.w_sudden;
  if (total_w <= 0.0 || s.w_linear < 0 || s.w_ballistic < 0 || s.w_waypoint < 0 || s.w_sudden < 0) {
    throw ConfigError("trajectory type weights must be non-negative with a positive sum");
  }

  WorldState w;
  w.robot.position = Vec3::Zero();
  w.robot.yaw = 0.0;

  Pcg32 rng(seed, kStreamSpawn);
  for (int i = 0; i < s.count; ++i) {
    ObstacleTruth o;
    o.id = i;
    o.trajectory = detail::sample_type(s, rng);
    o.radius = rng.uniform(s.radius_lo, s.radius_hi);
    const double bearing = wrap_angle(rng.uniform(s.bearing_lo, s.bearing_hi));
    const double range = rng.uniform(s.range_lo, s.range_hi);
    const double speed = rng.uniform(s.speed_lo, s.speed_hi);

    o.position = Vec3(range * std::cos(bearing), range * std::sin(bearing), o.radius);

    const double jitter_ang = rng.uniform(0.0, 2.0 * M_PI);
    const double jitter_rad = s.aim_jitter * std::sqrt(rng.uniform());
    const Vec3 aim(jitter_rad * std::cos(jitter_ang), jitter_rad * std::sin(jitter_ang),
                   o.radius);

    Vec3 dir = aim - o.position;
    dir.z() = 0.0;
    dir = dir.norm() > 1e-12 ? Vec3(dir.normalized()) : Vec3(-std::cos(bearing), -std::sin(bearing), 0.0);
    o.velocity = speed * dir;

    switch (o.trajectory) {
      case TrajectoryType::kLinear:
        o.label = "ball";
        break;
      case TrajectoryType::kBallistic:
        o.label = "ball";
        o.position.z() = o.radius + rng.uniform(0.5, 1.5);
        o.velocity.z() = rng.uniform(0.0, 2.0);
        break;
      case TrajectoryType::kWaypoint: {
        o.label = "human";
        const Vec3 perp(-dir.y(), dir.x(), 0.0);
        const double side = rng.bernoulli(0.5) ? 1.0 : -1.0;
        const double lateral = side * rng.uniform(0.5, 1.5);
        o.waypoints = {o.position + 0.5 * (aim - o.position) + lateral * perp, aim,
                       aim + (aim - o.position)};
        break;
      }
      case TrajectoryType::kSudden:
        o.label = "human";
        o.sudden_time = rng.uniform(0.6, 2.0);
        o.sudden_factor = rng.uniform(1.5, 3.0);
        break;
    }
    w.obstacles.push_back(std::move(o));
  }
  return w;
}

}  // namespace evasim
