#include "evasim/simworld.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace evasim {
namespace {

SpawnParams linear_only() {
  SpawnParams s;
  s.w_linear = 1.0;
  s.w_ballistic = s.w_waypoint = s.w_sudden = 0.0;
  return s;
}

TEST(Spawn, DeterministicPerSeed) {
  const SimParams sp;
  SpawnParams s;
  s.count = 4;
  const WorldState a = spawn_scenario(42, s, sp);
  const WorldState b = spawn_scenario(42, s, sp);
  ASSERT_EQ(a.obstacles.size(), b.obstacles.size());
  for (size_t i = 0; i < a.obstacles.size(); ++i) {
    EXPECT_EQ(a.obstacles[i].position, b.obstacles[i].position);
    EXPECT_EQ(a.obstacles[i].velocity, b.obstacles[i].velocity);
    EXPECT_EQ(a.obstacles[i].radius, b.obstacles[i].radius);
    EXPECT_EQ(a.obstacles[i].trajectory, b.obstacles[i].trajectory);
  }
  const WorldState c = spawn_scenario(43, s, sp);
  EXPECT_NE(a.obstacles[0].position, c.obstacles[0].position);
}

TEST(Spawn, BearingsStayInRequestedRange) {
  const SimParams sp;
  SpawnParams s = linear_only();
  s.bearing_lo = M_PI - 0.1;
  s.bearing_hi = M_PI + 0.1;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const WorldState w = spawn_scenario(seed, s, sp);
    const Vec3& p = w.obstacles[0].position;
    const double bearing = std::atan2(p.y(), p.x());
    // The range wraps across pi, so compare angular distance to pi.
    EXPECT_LE(std::abs(wrap_angle(bearing - M_PI)), 0.1 + 1e-12) << "seed " << seed;
  }
}

TEST(Spawn, DegenerateSpeedRangeIsExact) {
  const SimParams sp;
  SpawnParams s = linear_only();
  s.speed_lo = s.speed_hi = 1.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const WorldState w = spawn_scenario(seed, s, sp);
    EXPECT_DOUBLE_EQ(w.obstacles[0].velocity.norm(), 1.0);
  }
}

TEST(Spawn, RejectsUnreachableRanges) {
  SimParams sp;
  sp.duration = 6.0;
  SpawnParams s = linear_only();
  s.range_lo = s.range_hi = 100.0;
  s.speed_lo = s.speed_hi = 1.0;
  EXPECT_THROW(spawn_scenario(0, s, sp), ConfigError);
}

TEST(Spawn, RejectsInvertedRanges) {
  const SimParams sp;
  SpawnParams s = linear_only();
  s.radius_lo = 0.5;
  s.radius_hi = 0.2;
  EXPECT_THROW(spawn_scenario(0, s, sp), ConfigError);
}

TEST(StepWorld, ZeroCommandStaticObstacleIsFixedPoint) {
  const SimParams sp;
  WorldState w;
  ObstacleTruth o;
  o.position = Vec3(3.0, 0.0, 0.2);
  o.velocity = Vec3::Zero();
  w.obstacles.push_back(o);
  step_world(w, Command{}, sp);
  EXPECT_EQ(w.robot.position, Vec3::Zero());
  EXPECT_EQ(w.robot.velocity, Vec3::Zero());
  EXPECT_EQ(w.obstacles[0].position, Vec3(3.0, 0.0, 0.2));
  EXPECT_DOUBLE_EQ(w.time, sp.dt);
}

TEST(StepWorld, LinearObstacleAdvancesOneEulerStep) {
  const SimParams sp;
  WorldState w;
  ObstacleTruth o;
  o.position = Vec3(2.0, 0.0, 0.2);
  o.velocity = Vec3(-1.0, 0.0, 0.0);
  w.obstacles.push_back(o);
  step_world(w, Command{}, sp);
  EXPECT_DOUBLE_EQ(w.obstacles[0].position.x(), 2.0 - 0.02);
}

TEST(StepWorld, BallisticGravityPerStep) {
  const SimParams sp;
  WorldState w;
  ObstacleTruth o;
  o.trajectory = TrajectoryType::kBallistic;
  o.position = Vec3(0.0, 0.0, 50.0);
  o.velocity = Vec3(0.0, 0.0, 0.0);
  w.obstacles.push_back(o);
  step_world(w, Command{}, sp);
  EXPECT_DOUBLE_EQ(w.obstacles[0].velocity.z(), -kGravity * sp.dt);
  step_world(w, Command{}, sp);
  EXPECT_DOUBLE_EQ(w.obstacles[0].velocity.z(), -2.0 * kGravity * sp.dt);
}

TEST(StepWorld, BallisticMatchesSymplecticClosedForm) {
  const SimParams sp;
  WorldState w;
  ObstacleTruth o;
  o.trajectory = TrajectoryType::kBallistic;
  o.position = Vec3(0.0, 0.0, 130.0);
  o.velocity = Vec3(1.0, 0.0, 3.0);
  w.obstacles.push_back(o);
  const Vec3 p0 = o.position;
  const Vec3 v0 = o.velocity;
  const int n = 250;  // 5 s at 0.02 s
  for (int k = 0; k < n; ++k) step_world(w, Command{}, sp);
  const double t = n * sp.dt;
  EXPECT_DOUBLE_EQ(w.obstacles[0].velocity.z(), v0.z() - kGravity * t);
  const Vec3 expect(p0.x() + v0.x() * t, p0.y() + v0.y() * t,
                    p0.z() + v0.z() * t - kGravity * sp.dt * sp.dt * (n * (n + 1.0)) / 2.0);
  EXPECT_LT((w.obstacles[0].position - expect).norm(), 1e-6);
}

TEST(StepWorld, KinematicBoundsHold) {
  const SimParams sp;
  WorldState w;
  Pcg32 rng(7);
  for (int k = 0; k < 500; ++k) {
    Command cmd;
    cmd.v_ref = Vec2(rng.uniform(-5, 5), rng.uniform(-5, 5));
    cmd.yaw_rate_ref = rng.uniform(-10, 10);
    step_world(w, cmd, sp);
    EXPECT_LE(w.robot.velocity.norm(), sp.v_max + 1e-12);
    EXPECT_LE(std::abs(w.robot.yaw_rate), sp.omega_max);
    EXPECT_GT(w.robot.yaw, -M_PI);
    EXPECT_LE(w.robot.yaw, M_PI);
  }
}

TEST(StepWorld, CollisionLatchIsMonotone) {
  const SimParams sp;
  WorldState w;
  ObstacleTruth o;
  o.position = Vec3(0.4, 0.0, 0.2);  // overlapping the robot body
  o.radius = 0.2;
  o.velocity = Vec3(1.0, 0.0, 0.0);  // escapes within a couple of seconds
  w.obstacles.push_back(o);
  step_world(w, Command{}, sp);
  EXPECT_TRUE(w.collided);
  for (int k = 0; k < 100; ++k) step_world(w, Command{}, sp);
  EXPECT_TRUE(w.collided);
  EXPECT_GT(check_collision(w, sp.body_radius).clearance, 0.0);
}

TEST(CheckCollision, ClearanceArithmetic) {
  WorldState w;
  ObstacleTruth o;
  o.position = Vec3(5.0, 0.0, 0.0);
  o.radius = 0.2;
  w.obstacles.push_back(o);
  const CollisionCheck cc = check_collision(w, 0.3);
  EXPECT_DOUBLE_EQ(cc.clearance, 4.5);
  EXPECT_FALSE(cc.collided);
}

TEST(CheckCollision, CoincidentCentersCollide) {
  WorldState w;
  ObstacleTruth o;
  o.position = Vec3::Zero();
  o.radius = 0.2;
  w.obstacles.push_back(o);
  const CollisionCheck cc = check_collision(w, 0.3);
  EXPECT_LT(cc.clearance, 0.0);
  EXPECT_TRUE(cc.collided);
}

TEST(CheckCollision, EmptyWorldIsInfinitelyClear) {
  const WorldState w;
  const CollisionCheck cc = check_collision(w, 0.3);
  EXPECT_TRUE(std::isinf(cc.clearance));
  EXPECT_FALSE(cc.collided);
}

TEST(Waypoint, FollowsDoglegPath) {
  const SimParams sp;
  WorldState w;
  ObstacleTruth o;
  o.trajectory = TrajectoryType::kWaypoint;
  o.position = Vec3(4.0, 0.0, 0.2);
  o.velocity = Vec3(-1.0, 0.0, 0.0);
  o.waypoints = {Vec3(2.0, 1.0, 0.2), Vec3(0.0, 0.0, 0.2)};
  w.obstacles.push_back(o);
  // Reaches the lateral waypoint, then the origin, then passes through.
  double min_d_wp = 1e9;
  double min_d_goal = 1e9;
  for (int k = 0; k < 400; ++k) {
    step_world(w, Command{}, sp);
    min_d_wp = std::min(min_d_wp, (w.obstacles[0].position - Vec3(2.0, 1.0, 0.2)).norm());
    min_d_goal = std::min(min_d_goal, (w.obstacles[0].position - Vec3(0.0, 0.0, 0.2)).norm());
  }
  EXPECT_LT(min_d_wp, 0.05);
  EXPECT_LT(min_d_goal, 0.05);
}

TEST(Sudden, VelocityJumpHappensOnce) {
  const SimParams sp;
  WorldState w;
  ObstacleTruth o;
  o.trajectory = TrajectoryType::kSudden;
  o.position = Vec3(5.0, 0.0, 0.2);
  o.velocity = Vec3(-1.0, 0.0, 0.0);
  o.sudden_time = 0.5;
  o.sudden_factor = 2.0;
  w.obstacles.push_back(o);
  for (int k = 0; k < 20; ++k) step_world(w, Command{}, sp);  // t=0.4
  EXPECT_DOUBLE_EQ(w.obstacles[0].velocity.x(), -1.0);
  for (int k = 0; k < 10; ++k) step_world(w, Command{}, sp);  // t=0.6
  EXPECT_DOUBLE_EQ(w.obstacles[0].velocity.x(), -2.0);
  for (int k = 0; k < 100; ++k) step_world(w, Command{}, sp);
  EXPECT_DOUBLE_EQ(w.obstacles[0].velocity.x(), -2.0);
}

}  // namespace
}  // namespace evasim
