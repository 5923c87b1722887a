#include "evasim/control.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "evasim/rng.hpp"
#include "evasim/threat.hpp"

namespace evasim {
namespace {

TEST(ScheduleG, ClampAndMidpoint) {
  EXPECT_DOUBLE_EQ(schedule_g(0.1, 0.2, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(schedule_g(0.2, 0.2, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(schedule_g(1.0, 0.2, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(schedule_g(7.0, 0.2, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(schedule_g(0.6, 0.2, 1.0), 0.5);
}

TEST(Reorient, ZeroWhenFusedCoversLidar) {
  const ControlGains gains;
  RobotState robot;
  EXPECT_DOUBLE_EQ(reorient(robot, Vec3(-2, 1, 0), 0.5, 0.5, gains), 0.0);
  EXPECT_DOUBLE_EQ(reorient(robot, Vec3(-2, 1, 0), 0.5, 0.9, gains), 0.0);
}

TEST(Reorient, ZeroWhenTargetDeadAhead) {
  const ControlGains gains;
  RobotState robot;
  robot.yaw = 0.7;
  const Vec3 dp(2.0 * std::cos(0.7), 2.0 * std::sin(0.7), 0.0);
  EXPECT_NEAR(reorient(robot, dp, 1.0, 0.0, gains), 0.0, 1e-12);
}

TEST(Reorient, SignFollowsHeadingErrorAndSaturates) {
  const ControlGains gains;
  for (int i = 0; i < 72; ++i) {
    RobotState robot;
    robot.yaw = -M_PI + 0.0873 * i;
    const Vec3 dp(-3.0, 0.5, 0.0);  // rear-left target
    const double err = wrap_angle(std::atan2(dp.y(), dp.x()) - robot.yaw);
    const double cmd = reorient(robot, dp, 1.5, 0.2, gains);
    EXPECT_LE(std::abs(cmd), gains.yaw_sat);
    if (std::abs(err) > 1e-9) {
      EXPECT_GT(cmd * err, 0.0) << "yaw " << robot.yaw;
    }
  }
  // Large gap and near-pi error pin the command at the saturation rail.
  RobotState robot;
  EXPECT_DOUBLE_EQ(reorient(robot, Vec3(-3, 0.1, 0), 2.0, 0.0, gains), gains.yaw_sat);
}

TEST(Reorient, StaticRearTargetConvergesWithinTwoSeconds) {
  const ControlGains gains;
  const ThreatParams tp;
  const SimParams sim;
  // Close static obstacle behind the robot: strong proximity threat from the
  // coarse tracker, nothing fused yet, so the full gap drives the turn.
  const Vec3 obstacle(-0.45, 0.0, 0.0);
  WorldState w;
  const double t_lidar = threat(obstacle - w.robot.position, Vec3::Zero(), tp);
  ASSERT_GT(t_lidar, 1.5);

  double prev_err = std::abs(wrap_angle(std::atan2(0.0, -0.45) - w.robot.yaw));
  double converged_at = -1.0;
  for (int step = 0; step < 150; ++step) {
    Command cmd;
    cmd.yaw_rate_ref = reorient(w.robot, obstacle - w.robot.position, t_lidar, 0.0, gains);
    step_world(w, cmd, sim);
    const double err = std::abs(wrap_angle(std::atan2(0.0, -0.45) - w.robot.yaw));
    EXPECT_LE(err, prev_err + 1e-12);
    prev_err = err;
    if (converged_at < 0.0 && err < 0.05) converged_at = w.time;
  }
  ASSERT_GE(converged_at, 0.0);
  EXPECT_LT(converged_at, 2.0);
}

TEST(Navigate, RetreatsOppositeObstacleWithScheduledSpeed) {
  const ControlGains gains;
  Navigator nav;
  const Vec2 v0 = nav.step(Vec2(0, 0), Vec2(0, 3), 0.0, gains);
  EXPECT_NEAR(v0.x(), 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(v0.y(), -gains.k_r_min);
  const Vec2 v1 = nav.step(Vec2(0, 0), Vec2(0, 3), 1.0, gains);
  EXPECT_DOUBLE_EQ(v1.y(), -gains.k_r_max);
  const Vec2 vh = nav.step(Vec2(0, 0), Vec2(0, 3), 0.5, gains);
  EXPECT_DOUBLE_EQ(vh.norm(), 0.5 * (gains.k_r_min + gains.k_r_max));
}

TEST(Navigate, CoincidentFallsBackToPreviousDirection) {
  const ControlGains gains;
  Navigator nav;
  nav.step(Vec2(0, 0), Vec2(-2, 0), 1.0, gains);  // retreat along +x
  const Vec2 v = nav.step(Vec2(0, 0), Vec2(0, 0), 1.0, gains);
  EXPECT_DOUBLE_EQ(v.x(), gains.k_r_max);
  EXPECT_DOUBLE_EQ(v.y(), 0.0);

  Navigator fresh;
  const Vec2 v2 = fresh.step(Vec2(1, 1), Vec2(1, 1), 1.0, gains);
  EXPECT_DOUBLE_EQ(v2.x(), gains.k_r_max);  // +x default with no history
}

RolloutTrace static_trace(double clearance) {
  RolloutTrace trace;
  trace.clearance_offset = 0.5;
  const Vec3 robot(0, 0, 0);
  const Vec3 obstacle(clearance + trace.clearance_offset, 0, 0);
  for (int i = 0; i < 6; ++i) {
    trace.robot_pos.push_back(robot);
    trace.obstacle_pos.push_back(obstacle);
    if (i < 5) trace.accel.push_back(Vec2::Zero());
  }
  return trace;
}

TEST(RewardEval, NullActionLeavesOnlySafetyTerm) {
  const RewardWeights weights;
  const double clearance = 4.0;
  const double r = reward_eval(static_trace(clearance), weights, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(r, weights.safe * -std::exp(-clearance));
}

TEST(RewardEval, ZeroScheduleZeroesReward) {
  const RewardWeights weights;
  RolloutTrace trace = static_trace(0.3);
  trace.accel.assign(5, Vec2(3.0, -2.0));
  trace.final_velocity = Vec2(1.0, 0.5);
  trace.final_heading_error = 0.7;
  EXPECT_DOUBLE_EQ(reward_eval(trace, weights, 0.0, 1.0), 0.0);
}

TEST(RewardEval, SmallerClearanceScoresLower) {
  const RewardWeights weights;
  const double tight = reward_eval(static_trace(0.2), weights, 1.0, 1.0);
  const double roomy = reward_eval(static_trace(1.2), weights, 1.0, 1.0);
  EXPECT_LT(tight, roomy);
}

TEST(RewardEval, EnergyAndStabilityPenalizeActuation) {
  const RewardWeights weights;
  RolloutTrace calm = static_trace(2.0);
  RolloutTrace busy = static_trace(2.0);
  busy.accel.assign(5, Vec2(2.0, 0.0));
  EXPECT_LT(reward_eval(busy, weights, 1.0, 1.0), reward_eval(calm, weights, 1.0, 1.0));
}

TEST(ReflexSelect, HeadOnSymmetryBreaksTowardDodgeLeft) {
  const ControlGains gains;
  const SimParams sim;
  RobotState robot;  // facing +x
  const ReflexChoice choice = reflex_select(robot, Vec3(3, 0, 0), Vec3(-1.5, 0, 0), 0.3, 1.0,
                                            gains, sim, 1.0, Vec2::Zero());
  EXPECT_EQ(choice.tag, ManeuverTag::kDodgeLeft);
  EXPECT_GT(choice.v_ref.y(), 0.0);
}

TEST(ReflexSelect, LeftApproachPushesRightward) {
  const ControlGains gains;
  const SimParams sim;
  RobotState robot;  // facing +x; obstacle closes in from the left (+y)
  const ReflexChoice choice = reflex_select(robot, Vec3(0, 3, 0), Vec3(0, -1.5, 0), 0.3, 1.0,
                                            gains, sim, 1.0, Vec2::Zero());
  EXPECT_LT(choice.v_ref.y(), 0.0);
}

TEST(ReflexSelect, ZeroScheduleZeroesCommandedSpeed) {
  const ControlGains gains;
  const SimParams sim;
  RobotState robot;
  const ReflexChoice choice = reflex_select(robot, Vec3(3, 0, 0), Vec3(-0.1, 0, 0), 0.3, 0.0,
                                            gains, sim, 1.0, Vec2::Zero());
  EXPECT_DOUBLE_EQ(choice.v_ref.norm(), 0.0);
}

TEST(Blend, EndpointsAndMean) {
  const ControlGains gains;
  ReflexChoice reflex;
  reflex.tag = ManeuverTag::kRetreatBurst;
  reflex.v_ref = Vec2(0.0, 1.0);
  const Vec2 v_nav(0.6, 0.0);

  const Command pure_nav = blend(v_nav, 0.4, reflex, -0.8, 0.0, gains);
  EXPECT_EQ(pure_nav.v_ref, v_nav);
  EXPECT_DOUBLE_EQ(pure_nav.yaw_rate_ref, 0.4);
  EXPECT_EQ(pure_nav.tag, ManeuverTag::kNone);

  const Command pure_reflex = blend(v_nav, 0.4, reflex, -0.8, 1.0, gains);
  EXPECT_EQ(pure_reflex.v_ref, reflex.v_ref);
  EXPECT_DOUBLE_EQ(pure_reflex.yaw_rate_ref, -0.8);
  EXPECT_EQ(pure_reflex.tag, ManeuverTag::kRetreatBurst);

  const Command mid = blend(v_nav, 0.4, reflex, -0.8, 0.5, gains);
  EXPECT_LT((mid.v_ref - Vec2(0.3, 0.5)).norm(), 1e-12);
  EXPECT_DOUBLE_EQ(mid.yaw_rate_ref, 0.5 * 0.4 + 0.5 * -0.8);
  EXPECT_EQ(mid.tag, ManeuverTag::kRetreatBurst);  // beta_trig = 0.5 inclusive
}

TEST(Blend, ConvexityBoundsSpeed) {
  const ControlGains gains;
  Pcg32 rng(21, 1);
  for (int i = 0; i < 1000; ++i) {
    const Vec2 v_nav(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5));
    ReflexChoice reflex;
    reflex.v_ref = Vec2(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5));
    const double beta = rng.uniform();
    const Command cmd = blend(v_nav, 0.0, reflex, 0.0, beta, gains);
    EXPECT_LE(cmd.v_ref.norm(), std::max(v_nav.norm(), reflex.v_ref.norm()) + 1e-12);
  }
}

TEST(ControlGains, ValidationRejectsBadValues) {
  ControlGains g;
  g.k_r_min = 2.0;
  EXPECT_THROW(g.validate(), ConfigError);
  g = ControlGains{};
  g.weights.dir = -0.1;
  EXPECT_THROW(g.validate(), ConfigError);
  EXPECT_NO_THROW(ControlGains{}.validate());
}

}  // namespace
}  // namespace evasim
