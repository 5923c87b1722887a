#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "evasim/camera_percept.hpp"
#include "evasim/config.hpp"
#include "evasim/control.hpp"
#include "evasim/core.hpp"
#include "evasim/lidar_percept.hpp"
#include "evasim/metrics.hpp"
#include "evasim/predict.hpp"
#include "evasim/replay.hpp"
#include "evasim/sensors.hpp"
#include "evasim/simworld.hpp"
#include "evasim/threat.hpp"

namespace evasim {

enum class Variant {
  kFull,
  kNoPrediction,
  kNoReorient,
  kNoThreat,
  kRaycastBaseline,
  kLidarOnly,
};

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kNoPrediction: return "no_prediction";
    case Variant::kNoReorient: return "no_reorient";
    case Variant::kNoThreat: return "no_threat";
    case Variant::kRaycastBaseline: return "raycast_baseline";
    case Variant::kLidarOnly: return "lidar_only";
  }
  return "full";
}

inline Variant variant_from_string(const std::string& s) {
  if (s == "full") return Variant::kFull;
  if (s == "no_prediction") return Variant::kNoPrediction;
  if (s == "no_reorient") return Variant::kNoReorient;
  if (s == "no_threat") return Variant::kNoThreat;
  if (s == "raycast_baseline") return Variant::kRaycastBaseline;
  if (s == "lidar_only") return Variant::kLidarOnly;
  throw ConfigError("unknown variant '" + s + "'");
}

/// Reactive baseline: an inverse-square repulsive field over the ROI-filtered
/// cloud, averaged over points and capped at the speed limit. No tracking, no
/// threat scheduling, never reflexes.
inline Command raycast_baseline(const PointCloud& cloud, const RobotState& robot,
                                const LidarPerceptParams& percept, const SimParams& sim) {
  const PointCloud roi = roi_filter(cloud, robot, percept);
  Command cmd;
  if (roi.points.empty()) return cmd;
  Vec2 sum = Vec2::Zero();
  for (const Vec3& p : roi.points) {
    const Vec2 away = (robot.position - p).head<2>();
    const double d2 = std::max(away.squaredNorm(), 1e-12);
    sum += away / d2;  // (p_R - p_i)/||p_R - p_i||^2, planar
  }
  Vec2 v = sum / static_cast<double>(roi.points.size());
  const double n = v.norm();
  if (n > sim.v_max) v *= sim.v_max / n;
  cmd.v_ref = v;
  return cmd;
}

/// Optional sensor-stream capture for replay files.
struct TrialArtifacts {
  std::vector<PointCloud> clouds;
  std::vector<Detection2D> detections;
};

namespace detail {

/// The controller's current belief about the active target: the lidar track
/// state, upgraded to the camera refinement on frames where the bridge
/// matches the active id.
struct TargetEstimate {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double radius = 0.2;
};

inline PredictorInput history_input(const ObstacleTrack& track, double t_now, double dt) {
  PredictorInput in;
  const std::size_t n = track.history.size();
  in.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    StateSample s;
    s.position = track.history[i].position;
    s.velocity = track.history[i].velocity;
    s.timestamp = t_now - static_cast<double>(n - 1 - i) * dt;
    in.samples.push_back(s);
  }
  return in;
}

}  // namespace detail

/// Runs one seeded closed-loop trial of the selected pipeline variant.
/// Per frame: render sensors, update perception, score threats, pick the
/// target, derive the blended command, then advance the world one period.
inline TrialResult run_trial(const ScenarioConfig& cfg, Variant variant, int seed,
                             TrialArtifacts* artifacts = nullptr) {
  cfg.validate();
  const SimParams& sim = cfg.sim;
  const ThreatParams& th = cfg.threat;
  const ControlGains& gains = cfg.control;
  const PredictBackend backend = predict_backend_from_string(cfg.predict.backend);
  const double horizon = cfg.predict.horizon > 0.0 ? cfg.predict.horizon : sim.dt;

  WorldState world = spawn_scenario(static_cast<std::uint64_t>(seed), cfg.spawn, sim);
  Pcg32 rng_lidar(static_cast<std::uint64_t>(seed), kStreamLidar);
  Pcg32 rng_camera(static_cast<std::uint64_t>(seed), kStreamCamera);

  TrialResult result;
  result.seed = seed;
  result.variant = variant_name(variant);
  if (!world.obstacles.empty()) {
    const Vec3 dp0 = world.obstacles.front().position - world.robot.position;
    result.spawn_bearing = wrap_angle(std::atan2(dp0.y(), dp0.x()) - world.robot.yaw);
  }

  const bool camera_on =
      variant != Variant::kLidarOnly && variant != Variant::kRaycastBaseline;
  const bool reorient_on =
      variant != Variant::kNoReorient && variant != Variant::kLidarOnly;
  const bool forecast_on = variant != Variant::kNoPrediction;

  LidarPipeline lidar_pipe(cfg.lidar_percept);
  CameraPipeline camera_pipe(cfg.camera_percept);
  TargetSelector selector(th.n_switch);
  StalenessGate camera_gate(th.camera_stale_frames);
  Navigator navigator;
  Vec2 prev_accel = Vec2::Zero();
  ManeuverTag committed = ManeuverTag::kNone;
  int committed_target = -1;
  bool ttc_latched = false;

  const int n_steps = std::max(1, static_cast<int>(std::lround(sim.duration / sim.dt)));
  result.steps.reserve(n_steps);

  for (int frame = 0; frame < n_steps; ++frame) {
    try {
      const RobotState robot = world.robot;
      const PointCloud cloud = render_lidar(world, cfg.lidar, rng_lidar);
      if (artifacts) artifacts->clouds.push_back(cloud);

      Command cmd;
      double beta = 0.0;
      double t_fused = 0.0;
      int target_id = -1;

      if (variant == Variant::kRaycastBaseline) {
        cmd = raycast_baseline(cloud, robot, cfg.lidar_percept, sim);
      } else {
        const std::vector<ObstacleTrack>& tracks = lidar_pipe.step(cloud, robot, sim.dt);

        // Threat scores take the peak urgency over {now, forecast}: leading
        // the target warns earlier on approach, but may not relax the alarm
        // just because the forecast already places the object past us. The
        // fitted forecast velocity also steadies the dodge frame; control
        // geometry stays anchored to the present position.
        std::vector<ThreatCandidate> candidates;
        std::map<int, detail::TargetEstimate> estimates;
        for (const ObstacleTrack& t : tracks) {
          if (!t.confirmed || t.motion == MotionClass::kStatic) continue;
          detail::TargetEstimate est;
          est.position = t.position();
          est.velocity = t.velocity();
          est.radius = t.radius_est;
          double score = threat(est.position - robot.position, est.velocity - robot.velocity, th);
          if (forecast_on) {
            const auto fc = predict(detail::history_input(t, world.time, sim.dt), horizon,
                                    backend);
            if (fc) {
              const Vec3 dp_f = fc->position - robot.position;
              const Vec3 v_f = fc->velocity - robot.velocity;
              score = std::max(score, threat(dp_f, v_f, th));
              est.velocity = fc->velocity;
            }
          }
          candidates.push_back(ThreatCandidate{t.id, score});
          estimates.emplace(t.id, est);
        }

        const std::optional<int> active = selector.step(candidates);

        double t_lidar_active = 0.0;
        detail::TargetEstimate target;
        bool have_target = false;
        if (active) {
          target_id = *active;
          for (const ThreatCandidate& c : candidates)
            if (c.id == *active) t_lidar_active = c.t_lidar;
          target = estimates.at(*active);
          have_target = true;
        }

        // Camera refinement: segment whatever the detector reports, then keep
        // the refinement that bridges to the active track. Position and
        // extent upgrade immediately; the velocity only replaces the coarse
        // track's once the camera regression window has filled, so a fresh
        // acquisition cannot swing the approach axis mid-encounter.
        std::optional<double> t_camera_fresh;
        if (camera_on) {
          const CameraModel cam = camera_pose(cfg.camera, robot);
          const DepthImage depth = render_depth(world, cam, cfg.camera, rng_camera);
          const std::vector<Detection2D> dets =
              synthetic_detector(world, cam, cfg.detector, rng_camera);
          if (artifacts)
            artifacts->detections.insert(artifacts->detections.end(), dets.begin(), dets.end());
          const std::vector<CameraObstacle> refined = camera_pipe.step(dets, depth, cam);
          if (have_target) {
            for (const CameraObstacle& obs : refined) {
              if (bridge_to_lidar(obs.position, tracks, cfg.camera_percept.bridge_tol) !=
                  *active)
                continue;
              detail::TargetEstimate cam_est;
              cam_est.position = obs.position;
              cam_est.velocity = obs.velocity_valid ? obs.velocity : target.velocity;
              cam_est.radius = obs.radius;
              const Vec3 v_rel = cam_est.velocity - robot.velocity;
              double cam_score = threat(cam_est.position - robot.position, v_rel, th);
              if (forecast_on) {
                const Vec3 dp_f =
                    cam_est.position + cam_est.velocity * horizon - robot.position;
                cam_score = std::max(cam_score, threat(dp_f, v_rel, th));
              }
              t_camera_fresh = cam_score;
              target = cam_est;
              break;
            }
          }
        }
        camera_gate.update(t_camera_fresh);

        if (!have_target) ttc_latched = false;
        if (have_target) {
          t_fused = fuse(t_lidar_active, camera_gate.current());

          if (variant == Variant::kNoThreat) {
            const Vec3 dp = target.position - robot.position;
            const Vec3 v_rel = target.velocity - robot.velocity;
            // Binary trigger with a wider release threshold: the rule is
            // still pure time-to-contact, but measurement flicker across the
            // trigger cannot strobe the reflex on and off every frame.
            const double t_go = ttc(dp, v_rel, th.eps);
            if (t_go < gains.ttc_trig) ttc_latched = true;
            else if (t_go > 1.5 * gains.ttc_trig) ttc_latched = false;
            beta = ttc_latched ? 1.0 : 0.0;
          } else {
            beta = schedule_g(t_fused, th.t_lo, th.t_hi);
          }

          double yaw_rate = 0.0;
          if (reorient_on) {
            // The reorientation drive closes the gap between what the lidar
            // suspects and what the camera has confirmed recently.
            const double t_cam_or_zero = camera_gate.current().value_or(0.0);
            yaw_rate = reorient(robot, target.position - robot.position, t_lidar_active,
                                t_cam_or_zero, gains);
          }

          const double g_val = schedule_g(t_fused, th.t_lo, th.t_hi);
          const Vec2 v_nav =
              navigator.step(robot.position.head<2>(), target.position.head<2>(), g_val, gains);
          // A maneuver stays committed while the trigger holds on the same
          // target, so estimate jitter cannot flip the dodge side in flight.
          const ManeuverTag hold =
              (committed != ManeuverTag::kNone && target_id == committed_target)
                  ? committed
                  : ManeuverTag::kNone;
#ifdef EVASIM_TRACE
          std::fprintf(stderr,
                       "t=%.2f src=%s tgt=(%.3f,%.3f) tv=(%.3f,%.3f) r=%.3f Tl=%.3f Tf=%.3f "
                       "g=%.3f b=%.3f hold=%d\n",
                       world.time, t_camera_fresh ? "cam" : "lid", target.position.x(),
                       target.position.y(), target.velocity.x(), target.velocity.y(),
                       target.radius, t_lidar_active, t_fused, g_val, beta,
                       static_cast<int>(hold));
#endif
          const ReflexChoice reflex =
              reflex_select(robot, target.position, target.velocity, target.radius, g_val,
                            gains, sim, th.r_safe, prev_accel, hold);
          // The reorientation drive stays on the yaw channel at every beta so
          // the camera holds the threat through the dodge itself.
          cmd = blend(v_nav, yaw_rate, reflex, yaw_rate, beta, gains);
        }
      }
      // Commitment releases on a lower threshold than it forms so threat
      // jitter around the trigger cannot strobe the maneuver away.
      if (cmd.tag != ManeuverTag::kNone) {
        committed = cmd.tag;
        committed_target = target_id;
      } else if (beta < 0.7 * gains.beta_trig || target_id != committed_target) {
        committed = ManeuverTag::kNone;
        committed_target = -1;
      }

      const Vec3 v_before = world.robot.velocity;
      step_world(world, cmd, sim);

      StepLog log;
      log.t = world.time;
      log.robot_pos = world.robot.position;
      log.robot_vel = world.robot.velocity;
      log.yaw = world.robot.yaw;
      log.beta = beta;
      log.t_fused = t_fused;
      log.target_id = target_id;
      log.d_clear = check_collision(world, sim.body_radius).clearance;
      log.a_cmd = (world.robot.velocity - v_before) / sim.dt;
      prev_accel = log.a_cmd.head<2>();
      double ttc_min = std::numeric_limits<double>::infinity();
      for (const ObstacleTruth& o : world.obstacles) {
        if (!o.active) continue;
        ttc_min = std::min(ttc_min, ttc(o.position - world.robot.position,
                                        o.velocity - world.robot.velocity, th.eps));
      }
      log.ttc_truth = ttc_min;
      result.steps.push_back(log);
    } catch (const NumericalError& e) {
      throw NumericalError("frame " + std::to_string(frame) + ": " + e.what());
    }
  }

  result.collided = world.collided;
  result.final_speed = world.robot.velocity.norm();
  result.success = !result.collided && result.final_speed < 0.1;
  result.metrics = compute_metrics(result.steps, gains.beta_trig, sim.mass, sim.dt);
  return result;
}

/// Per-variant aggregate over a seeded batch. Quadrants are assigned from the
/// first obstacle's spawn bearing in the robot frame.
struct BatchReport {
  std::string variant;
  std::string config_digest;
  int n_total = 0;
  int n_success = 0;
  double asr = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 1.0;
  double d_min_mean = 0.0, d_min_std = 0.0;
  double tnl_mean = 0.0, tnl_std = 0.0;
  int tnl_n = 0;
  double e_mean = 0.0, e_std = 0.0;
  int e_n = 0;
  int n_front = 0, n_left = 0, n_right = 0, n_rear = 0;
  int s_front = 0, s_left = 0, s_right = 0, s_rear = 0;
  double asr_front = 0.0, asr_left = 0.0, asr_right = 0.0, asr_rear = 0.0;
};

namespace detail {

struct MeanStd {
  double mean = 0.0, std = 0.0;
  int n = 0;
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd out;
  out.n = static_cast<int>(xs.size());
  if (out.n == 0) return out;
  double s = 0.0;
  for (double x : xs) s += x;
  out.mean = s / out.n;
  if (out.n > 1) {
    double q = 0.0;
    for (double x : xs) q += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(q / (out.n - 1));
  }
  return out;
}

/// 95% Wilson score interval for a binomial proportion.
inline void wilson_ci(int successes, int total, double& lo, double& hi) {
  if (total == 0) {
    lo = 0.0;
    hi = 1.0;
    return;
  }
  const double z = 1.959963984540054;
  const double n = total;
  const double p = static_cast<double>(successes) / n;
  const double denom = 1.0 + z * z / n;
  const double center = (p + z * z / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom;
  lo = std::max(0.0, center - half);
  hi = std::min(1.0, center + half);
}

inline int quadrant_of(double bearing) {
  const double b = wrap_angle(bearing);
  const double q = M_PI / 4.0;
  if (std::abs(b) <= q) return 0;          // front
  if (std::abs(b) >= 3.0 * q) return 3;    // rear
  return b > 0.0 ? 1 : 2;                  // left : right
}

}  // namespace detail

inline BatchReport make_report(const std::string& variant, const std::string& digest,
                               const std::vector<TrialResult>& trials) {
  BatchReport r;
  r.variant = variant;
  r.config_digest = digest;
  r.n_total = static_cast<int>(trials.size());
  std::vector<double> d_mins, tnls, energies;
  for (const TrialResult& t : trials) {
    int* n_quad[4] = {&r.n_front, &r.n_left, &r.n_right, &r.n_rear};
    int* s_quad[4] = {&r.s_front, &r.s_left, &r.s_right, &r.s_rear};
    const int q = detail::quadrant_of(t.spawn_bearing);
    ++*n_quad[q];
    if (t.success) {
      ++r.n_success;
      ++*s_quad[q];
      if (std::isfinite(t.metrics.d_min)) d_mins.push_back(t.metrics.d_min);
      if (t.metrics.tnl) tnls.push_back(*t.metrics.tnl);
      if (t.metrics.energy) energies.push_back(*t.metrics.energy);
    }
  }
  r.asr = r.n_total > 0 ? static_cast<double>(r.n_success) / r.n_total : 0.0;
  detail::wilson_ci(r.n_success, r.n_total, r.ci_lo, r.ci_hi);
  const detail::MeanStd d = detail::mean_std(d_mins);
  r.d_min_mean = d.mean;
  r.d_min_std = d.std;
  const detail::MeanStd tn = detail::mean_std(tnls);
  r.tnl_mean = tn.mean;
  r.tnl_std = tn.std;
  r.tnl_n = tn.n;
  const detail::MeanStd en = detail::mean_std(energies);
  r.e_mean = en.mean;
  r.e_std = en.std;
  r.e_n = en.n;
  auto quad_asr = [](int s, int n) { return n > 0 ? static_cast<double>(s) / n : 0.0; };
  r.asr_front = quad_asr(r.s_front, r.n_front);
  r.asr_left = quad_asr(r.s_left, r.n_left);
  r.asr_right = quad_asr(r.s_right, r.n_right);
  r.asr_rear = quad_asr(r.s_rear, r.n_rear);
  return r;
}

struct BatchOutput {
  std::vector<TrialResult> trials;  ///< seed order 0..N-1
  BatchReport report;
};

/// Farms seeds seed0..seed0+N-1 over a worker pool. Each trial is
/// self-seeded, so the assembled output is identical regardless of
/// scheduling; per-step logs are dropped to keep large batches light.
inline BatchOutput run_batch(const ScenarioConfig& cfg, Variant variant, int n_trials,
                             int n_threads = 0, int seed0 = 0) {
  if (n_trials < 1) throw ConfigError("batch needs at least one trial");
  cfg.validate();
  if (n_threads <= 0) {
    n_threads = static_cast<int>(std::thread::hardware_concurrency());
    if (n_threads < 1) n_threads = 1;
  }
  n_threads = std::min(n_threads, n_trials);

  BatchOutput out;
  out.trials.resize(n_trials);
  std::vector<std::exception_ptr> errors(n_trials);
  std::atomic<int> next{0};

  auto worker = [&]() {
    for (int i = next.fetch_add(1); i < n_trials; i = next.fetch_add(1)) {
      try {
        TrialResult r = run_trial(cfg, variant, seed0 + i);
        r.steps.clear();
        r.steps.shrink_to_fit();
        out.trials[i] = std::move(r);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);

  out.report = make_report(variant_name(variant), cfg.digest(), out.trials);
  return out;
}

inline void write_results_jsonl(std::ostream& os, const std::vector<TrialResult>& trials) {
  for (const TrialResult& t : trials) os << trial_to_jsonl(t) << '\n';
}

inline void write_summary_csv(std::ostream& os, const std::vector<BatchReport>& reports) {
  os << "variant,config_digest,n_total,n_success,asr,ci_lo,ci_hi,"
        "d_min_mean,d_min_std,tnl_mean,tnl_std,tnl_n,e_mean,e_std,e_n,"
        "asr_front,asr_left,asr_right,asr_rear\n";
  for (const BatchReport& r : reports) {
    os << r.variant << ',' << r.config_digest << ',' << r.n_total << ',' << r.n_success << ','
       << detail::fmt_g(r.asr) << ',' << detail::fmt_g(r.ci_lo) << ',' << detail::fmt_g(r.ci_hi)
       << ',' << detail::fmt_g(r.d_min_mean) << ',' << detail::fmt_g(r.d_min_std) << ','
       << detail::fmt_g(r.tnl_mean) << ',' << detail::fmt_g(r.tnl_std) << ',' << r.tnl_n << ','
       << detail::fmt_g(r.e_mean) << ',' << detail::fmt_g(r.e_std) << ',' << r.e_n << ','
       << detail::fmt_g(r.asr_front) << ',' << detail::fmt_g(r.asr_left) << ','
       << detail::fmt_g(r.asr_right) << ',' << detail::fmt_g(r.asr_rear) << '\n';
  }
}

}  // namespace evasim
