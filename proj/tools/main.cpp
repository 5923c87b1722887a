#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "evasim/config.hpp"
#include "evasim/replay.hpp"
#include "evasim/runner.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string variant = "full";
  std::string out_dir;
  bool no_prediction = false;
  bool no_reorient = false;
  bool no_threat = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "JSON scenario config; defaults when omitted");
  cmd->add_option("--variant", o.variant,
                  "full|no_prediction|no_reorient|no_threat|raycast_baseline|lidar_only");
  cmd->add_option("--out-dir", o.out_dir, "directory for result files");
  cmd->add_flag("--no-prediction", o.no_prediction, "shortcut for --variant no_prediction");
  cmd->add_flag("--no-reorient", o.no_reorient, "shortcut for --variant no_reorient");
  cmd->add_flag("--no-threat", o.no_threat, "shortcut for --variant no_threat");
}

evasim::Variant resolve_variant(const CommonOpts& o) {
  const int shortcuts = (o.no_prediction ? 1 : 0) + (o.no_reorient ? 1 : 0) +
                        (o.no_threat ? 1 : 0);
  if (shortcuts > 1)
    throw evasim::ConfigError("pick at most one of --no-prediction/--no-reorient/--no-threat");
  if (o.no_prediction) return evasim::Variant::kNoPrediction;
  if (o.no_reorient) return evasim::Variant::kNoReorient;
  if (o.no_threat) return evasim::Variant::kNoThreat;
  return evasim::variant_from_string(o.variant);
}

evasim::ScenarioConfig resolve_config(const CommonOpts& o) {
  if (o.config_path.empty())
    return evasim::config_from_json(nlohmann::json::object());
  return evasim::load_config(o.config_path);
}

std::ofstream open_out(const std::string& dir, const std::string& name, bool binary = false) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path p = std::filesystem::path(dir) / name;
  std::ofstream out(p, binary ? std::ios::binary : std::ios::out);
  if (!out) throw evasim::ConfigError("cannot write '" + p.string() + "'");
  return out;
}

int cmd_run(const CommonOpts& o, int seed) {
  const evasim::ScenarioConfig cfg = resolve_config(o);
  const evasim::Variant variant = resolve_variant(o);
  evasim::TrialArtifacts artifacts;
  const bool record = !o.out_dir.empty();
  const evasim::TrialResult result =
      evasim::run_trial(cfg, variant, seed, record ? &artifacts : nullptr);
  std::cout << evasim::trial_to_jsonl(result) << '\n';
  if (record) {
    auto steps = open_out(o.out_dir, "steps.csv");
    evasim::write_steps_csv(steps, result.steps);
    auto jsonl = open_out(o.out_dir, "result.jsonl");
    jsonl << evasim::trial_to_jsonl(result) << '\n';
    auto cloud = open_out(o.out_dir, "cloud.bin", true);
    evasim::write_cloud_replay(cloud, artifacts.clouds);
    auto dets = open_out(o.out_dir, "detections.csv");
    evasim::write_detection_csv(dets, artifacts.detections);
  }
  return 0;
}

int cmd_batch(const CommonOpts& o, int seed, int trials, int threads) {
  const evasim::ScenarioConfig cfg = resolve_config(o);
  const evasim::Variant variant = resolve_variant(o);
  const evasim::BatchOutput out = evasim::run_batch(cfg, variant, trials, threads, seed);
  evasim::write_summary_csv(std::cout, {out.report});
  if (!o.out_dir.empty()) {
    auto jsonl = open_out(o.out_dir, "results.jsonl");
    evasim::write_results_jsonl(jsonl, out.trials);
    auto summary = open_out(o.out_dir, "summary.csv");
    evasim::write_summary_csv(summary, {out.report});
  }
  return 0;
}

// Offline perception: recorded clouds stream through the lidar pipeline from
// a static origin pose (recorded detections through the 2D tracker when
// given), emitting one row per confirmed track per frame.
int cmd_replay(const CommonOpts& o, const std::string& cloud_path,
               const std::string& dets_path) {
  const evasim::ScenarioConfig cfg = resolve_config(o);
  std::ifstream cloud_in(cloud_path, std::ios::binary);
  if (!cloud_in) throw evasim::ConfigError("cannot open cloud replay '" + cloud_path + "'");
  const std::vector<evasim::PointCloud> frames = evasim::read_cloud_replay(cloud_in);

  std::vector<evasim::Detection2D> dets;
  if (!dets_path.empty()) {
    std::ifstream dets_in(dets_path);
    if (!dets_in) throw evasim::ConfigError("cannot open detection replay '" + dets_path + "'");
    dets = evasim::read_detection_csv(dets_in);
  }

  evasim::LidarPipeline lidar(cfg.lidar_percept);
  evasim::Tracker2D tracker(cfg.camera_percept);
  evasim::RobotState robot;

  std::ostringstream rows;
  rows << "t,track_id,px,py,pz,vx,vy,vz,radius,motion\n";
  std::size_t det_cursor = 0;
  int tracks2d_peak = 0;
  double prev_t = frames.empty() ? 0.0 : frames.front().timestamp - cfg.sim.dt;
  for (const evasim::PointCloud& frame : frames) {
    const double dt = std::max(1e-6, frame.timestamp - prev_t);
    prev_t = frame.timestamp;
    const auto& tracks = lidar.step(frame, robot, dt);
    for (const auto& tr : tracks) {
      if (!tr.confirmed) continue;
      const evasim::Vec3 p = tr.position();
      const evasim::Vec3 v = tr.velocity();
      const char* motion = tr.motion == evasim::MotionClass::kStatic
                               ? "static"
                               : (tr.motion == evasim::MotionClass::kDynamic ? "dynamic"
                                                                             : "unknown");
      rows << evasim::detail::fmt_g(frame.timestamp) << ',' << tr.id << ','
           << evasim::detail::fmt_g(p.x()) << ',' << evasim::detail::fmt_g(p.y()) << ','
           << evasim::detail::fmt_g(p.z()) << ',' << evasim::detail::fmt_g(v.x()) << ','
           << evasim::detail::fmt_g(v.y()) << ',' << evasim::detail::fmt_g(v.z()) << ','
           << evasim::detail::fmt_g(tr.radius_est) << ',' << motion << '\n';
    }
    if (!dets.empty()) {
      std::vector<evasim::Detection2D> frame_dets;
      while (det_cursor < dets.size() && dets[det_cursor].t <= frame.timestamp + 1e-9) {
        frame_dets.push_back(dets[det_cursor]);
        ++det_cursor;
      }
      const auto& t2d = tracker.step(frame_dets);
      tracks2d_peak = std::max(tracks2d_peak, static_cast<int>(t2d.size()));
    }
  }

  if (!o.out_dir.empty()) {
    auto out = open_out(o.out_dir, "tracks.csv");
    out << rows.str();
  } else {
    std::cout << rows.str();
  }
  std::cerr << "replayed " << frames.size() << " cloud frames, " << dets.size()
            << " detections (peak 2d tracks " << tracks2d_peak << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic evasion simulator and batch harness"};
  app.require_subcommand(1);

  CommonOpts run_opts, batch_opts, replay_opts;
  int run_seed = 0;
  int batch_seed = 0;
  int batch_trials = 50;
  int batch_threads = 0;
  std::string replay_cloud, replay_dets;

  CLI::App* run = app.add_subcommand("run", "single closed-loop trial");
  run->add_option("--seed", run_seed, "trial seed");
  add_common(run, run_opts);

  CLI::App* batch = app.add_subcommand("batch", "seeded trial batch with summary report");
  batch->add_option("--seed", batch_seed, "first seed of the batch");
  batch->add_option("--trials", batch_trials, "number of trials");
  batch->add_option("--threads", batch_threads, "worker threads, 0 = hardware");
  add_common(batch, batch_opts);

  CLI::App* replay = app.add_subcommand("replay", "offline perception over recorded streams");
  replay->add_option("--cloud", replay_cloud, "binary point-cloud replay file")->required();
  replay->add_option("--dets", replay_dets, "detection CSV replay file");
  add_common(replay, replay_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 3;
  }

  try {
    if (run->parsed()) return cmd_run(run_opts, run_seed);
    if (batch->parsed()) return cmd_batch(batch_opts, batch_seed, batch_trials, batch_threads);
    return cmd_replay(replay_opts, replay_cloud, replay_dets);
  } catch (const evasim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 3;
  } catch (const evasim::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
