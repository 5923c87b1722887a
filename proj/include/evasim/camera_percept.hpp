#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "evasim/core.hpp"
#include "evasim/hungarian.hpp"
#include "evasim/lidar_percept.hpp"
#include "evasim/sensors.hpp"

namespace evasim {

struct CameraPerceptParams {
  double conf_high = 0.5;
  int m2_die = 5;
  double tau_depth = 0.15;
  int n_min = 20;
  int seed_search_px = 5;
  int k_c = 5;          // velocity regression window
  double lambda_v = 0.5;
  double bridge_tol = 0.5;
};

struct Track2D {
  int id = -1;
  double u_min = 0, v_min = 0, u_max = 0, v_max = 0;
  std::string cls;
  double conf = 0.0;
  int age = 0;
  int misses = 0;
};

inline double iou_2d(double au0, double av0, double au1, double av1, double bu0, double bv0,
                     double bu1, double bv1) {
  const double iw = std::min(au1, bu1) - std::max(au0, bu0);
  const double ih = std::min(av1, bv1) - std::max(av0, bv0);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double a = (au1 - au0) * (av1 - av0);
  const double b = (bu1 - bu0) * (bv1 - bv0);
  return inter / (a + b - inter);
}

inline double track_det_iou(const Track2D& t, const Detection2D& d) {
  return iou_2d(t.u_min, t.v_min, t.u_max, t.v_max, d.u_min, d.v_min, d.u_max, d.v_max);
}

// Two-stage 2D association: confident detections claim tracks first, leftovers
// get a second chance against low-confidence detections before counting a miss.
class Tracker2D {
 public:
  explicit Tracker2D(const CameraPerceptParams& params = {}) : params_(params) {}

  const std::vector<Track2D>& step(const std::vector<Detection2D>& dets) {
    std::vector<int> high, low;
    for (size_t i = 0; i < dets.size(); ++i) {
      (dets[i].conf >= params_.conf_high ? high : low).push_back(static_cast<int>(i));
    }

    std::vector<char> track_done(tracks_.size(), 0);
    std::vector<char> det_done(dets.size(), 0);
    associate_stage(dets, high, track_done, det_done);

    std::vector<int> remaining;
    for (size_t i = 0; i < tracks_.size(); ++i) {
      if (!track_done[i]) remaining.push_back(static_cast<int>(i));
    }
    associate_stage_subset(dets, remaining, low, track_done, det_done);

    for (size_t i = 0; i < tracks_.size(); ++i) {
      if (!track_done[i]) {
        tracks_[i].misses += 1;
        tracks_[i].age += 1;
      }
    }
    tracks_.erase(std::remove_if(tracks_.begin(), tracks_.end(),
                                 [&](const Track2D& t) { return t.misses >= params_.m2_die; }),
                  tracks_.end());

    for (const int di : high) {
      if (det_done[di]) continue;
      Track2D t;
      t.id = next_id_++;
      assign_bbox(t, dets[di]);
      t.age = 1;
      tracks_.push_back(std::move(t));
    }
    return tracks_;
  }

  const std::vector<Track2D>& tracks() const { return tracks_; }

 private:
  static void assign_bbox(Track2D& t, const Detection2D& d) {
    t.u_min = d.u_min;
    t.v_min = d.v_min;
    t.u_max = d.u_max;
    t.v_max = d.v_max;
    t.cls = d.cls;
    t.conf = d.conf;
  }

  void associate_stage(const std::vector<Detection2D>& dets, const std::vector<int>& det_idx,
                       std::vector<char>& track_done, std::vector<char>& det_done) {
    std::vector<int> all_tracks(tracks_.size());
    for (size_t i = 0; i < tracks_.size(); ++i) all_tracks[i] = static_cast<int>(i);
    associate_stage_subset(dets, all_tracks, det_idx, track_done, det_done);
  }

  void associate_stage_subset(const std::vector<Detection2D>& dets,
                              const std::vector<int>& track_idx, const std::vector<int>& det_idx,
                              std::vector<char>& track_done, std::vector<char>& det_done) {
    if (track_idx.empty() || det_idx.empty()) return;
    const auto cost = [&](int i, int j) {
      return -track_det_iou(tracks_[track_idx[i]], dets[det_idx[j]]);
    };
    const auto admissible = [&](int i, int j) {
      return track_det_iou(tracks_[track_idx[i]], dets[det_idx[j]]) > 0.0;
    };
    const Matching m = match_bipartite(static_cast<int>(track_idx.size()),
                                       static_cast<int>(det_idx.size()), cost, admissible);
    for (const auto& [ti, di] : m.pairs) {
      Track2D& t = tracks_[track_idx[ti]];
      assign_bbox(t, dets[det_idx[di]]);
      t.age += 1;
      t.misses = 0;
      track_done[track_idx[ti]] = 1;
      det_done[det_idx[di]] = 1;
    }
  }

  CameraPerceptParams params_;
  std::vector<Track2D> tracks_;
  int next_id_ = 0;
};

struct SegmentResult {
  std::vector<std::pair<int, int>> pixels;  // (u, v)
  bool seed_on_background = false;
};

// 4-connected flood fill; a neighbor joins when its depth is within tau of the
// pixel it was reached from.
inline SegmentResult bfs_segment(int seed_u, int seed_v, const DepthImage& depth, double tau) {
  SegmentResult res;
  if (seed_u < 0 || seed_u >= depth.width || seed_v < 0 || seed_v >= depth.height ||
      depth.is_background(seed_u, seed_v)) {
    res.seed_on_background = true;
    return res;
  }
  std::vector<char> visited(static_cast<size_t>(depth.width) * depth.height, 0);
  std::deque<std::pair<int, int>> queue;
  const auto push = [&](int u, int v) {
    visited[static_cast<size_t>(v) * depth.width + u] = 1;
    queue.emplace_back(u, v);
    res.pixels.emplace_back(u, v);
  };
  push(seed_u, seed_v);
  constexpr int du[4] = {1, -1, 0, 0};
  constexpr int dv[4] = {0, 0, 1, -1};
  while (!queue.empty()) {
    const auto [u, v] = queue.front();
    queue.pop_front();
    const double z = depth.at(u, v);
    for (int k = 0; k < 4; ++k) {
      const int nu = u + du[k];
      const int nv = v + dv[k];
      if (nu < 0 || nu >= depth.width || nv < 0 || nv >= depth.height) continue;
      if (visited[static_cast<size_t>(nv) * depth.width + nu]) continue;
      if (std::abs(depth.at(nu, nv) - z) > tau) continue;
      push(nu, nv);
    }
  }
  return res;
}

// Rings of increasing Chebyshev radius around the nominal seed; first valid
// depth pixel wins, so a bbox center that falls on background still segments.
inline std::optional<std::pair<int, int>> find_seed(int u0, int v0, const DepthImage& depth,
                                                    int max_radius) {
  const auto valid = [&](int u, int v) {
    return u >= 0 && u < depth.width && v >= 0 && v < depth.height && !depth.is_background(u, v);
  };
  if (valid(u0, v0)) return std::make_pair(u0, v0);
  for (int r = 1; r <= max_radius; ++r) {
    for (int dv = -r; dv <= r; ++dv) {
      for (int du = -r; du <= r; ++du) {
        if (std::max(std::abs(du), std::abs(dv)) != r) continue;
        if (valid(u0 + du, v0 + dv)) return std::make_pair(u0 + du, v0 + dv);
      }
    }
  }
  return std::nullopt;
}

struct SphereEstimate {
  Vec3 position = Vec3::Zero();  // world frame
  double radius = 0.0;
  int n_points = 0;
};

// Sphere recovery from the segmented mask: the mask's view rays form a cone
// tangent to the sphere. The cone axis points at the center, its half-angle
// gives sin(theta) = r/d, and the nearest return fixes d via d - r = rho_min.
inline std::optional<SphereEstimate> estimate_3d(const SegmentResult& mask,
                                                 const DepthImage& depth, const CameraModel& cam,
                                                 int n_min) {
  if (mask.seed_on_background || static_cast<int>(mask.pixels.size()) < n_min) {
    return std::nullopt;
  }
  std::vector<Vec3> rays;
  rays.reserve(mask.pixels.size());
  double min_range = 1e18;
  Vec3 axis = Vec3::Zero();
  for (const auto& [u, v] : mask.pixels) {
    const double z = depth.at(u, v);
    const Vec3 p((u - cam.cx) / cam.fx * z, (v - cam.cy) / cam.fy * z, z);
    const double range = p.norm();
    min_range = std::min(min_range, range);
    rays.push_back(p / range);
    axis += rays.back();
  }
  axis.normalize();
  double eta = 0.5;
  for (int iter = 0; iter < 30; ++iter) {
    double worst = 2.0;
    int wi = 0;
    for (size_t i = 0; i < rays.size(); ++i) {
      const double c = rays[i].dot(axis);
      if (c < worst) {
        worst = c;
        wi = static_cast<int>(i);
      }
    }
    axis = (axis + eta * (rays[wi] - axis)).normalized();
    eta *= 0.8;
  }
  double min_cos = 1.0;
  for (const Vec3& r : rays) min_cos = std::min(min_cos, r.dot(axis));
  min_cos = std::clamp(min_cos, -1.0, 1.0);
  const double sin_th = std::sqrt(std::max(0.0, 1.0 - min_cos * min_cos));
  if (sin_th >= 1.0 - 1e-9) return std::nullopt;
  const double dist = min_range / (1.0 - sin_th);
  SphereEstimate est;
  est.position = cam.to_world(axis * dist);
  est.radius = dist * sin_th;
  est.n_points = static_cast<int>(mask.pixels.size());
  if (est.radius <= 0.0) return std::nullopt;
  return est;
}

class VelocityEstimator {
 public:
  explicit VelocityEstimator(int window = 5, double lambda = 0.5)
      : window_(window), lambda_(lambda) {}

  void push(double t, const Vec3& position) {
    samples_.emplace_back(t, position);
    while (static_cast<int>(samples_.size()) > window_) samples_.pop_front();
    // The slope is not trusted until the window fills: the first frames of a
    // new segment carry mask-boundary jitter that a short baseline amplifies
    // into meters per second.
    if (static_cast<int>(samples_.size()) < window_) return;
    const Vec3 raw = regression_slope();
    smoothed_ = estimated_ ? (lambda_ * raw + (1.0 - lambda_) * smoothed_).eval() : raw;
    estimated_ = true;
  }

  Vec3 velocity() const { return smoothed_; }
  bool estimated() const { return estimated_; }

 private:
  Vec3 regression_slope() const {
    const double n = static_cast<double>(samples_.size());
    double t_mean = 0.0;
    Vec3 p_mean = Vec3::Zero();
    for (const auto& [t, p] : samples_) {
      t_mean += t;
      p_mean += p;
    }
    t_mean /= n;
    p_mean /= n;
    double stt = 0.0;
    Vec3 stp = Vec3::Zero();
    for (const auto& [t, p] : samples_) {
      stt += (t - t_mean) * (t - t_mean);
      stp += (t - t_mean) * (p - p_mean);
    }
    if (stt < 1e-12) return Vec3::Zero();
    return stp / stt;
  }

  int window_;
  double lambda_;
  std::deque<std::pair<double, Vec3>> samples_;
  Vec3 smoothed_ = Vec3::Zero();
  bool estimated_ = false;
};

struct CameraObstacle {
  int id = -1;  // 2D track id
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double radius = 0.0;
  int n_points = 0;
  bool velocity_valid = false;
};

class CameraPipeline {
 public:
  explicit CameraPipeline(const CameraPerceptParams& params = {})
      : params_(params), tracker_(params) {}

  std::vector<CameraObstacle> step(const std::vector<Detection2D>& dets, const DepthImage& depth,
                                   const CameraModel& cam) {
    const std::vector<Track2D>& tracks = tracker_.step(dets);
    std::vector<CameraObstacle> out;
    for (const Track2D& t : tracks) {
      const int u0 = static_cast<int>(std::lround(0.5 * (t.u_min + t.u_max)));
      const int v0 = static_cast<int>(std::lround(0.5 * (t.v_min + t.v_max)));
      const auto seed = find_seed(u0, v0, depth, params_.seed_search_px);
      if (!seed) continue;
      const SegmentResult mask = bfs_segment(seed->first, seed->second, depth, params_.tau_depth);
      const auto est = estimate_3d(mask, depth, cam, params_.n_min);
      if (!est) continue;
      auto [it, fresh] = velocity_.try_emplace(
          t.id, VelocityEstimator(params_.k_c, params_.lambda_v));
      it->second.push(depth.timestamp, est->position);
      CameraObstacle obs;
      obs.id = t.id;
      obs.position = est->position;
      obs.velocity = it->second.velocity();
      obs.velocity_valid = it->second.estimated();
      obs.radius = est->radius;
      obs.n_points = est->n_points;
      out.push_back(obs);
    }
    prune_velocity_state(tracks);
    return out;
  }

  const std::vector<Track2D>& tracks() const { return tracker_.tracks(); }

 private:
  void prune_velocity_state(const std::vector<Track2D>& tracks) {
    for (auto it = velocity_.begin(); it != velocity_.end();) {
      const bool alive = std::any_of(tracks.begin(), tracks.end(),
                                     [&](const Track2D& t) { return t.id == it->first; });
      it = alive ? std::next(it) : velocity_.erase(it);
    }
  }

  CameraPerceptParams params_;
  Tracker2D tracker_;
  std::unordered_map<int, VelocityEstimator> velocity_;
};

// The refined estimate inherits the coarse track's identity when both
// pipelines are plainly looking at the same object.
inline int bridge_to_lidar(const Vec3& camera_position,
                           const std::vector<ObstacleTrack>& lidar_tracks, double tol) {
  int best = -1;
  double best_dist = tol;
  for (const ObstacleTrack& t : lidar_tracks) {
    const double d = (t.position() - camera_position).norm();
    if (d <= best_dist) {
      best_dist = d;
      best = t.id;
    }
  }
  return best;
}

}  // namespace evasim
