#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <unordered_map>
#include <vector>

#include "evasim/core.hpp"
#include "evasim/dbscan.hpp"
#include "evasim/hungarian.hpp"
#include "evasim/kalman.hpp"
#include "evasim/simworld.hpp"

namespace evasim {

struct LidarPerceptParams {
  double eps = 0.35;
  int min_pts = 4;
  double v_ds = 0.08;
  double r_roi = 8.0;
  double ground_margin = 0.12;
  double gate_xy = 1.0;
  int m_confirm = 3;
  int m_die = 3;
  int history_k = 10;
  double eps_p = 1e-3;   // position covariance trace threshold, m^2
  double eps_v = 0.1;    // speed standard deviation threshold, m/s
  double sensor_height = 0.3;
  KalmanParams kalman;
};

enum class MotionClass { kUnknown, kStatic, kDynamic };

struct Cluster {
  std::vector<Vec3> members;
  Vec3 centroid = Vec3::Zero();
  Aabb3 box;
};

struct HistorySample {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
};

struct ObstacleTrack {
  int id = -1;
  Cv3Kalman kalman;
  Aabb3 box;
  double radius_est = 0.0;
  int hits = 0;
  int misses = 0;
  bool confirmed = false;
  MotionClass motion = MotionClass::kUnknown;
  std::deque<HistorySample> history;

  Vec3 position() const { return kalman.position(); }
  Vec3 velocity() const { return kalman.velocity(); }
};

inline PointCloud roi_filter(const PointCloud& cloud, const RobotState& robot,
                             const LidarPerceptParams& params) {
  PointCloud out;
  out.timestamp = cloud.timestamp;
  std::vector<Vec3> kept;
  kept.reserve(cloud.points.size());
  for (const Vec3& p : cloud.points) {
    if (p.z() < params.ground_margin) continue;
    if ((p.head<2>() - robot.position.head<2>()).norm() > params.r_roi) continue;
    kept.push_back(p);
  }
  // Voxel downsample: one centroid per occupied voxel, emitted in first-seen order.
  struct VoxelAcc {
    Vec3 sum = Vec3::Zero();
    int count = 0;
  };
  std::unordered_map<std::int64_t, int> index;
  std::vector<VoxelAcc> acc;
  const double inv = 1.0 / params.v_ds;
  for (const Vec3& p : kept) {
    const auto ix = static_cast<std::int64_t>(std::floor(p.x() * inv));
    const auto iy = static_cast<std::int64_t>(std::floor(p.y() * inv));
    const auto iz = static_cast<std::int64_t>(std::floor(p.z() * inv));
    const std::int64_t key = (ix * 73856093) ^ (iy * 19349663) ^ (iz * 83492791);
    auto [it, fresh] = index.try_emplace(key, static_cast<int>(acc.size()));
    if (fresh) acc.emplace_back();
    acc[it->second].sum += p;
    acc[it->second].count += 1;
  }
  out.points.reserve(acc.size());
  for (const VoxelAcc& a : acc) out.points.push_back(a.sum / a.count);
  return out;
}

inline std::vector<Cluster> extract_clusters(const std::vector<Vec3>& points,
                                             const LidarPerceptParams& params) {
  const DbscanResult res = dbscan(points, params.eps, params.min_pts);
  std::vector<Cluster> clusters(res.n_clusters);
  for (size_t i = 0; i < points.size(); ++i) {
    if (res.labels[i] < 0) continue;
    clusters[res.labels[i]].members.push_back(points[i]);
  }
  for (Cluster& c : clusters) {
    Vec3 sum = Vec3::Zero();
    for (const Vec3& p : c.members) sum += p;
    c.centroid = sum / static_cast<double>(c.members.size());
    c.box = bounding_box(c.members);
  }
  return clusters;
}

inline double box_association_cost(const Aabb3& a, const Aabb3& b) {
  const Vec3 d = a.center - b.center;
  return 2.0 * d.head<2>().norm() + std::abs(d.z()) - aabb_iou3d(a, b);
}

// Population statistics over the history window; classification requires a full window.
inline MotionClass classify_motion(const std::deque<HistorySample>& history,
                                   const LidarPerceptParams& params) {
  if (static_cast<int>(history.size()) < params.history_k) return MotionClass::kUnknown;
  const double n = static_cast<double>(history.size());
  Vec3 mean_p = Vec3::Zero();
  double mean_s = 0.0;
  for (const HistorySample& h : history) {
    mean_p += h.position;
    mean_s += h.velocity.norm();
  }
  mean_p /= n;
  mean_s /= n;
  double trace = 0.0;
  double var_s = 0.0;
  for (const HistorySample& h : history) {
    trace += (h.position - mean_p).squaredNorm();
    const double ds = h.velocity.norm() - mean_s;
    var_s += ds * ds;
  }
  trace /= n;
  var_s /= n;
  if (trace > params.eps_p || std::sqrt(var_s) > params.eps_v) return MotionClass::kDynamic;
  return MotionClass::kStatic;
}

class LidarPipeline {
 public:
  explicit LidarPipeline(const LidarPerceptParams& params = {}) : params_(params) {}

  const std::vector<ObstacleTrack>& step(const PointCloud& cloud, const RobotState& robot,
                                         double dt) {
    for (ObstacleTrack& t : tracks_) t.kalman.predict(dt);

    const PointCloud roi = roi_filter(cloud, robot, params_);
    const std::vector<Cluster> clusters = extract_clusters(roi.points, params_);

    std::vector<Aabb3> pred_boxes;
    pred_boxes.reserve(tracks_.size());
    for (const ObstacleTrack& t : tracks_) {
      pred_boxes.push_back(Aabb3{t.kalman.position(), t.box.half_extents});
    }
    const auto cost = [&](int i, int j) {
      return box_association_cost(pred_boxes[i], clusters[j].box);
    };
    const auto admissible = [&](int i, int j) {
      return (pred_boxes[i].center.head<2>() - clusters[j].box.center.head<2>()).norm() <=
             params_.gate_xy;
    };
    const Matching m = match_bipartite(static_cast<int>(tracks_.size()),
                                       static_cast<int>(clusters.size()), cost, admissible);

    const Vec3 sensor = robot.position + Vec3(0.0, 0.0, params_.sensor_height);
    std::vector<char> track_matched(tracks_.size(), 0);
    for (const auto& [ti, ci] : m.pairs) {
      track_matched[ti] = 1;
      apply_measurement(tracks_[ti], clusters[ci], sensor);
      tracks_[ti].hits += 1;
      tracks_[ti].misses = 0;
      if (tracks_[ti].hits >= params_.m_confirm) tracks_[ti].confirmed = true;
    }
    for (size_t i = 0; i < tracks_.size(); ++i) {
      if (!track_matched[i]) tracks_[i].misses += 1;
    }
    tracks_.erase(std::remove_if(tracks_.begin(), tracks_.end(),
                                 [&](const ObstacleTrack& t) {
                                   return t.misses > params_.m_die;
                                 }),
                  tracks_.end());

    for (const int ci : m.unmatched_curr) {
      ObstacleTrack t;
      t.id = next_id_++;
      t.kalman = Cv3Kalman(compensated_centroid(clusters[ci], sensor), params_.kalman);
      t.box = clusters[ci].box;
      t.radius_est = half_max_horizontal_extent(clusters[ci].box);
      t.hits = 1;
      t.confirmed = params_.m_confirm <= 1;
      tracks_.push_back(std::move(t));
    }

    for (ObstacleTrack& t : tracks_) {
      t.history.push_back({t.kalman.position(), t.kalman.velocity()});
      while (static_cast<int>(t.history.size()) > params_.history_k) t.history.pop_front();
      t.motion = classify_motion(t.history, params_);
    }
    return tracks_;
  }

  const std::vector<ObstacleTrack>& tracks() const { return tracks_; }
  const LidarPerceptParams& params() const { return params_; }

 private:
  static double half_max_horizontal_extent(const Aabb3& box) {
    return std::max(box.half_extents.x(), box.half_extents.y());
  }

  Vec3 compensated_centroid(const Cluster& c, const Vec3& sensor) const {
    // The sensor sees only the near face, so the raw centroid under-ranges;
    // push it half an estimated radius further along the line of sight.
    const Vec3 ray = c.centroid - sensor;
    const double n = ray.norm();
    if (n < 1e-9) return c.centroid;
    return c.centroid + (half_max_horizontal_extent(c.box) / 2.0) * (ray / n);
  }

  void apply_measurement(ObstacleTrack& t, const Cluster& c, const Vec3& sensor) {
    t.kalman.update(compensated_centroid(c, sensor));
    t.box = c.box;
    t.radius_est = half_max_horizontal_extent(c.box);
  }

  LidarPerceptParams params_;
  std::vector<ObstacleTrack> tracks_;
  int next_id_ = 0;
};

}  // namespace evasim
