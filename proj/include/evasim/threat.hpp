#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <unordered_map>
#include <vector>

#include "evasim/core.hpp"

namespace evasim {

struct ThreatParams {
  double alpha = 0.6;
  double gamma = 2.0;
  double r_safe = 1.0;
  double eps = 1e-3;
  int n_switch = 5;
  double t_lo = 0.2;
  double t_hi = 1.0;
  int camera_stale_frames = 3;

  void validate() const {
    if (alpha < 0.0 || alpha > 1.0) throw ConfigError("threat alpha must be in [0,1]");
    if (gamma < 1.0) throw ConfigError("threat gamma must be >= 1");
    if (r_safe <= 0.0) throw ConfigError("threat r_safe must be positive");
    if (eps <= 0.0) throw ConfigError("threat eps must be positive");
    if (t_lo >= t_hi) throw ConfigError("threat thresholds require t_lo < t_hi");
    if (n_switch < 1) throw ConfigError("threat n_switch must be >= 1");
  }
};

// dp points robot -> obstacle; closing speed is positive when approaching.
inline double closing_speed(const Vec3& dp, const Vec3& v_rel) {
  const double dist = dp.norm();
  if (dist < 1e-12) return v_rel.norm();
  return -(v_rel.dot(dp / dist));
}

inline double threat(const Vec3& dp, const Vec3& v_rel, const ThreatParams& params) {
  const double dist = dp.norm();
  const double closing = std::max(0.0, closing_speed(dp, v_rel));
  const double denom = dist + params.eps;
  return params.alpha * closing / denom +
         (1.0 - params.alpha) * std::pow(params.r_safe / denom, params.gamma);
}

inline double ttc(const Vec3& dp, const Vec3& v_rel, double eps) {
  return dp.norm() / (std::max(0.0, closing_speed(dp, v_rel)) + eps);
}

struct ThreatCandidate {
  int id = -1;
  double t_lidar = 0.0;
};

// Argmax target with switch hysteresis: a challenger must out-threaten the
// active target for n_switch consecutive steps before it takes over.
class TargetSelector {
 public:
  explicit TargetSelector(int n_switch) : n_switch_(n_switch) {}

  std::optional<int> step(const std::vector<ThreatCandidate>& candidates) {
    if (candidates.empty()) {
      active_.reset();
      counters_.clear();
      return active_;
    }
    const ThreatCandidate* active = nullptr;
    for (const ThreatCandidate& c : candidates) {
      if (active_ && c.id == *active_) active = &c;
    }
    if (!active) {
      active_ = argmax_id(candidates);
      counters_.clear();
      return active_;
    }

    std::unordered_map<int, int> next;
    const ThreatCandidate* winner = nullptr;
    for (const ThreatCandidate& c : candidates) {
      if (c.id == *active_) continue;
      int count = 0;
      if (c.t_lidar > active->t_lidar) {
        const auto it = counters_.find(c.id);
        count = std::min((it == counters_.end() ? 0 : it->second) + 1, n_switch_);
      }
      next[c.id] = count;
      if (count >= n_switch_) {
        if (!winner || c.t_lidar > winner->t_lidar ||
            (c.t_lidar == winner->t_lidar && c.id < winner->id)) {
          winner = &c;
        }
      }
    }
    counters_ = std::move(next);
    if (winner) {
      active_ = winner->id;
      counters_.clear();
    }
    return active_;
  }

  std::optional<int> active() const { return active_; }

 private:
  static int argmax_id(const std::vector<ThreatCandidate>& candidates) {
    const ThreatCandidate* best = &candidates[0];
    for (const ThreatCandidate& c : candidates) {
      if (c.t_lidar > best->t_lidar || (c.t_lidar == best->t_lidar && c.id < best->id)) {
        best = &c;
      }
    }
    return best->id;
  }

  int n_switch_;
  std::optional<int> active_;
  std::unordered_map<int, int> counters_;
};

// Holds the last camera-side value and how many frames ago it was produced.
class StalenessGate {
 public:
  explicit StalenessGate(int stale_frames) : stale_frames_(stale_frames) {}

  void update(const std::optional<double>& fresh) {
    if (fresh) {
      value_ = *fresh;
      age_ = 0;
    } else if (age_ <= stale_frames_) {
      age_ += 1;
    }
  }

  std::optional<double> current() const {
    if (age_ <= stale_frames_ && age_ >= 0) return value_;
    return std::nullopt;
  }

 private:
  int stale_frames_;
  double value_ = 0.0;
  int age_ = 1 << 20;  // starts stale
};

inline double fuse(double t_lidar, const std::optional<double>& t_camera) {
  return t_camera ? *t_camera : t_lidar;
}

}  // namespace evasim
