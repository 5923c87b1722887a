#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace evasim {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Numerical failure inside a filter or solver. The CLI maps this to exit code 2.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration. The CLI maps this to exit code 3.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * M_PI);
  if (w <= -M_PI) w += 2.0 * M_PI;
  return w;
}

/// Planar robot base state. yaw is kept wrapped to (-pi, pi].
struct RobotState {
  Vec3 position{0.0, 0.0, 0.0};   ///< world frame [m]
  Vec3 velocity{0.0, 0.0, 0.0};   ///< world frame [m/s]
  double yaw = 0.0;               ///< heading [rad], in (-pi, pi]
  double yaw_rate = 0.0;          ///< [rad/s]
};

/// Axis-aligned box; half_extents must be strictly positive.
struct Aabb3 {
  Vec3 center{0.0, 0.0, 0.0};
  Vec3 half_extents{0.0, 0.0, 0.0};

  Vec3 min() const { return center - half_extents; }
  Vec3 max() const { return center + half_extents; }
};

/// Intersection-over-union of two boxes; symmetric, in [0, 1], 0 when disjoint.
inline double aabb_iou3d(const Aabb3& a, const Aabb3& b) {
  const Vec3 lo = a.min().cwiseMax(b.min());
  const Vec3 hi = a.max().cwiseMin(b.max());
  const Vec3 d = (hi - lo).cwiseMax(0.0);
  const double inter = d.x() * d.y() * d.z();
  const double va = 8.0 * a.half_extents.prod();
  const double vb = 8.0 * b.half_extents.prod();
  const double uni = va + vb - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

/// Fits the tightest box around a non-empty point set.
inline Aabb3 bounding_box(const std::vector<Vec3>& pts, double min_half_extent = 1e-6) {
  Vec3 lo = pts.front();
  Vec3 hi = pts.front();
  for (const Vec3& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  Aabb3 box;
  box.center = 0.5 * (lo + hi);
  box.half_extents = (0.5 * (hi - lo)).cwiseMax(min_half_extent);
  return box;
}

struct PixelPoint {
  double u = 0.0;  ///< column [px]
  double v = 0.0;  ///< row [px]
  double z = 0.0;  ///< camera-frame depth [m], > 0 for visible points
};

/// Pinhole camera. rotation/translation form the world-from-camera transform:
/// p_world = rotation * p_cam + translation. Camera frame is z forward,
/// x right, y down.
struct CameraModel {
  double fx = 240.0;  ///< [px]
  double fy = 240.0;  ///< [px]
  double cx = 159.5;  ///< [px]
  double cy = 119.5;  ///< [px]
  int width = 320;
  int height = 240;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation{0.0, 0.0, 0.0};

  Vec3 to_camera(const Vec3& p_world) const {
    return rotation.transpose() * (p_world - translation);
  }
  Vec3 to_world(const Vec3& p_cam) const { return rotation * p_cam + translation; }
};

/// Projects a world point; empty when behind the camera or outside the image.
inline std::optional<PixelPoint> project(const CameraModel& cam, const Vec3& p_world) {
  const Vec3 pc = cam.to_camera(p_world);
  if (pc.z() <= 0.0) return std::nullopt;
  PixelPoint px;
  px.u = cam.fx * pc.x() / pc.z() + cam.cx;
  px.v = cam.fy * pc.y() / pc.z() + cam.cy;
  px.z = pc.z();
  if (px.u < 0.0 || px.u >= cam.width || px.v < 0.0 || px.v >= cam.height) return std::nullopt;
  return px;
}

/// Inverse of project for depth z > 0; returns the world-frame point.
inline Vec3 backproject(const CameraModel& cam, double u, double v, double z) {
  const Vec3 pc((u - cam.cx) * z / cam.fx, (v - cam.cy) * z / cam.fy, z);
  return cam.to_world(pc);
}

/// One sensor frame of world-frame points.
struct PointCloud {
  double timestamp = 0.0;  ///< [s]
  std::vector<Vec3> points;
};

}  // namespace evasim
