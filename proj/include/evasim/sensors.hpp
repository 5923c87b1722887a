#pragma once

#include "evasim/core.hpp"
#include "evasim/rng.hpp"
#include "evasim/simworld.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace evasim {

struct LidarSpec {
  int rays_azimuth = 360;
  int rays_elevation = 16;
  double elev_lo = -0.09;      ///< [rad]
  double elev_hi = 0.26;       ///< [rad]
  double max_range = 30.0;     ///< [m]
  double sigma_range = 0.02;   ///< [m]
  double dropout = 0.02;       ///< per-ray miss probability
  double sensor_height = 0.3;  ///< above the robot center [m]
};

namespace detail {

/// Nearest positive hit distance of a unit-direction ray with a sphere,
/// negative when there is none.
inline double ray_sphere(const Vec3& origin, const Vec3& dir, const Vec3& center, double r) {
  const Vec3 oc = origin - center;
  const double b = oc.dot(dir);
  const double c = oc.squaredNorm() - r * r;
  const double disc = b * b - c;
  if (disc < 0.0) return -1.0;
  const double sq = std::sqrt(disc);
  const double t0 = -b - sq;
  if (t0 > 0.0) return t0;
  const double t1 = -b + sq;
  return t1 > 0.0 ? t1 : -1.0;
}

}  // namespace detail

/// Casts the azimuth x elevation grid from the sensor mounted above the robot
/// center. Returns world-frame hits on obstacle spheres and the ground plane,
/// with optional range noise and dropout. The grid is world-aligned: the unit
/// spins freely, so coverage does not depend on robot yaw.
inline PointCloud render_lidar(const WorldState& w, const LidarSpec& spec, Pcg32& rng) {
  PointCloud cloud;
  cloud.timestamp = w.time;
  const Vec3 origin = w.robot.position + Vec3(0.0, 0.0, spec.sensor_height);
  const double elev_step =
      spec.rays_elevation > 1 ? (spec.elev_hi - spec.elev_lo) / (spec.rays_elevation - 1) : 0.0;
  for (int ia = 0; ia < spec.rays_azimuth; ++ia) {
    const double az = 2.0 * M_PI * ia / spec.rays_azimuth;
    const double ca = std::cos(az);
    const double sa = std::sin(az);
    for (int ie = 0; ie < spec.rays_elevation; ++ie) {
      const double el = spec.elev_lo + elev_step * ie;
      const double ce = std::cos(el);
      const Vec3 dir(ca * ce, sa * ce, std::sin(el));
      double best = spec.max_range;
      bool hit = false;
      for (const ObstacleTruth& o : w.obstacles) {
        if (!o.active) continue;
        const double t = detail::ray_sphere(origin, dir, o.position, o.radius);
        if (t > 0.0 && t < best) {
          best = t;
          hit = true;
        }
      }
      if (dir.z() < 0.0) {
        const double t_ground = -origin.z() / dir.z();
        if (t_ground > 0.0 && t_ground < best) {
          best = t_ground;
          hit = true;
        }
      }
      if (!hit) continue;
      if (spec.dropout > 0.0 && rng.bernoulli(spec.dropout)) continue;
      const double range = spec.sigma_range > 0.0 ? best + rng.gaussian(0.0, spec.sigma_range) : best;
      cloud.points.push_back(origin + range * dir);
    }
  }
  return cloud;
}

struct DepthImage {
  int width = 0;
  int height = 0;
  double timestamp = 0.0;
  double far_plane = 30.0;  ///< background value [m]
  std::vector<double> depth;

  double at(int u, int v) const { return depth[static_cast<size_t>(v) * width + u]; }
  double& at(int u, int v) { return depth[static_cast<size_t>(v) * width + u]; }
  bool is_background(int u, int v) const { return at(u, v) <= 0.0 || at(u, v) >= far_plane; }
};

struct CameraRig {
  double fx = 240.0;
  double fy = 240.0;
  int width = 320;
  int height = 240;
  double mount_height = 0.3;  ///< camera center above the robot center [m]
  double far_plane = 30.0;
  double sigma_depth = 0.0;  ///< per-pixel depth noise [m]
};

/// Forward-mounted camera: optical axis along the robot heading, x right,
/// y down. Principal point at the image center.
inline CameraModel camera_pose(const CameraRig& rig, const RobotState& robot) {
  CameraModel cam;
  cam.fx = rig.fx;
  cam.fy = rig.fy;
  cam.cx = rig.width / 2.0 - 0.5;
  cam.cy = rig.height / 2.0 - 0.5;
  cam.width = rig.width;
  cam.height = rig.height;
  const double c = std::cos(robot.yaw);
  const double s = std::sin(robot.yaw);
  cam.rotation.col(0) = Vec3(s, -c, 0.0);   // camera x: right of heading
  cam.rotation.col(1) = Vec3(0.0, 0.0, -1.0);  // camera y: down
  cam.rotation.col(2) = Vec3(c, s, 0.0);    // camera z: along heading
  cam.translation = robot.position + Vec3(0.0, 0.0, rig.mount_height);
  return cam;
}

/// Per-pixel ray/sphere depth, nearest surface wins, background at far plane.
/// Pixels are only evaluated inside each sphere's projected bounding region.
inline DepthImage render_depth(const WorldState& w, const CameraModel& cam, const CameraRig& rig,
                               Pcg32& rng) {
  DepthImage img;
  img.width = cam.width;
  img.height = cam.height;
  img.timestamp = w.time;
  img.far_plane = rig.far_plane;
  img.depth.assign(static_cast<size_t>(cam.width) * cam.height, rig.far_plane);

  for (const ObstacleTruth& o : w.obstacles) {
    if (!o.active) continue;
    const Vec3 pc = cam.to_camera(o.position);
    const double d = pc.norm();
    if (pc.z() <= 0.0 || d <= o.radius) continue;
    // Conservative pixel bounds from the angular radius of the silhouette.
    const double sin_th = o.radius / d;
    const double tan_th = sin_th / std::sqrt(1.0 - sin_th * sin_th);
    const double u0 = cam.fx * pc.x() / pc.z() + cam.cx;
    const double v0 = cam.fy * pc.y() / pc.z() + cam.cy;
    const double margin_u = cam.fx * tan_th * (d / pc.z()) * 1.5 + 2.0;
    const double margin_v = cam.fy * tan_th * (d / pc.z()) * 1.5 + 2.0;
    const int umin = std::max(0, static_cast<int>(std::floor(u0 - margin_u)));
    const int umax = std::min(cam.width - 1, static_cast<int>(std::ceil(u0 + margin_u)));
    const int vmin = std::max(0, static_cast<int>(std::floor(v0 - margin_v)));
    const int vmax = std::min(cam.height - 1, static_cast<int>(std::ceil(v0 + margin_v)));
    for (int v = vmin; v <= vmax; ++v) {
      for (int u = umin; u <= umax; ++u) {
        const double dx = (u - cam.cx) / cam.fx;
        const double dy = (v - cam.cy) / cam.fy;
        // Ray r(z) = z * (dx, dy, 1): the parameter is camera depth directly.
        const double a = dx * dx + dy * dy + 1.0;
        const double b = -2.0 * (dx * pc.x() + dy * pc.y() + pc.z());
        const double c = pc.squaredNorm() - o.radius * o.radius;
        const double disc = b * b - 4.0 * a * c;
        if (disc < 0.0) continue;
        const double z = (-b - std::sqrt(disc)) / (2.0 * a);
        if (z <= 0.0) continue;
        double& cell = img.at(u, v);
        if (z < cell) cell = z;
      }
    }
  }
  if (rig.sigma_depth > 0.0) {
    for (double& z : img.depth) {
      if (z < img.far_plane) z = std::max(1e-3, z + rng.gaussian(0.0, rig.sigma_depth));
    }
  }
  return img;
}

struct Detection2D {
  std::string cls;
  double u_min = 0.0, v_min = 0.0, u_max = 0.0, v_max = 0.0;  ///< [px]
  double conf = 1.0;
  double t = 0.0;  ///< frame time [s]
};

struct DetectorNoise {
  double sigma_px = 1.0;    ///< bbox corner jitter [px]
  double p_fn = 0.05;       ///< per-object miss probability
  double p_fp = 0.02;       ///< per-frame spurious detection probability
  double p_lowconf = 0.15;  ///< probability a true detection reports conf < 0.5
  double min_extent = 2.0;  ///< reject boxes thinner than this [px]
};

/// Projects each in-view obstacle to its silhouette bounding box (sampled on
/// the exact silhouette circle, padded by one pixel so it contains every hit
/// pixel), with confidence, jitter, misses, and spurious boxes per the noise
/// spec. Class labels come from ground truth.
inline std::vector<Detection2D> synthetic_detector(const WorldState& w, const CameraModel& cam,
                                                   const DetectorNoise& noise, Pcg32& rng) {
  std::vector<Detection2D> dets;
  for (const ObstacleTruth& o : w.obstacles) {
    if (!o.active) continue;
    const Vec3 pc = cam.to_camera(o.position);
    const double d = pc.norm();
    if (pc.z() <= 0.0 || d <= o.radius) continue;

    // Silhouette circle of a sphere: center pulled toward the camera,
    // radius shrunk, in the plane orthogonal to the center direction.
    const Vec3 axis = pc / d;
    const double shrink = 1.0 - (o.radius * o.radius) / (d * d);
    const Vec3 ring_center = pc * shrink;
    const double ring_radius = o.radius * std::sqrt(shrink);
    Vec3 e1 = axis.cross(Vec3::UnitZ());
    if (e1.norm() < 1e-9) e1 = axis.cross(Vec3::UnitY());
    e1.normalize();
    const Vec3 e2 = axis.cross(e1);

    double u_lo = 1e18, u_hi = -1e18, v_lo = 1e18, v_hi = -1e18;
    bool any = false;
    constexpr int kRingSamples = 64;
    for (int k = 0; k < kRingSamples; ++k) {
      const double ang = 2.0 * M_PI * k / kRingSamples;
      const Vec3 q = ring_center + ring_radius * (std::cos(ang) * e1 + std::sin(ang) * e2);
      if (q.z() <= 0.0) continue;
      const double u = cam.fx * q.x() / q.z() + cam.cx;
      const double v = cam.fy * q.y() / q.z() + cam.cy;
      u_lo = std::min(u_lo, u);
      u_hi = std::max(u_hi, u);
      v_lo = std::min(v_lo, v);
      v_hi = std::max(v_hi, v);
      any = true;
    }
    if (!any) continue;

    Detection2D det;
    det.t = w.time;
    det.cls = o.label;
    det.u_min = u_lo - 1.0;
    det.u_max = u_hi + 1.0;
    det.v_min = v_lo - 1.0;
    det.v_max = v_hi + 1.0;
    if (noise.sigma_px > 0.0) {
      det.u_min += rng.gaussian(0.0, noise.sigma_px);
      det.u_max += rng.gaussian(0.0, noise.sigma_px);
      det.v_min += rng.gaussian(0.0, noise.sigma_px);
      det.v_max += rng.gaussian(0.0, noise.sigma_px);
      if (det.u_min > det.u_max) std::swap(det.u_min, det.u_max);
      if (det.v_min > det.v_max) std::swap(det.v_min, det.v_max);
    }
    det.u_min = std::clamp(det.u_min, 0.0, cam.width - 1.0);
    det.u_max = std::clamp(det.u_max, 0.0, cam.width - 1.0);
    det.v_min = std::clamp(det.v_min, 0.0, cam.height - 1.0);
    det.v_max = std::clamp(det.v_max, 0.0, cam.height - 1.0);
    if (det.u_max - det.u_min < noise.min_extent || det.v_max - det.v_min < noise.min_extent) {
      continue;
    }
    if (noise.p_fn > 0.0 && rng.bernoulli(noise.p_fn)) continue;
    det.conf = (noise.p_lowconf > 0.0 && rng.bernoulli(noise.p_lowconf))
                   ? rng.uniform(0.2, 0.5)
                   : rng.uniform(0.55, 0.95);
    dets.push_back(std::move(det));
  }

  if (noise.p_fp > 0.0 && rng.bernoulli(noise.p_fp)) {
    Detection2D fp;
    fp.t = w.time;
    fp.cls = "spurious";
    const double cu = rng.uniform(20.0, cam.width - 20.0);
    const double cv = rng.uniform(20.0, cam.height - 20.0);
    const double hw = rng.uniform(5.0, 20.0);
    const double hh = rng.uniform(5.0, 20.0);
    fp.u_min = std::max(0.0, cu - hw);
    fp.u_max = std::min(cam.width - 1.0, cu + hw);
    fp.v_min = std::max(0.0, cv - hh);
    fp.v_max = std::min(cam.height - 1.0, cv + hh);
    fp.conf = rng.uniform(0.2, 0.9);
    dets.push_back(std::move(fp));
  }
  return dets;
}

}  // namespace evasim
