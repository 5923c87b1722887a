#include "evasim/core.hpp"
#include "evasim/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace evasim {
namespace {

TEST(WrapAngle, HalfOpenInterval) {
  EXPECT_DOUBLE_EQ(wrap_angle(0.0), 0.0);
  EXPECT_DOUBLE_EQ(wrap_angle(M_PI), M_PI);
  EXPECT_DOUBLE_EQ(wrap_angle(-M_PI), M_PI);
  EXPECT_DOUBLE_EQ(wrap_angle(3.0 * M_PI), M_PI);
  EXPECT_NEAR(wrap_angle(2.0 * M_PI), 0.0, 1e-12);
}

TEST(WrapAngle, PeriodicOverRandomAngles) {
  Pcg32 rng(7);
  for (int i = 0; i < 10000; ++i) {
    const double a = rng.uniform(-10.0, 10.0);
    const int k = static_cast<int>(rng.next_below(7)) - 3;
    const double w = wrap_angle(a + 2.0 * M_PI * k);
    EXPECT_NEAR(w, wrap_angle(a), 1e-9);
    EXPECT_GT(w, -M_PI);
    EXPECT_LE(w, M_PI);
  }
}

TEST(AabbIou, IdenticalUnitCubes) {
  Aabb3 a{{0.0, 0.0, 0.0}, {0.5, 0.5, 0.5}};
  EXPECT_DOUBLE_EQ(aabb_iou3d(a, a), 1.0);
}

TEST(AabbIou, DisjointBoxes) {
  Aabb3 a{{0.0, 0.0, 0.0}, {0.5, 0.5, 0.5}};
  Aabb3 b{{10.0, 0.0, 0.0}, {0.5, 0.5, 0.5}};
  EXPECT_DOUBLE_EQ(aabb_iou3d(a, b), 0.0);
}

TEST(AabbIou, HalfOffsetUnitCubes) {
  Aabb3 a{{0.0, 0.0, 0.0}, {0.5, 0.5, 0.5}};
  Aabb3 b{{0.5, 0.0, 0.0}, {0.5, 0.5, 0.5}};
  EXPECT_NEAR(aabb_iou3d(a, b), 1.0 / 3.0, 1e-12);
}

TEST(AabbIou, SymmetricAndBounded) {
  Pcg32 rng(11);
  for (int i = 0; i < 5000; ++i) {
    Aabb3 a{{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)},
            {rng.uniform(0.1, 1.5), rng.uniform(0.1, 1.5), rng.uniform(0.1, 1.5)}};
    Aabb3 b{{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)},
            {rng.uniform(0.1, 1.5), rng.uniform(0.1, 1.5), rng.uniform(0.1, 1.5)}};
    const double ab = aabb_iou3d(a, b);
    EXPECT_DOUBLE_EQ(ab, aabb_iou3d(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
  }
}

TEST(BoundingBox, TightlyContainsMembers) {
  std::vector<Vec3> pts = {{0, 0, 0}, {1, 2, 3}, {-1, 0.5, 2}};
  const Aabb3 box = bounding_box(pts);
  for (const Vec3& p : pts) {
    EXPECT_TRUE((p.array() >= box.min().array() - 1e-12).all());
    EXPECT_TRUE((p.array() <= box.max().array() + 1e-12).all());
  }
  EXPECT_NEAR(box.min().x(), -1.0, 1e-12);
  EXPECT_NEAR(box.max().y(), 2.0, 1e-12);
  EXPECT_NEAR(box.max().z(), 3.0, 1e-12);
}

CameraModel offset_camera() {
  CameraModel cam;
  cam.rotation = Eigen::AngleAxisd(0.7, Vec3(0.2, -0.5, 0.8).normalized()).toRotationMatrix();
  cam.translation = Vec3(1.5, -0.3, 0.4);
  return cam;
}

TEST(Camera, ProjectionRoundTrip) {
  const CameraModel cam = offset_camera();
  Pcg32 rng(13);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform(0.0, cam.width - 1e-6);
    const double v = rng.uniform(0.0, cam.height - 1e-6);
    const double z = rng.uniform(0.1, 50.0);
    const Vec3 p = backproject(cam, u, v, z);
    const auto px = project(cam, p);
    ASSERT_TRUE(px.has_value());
    EXPECT_NEAR(px->u, u, 1e-9);
    EXPECT_NEAR(px->v, v, 1e-9);
    EXPECT_NEAR(px->z, z, 1e-9);
    const Vec3 back = backproject(cam, px->u, px->v, px->z);
    EXPECT_LT((back - p).norm(), 1e-9);
  }
}

TEST(Camera, BehindCameraIsOutOfView) {
  const CameraModel cam = offset_camera();
  const Vec3 behind = cam.to_world(Vec3(0.0, 0.0, -1.0));
  EXPECT_FALSE(project(cam, behind).has_value());
}

TEST(Camera, OutsideImageBoundsIsOutOfView) {
  CameraModel cam;
  EXPECT_FALSE(project(cam, Vec3(100.0, 0.0, 1.0)).has_value());
  EXPECT_TRUE(project(cam, Vec3(0.0, 0.0, 1.0)).has_value());
}

TEST(Camera, RotationIsOrthonormal) {
  const CameraModel cam = offset_camera();
  EXPECT_LT((cam.rotation.transpose() * cam.rotation - Mat3::Identity()).norm(), 1e-9);
  EXPECT_NEAR(cam.rotation.determinant(), 1.0, 1e-9);
}

}  // namespace
}  // namespace evasim
