#include "evasim/predict.hpp"

#include <gtest/gtest.h>

#include "evasim/rng.hpp"
#include "evasim/simworld.hpp"

namespace evasim {
namespace {

PredictorInput linear_window(const Vec3& p0, const Vec3& v, int n, double dt) {
  PredictorInput in;
  for (int i = 0; i < n; ++i) {
    in.samples.push_back({p0 + v * (dt * i), v, dt * i});
  }
  return in;
}

TEST(Predict, CvExtrapolatesLinearly) {
  PredictorInput in;
  in.samples.push_back({Vec3(0, 0, 0), Vec3(1, 0, 0), 0.0});
  const auto f = predict(in, 0.1, PredictBackend::kCv);
  ASSERT_TRUE(f.has_value());
  EXPECT_LT((f->position - Vec3(0.1, 0, 0)).norm(), 1e-15);
  EXPECT_EQ(f->velocity, Vec3(1, 0, 0));
  EXPECT_DOUBLE_EQ(f->horizon, 0.1);
}

TEST(Predict, LsqMatchesCvOnLinearWindow) {
  const auto in = linear_window(Vec3(1, -2, 0.5), Vec3(0.7, 0.3, -0.1), 10, 0.02);
  const auto cv = predict(in, 0.05, PredictBackend::kCv);
  const auto lsq = predict(in, 0.05, PredictBackend::kLsq1);
  ASSERT_TRUE(cv && lsq);
  EXPECT_LT((cv->position - lsq->position).norm(), 1e-9);
  EXPECT_LT((cv->velocity - lsq->velocity).norm(), 1e-9);
}

TEST(Predict, QuadraticFitIsExactOnBallisticWindow) {
  const double g = 9.81;
  const Vec3 p0(0, 0, 2.0);
  const Vec3 v0(1.0, 0, 1.5);
  PredictorInput in;
  for (int i = 0; i < 10; ++i) {
    const double t = 0.02 * i;
    in.samples.push_back(
        {p0 + v0 * t - 0.5 * g * t * t * Vec3::UnitZ(), v0 - g * t * Vec3::UnitZ(), t});
  }
  const double h = 0.1;
  const auto f = predict(in, h, PredictBackend::kLsq2);
  ASSERT_TRUE(f.has_value());
  const double t_end = in.samples.back().timestamp + h;
  const double z_true = p0.z() + v0.z() * t_end - 0.5 * g * t_end * t_end;
  EXPECT_NEAR(f->position.z(), z_true, 1e-6);
}

TEST(Predict, ShiftEquivariant) {
  Pcg32 rng(5, 1);
  for (int rep = 0; rep < 50; ++rep) {
    PredictorInput in;
    for (int i = 0; i < 8; ++i) {
      in.samples.push_back({Vec3(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(0, 2)),
                            Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)),
                            0.02 * i});
    }
    const Vec3 shift(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10));
    PredictorInput shifted = in;
    for (auto& s : shifted.samples) s.position += shift;
    for (const auto backend :
         {PredictBackend::kCv, PredictBackend::kLsq1, PredictBackend::kLsq2}) {
      const auto a = predict(in, 0.2, backend);
      const auto b = predict(shifted, 0.2, backend);
      ASSERT_TRUE(a && b);
      EXPECT_LT((a->position + shift - b->position).norm(), 1e-9);
      EXPECT_LT((a->velocity - b->velocity).norm(), 1e-9);
    }
  }
}

TEST(Predict, DegenerateWindowReturnsSampleWithZeroVelocity) {
  PredictorInput in;
  for (int i = 0; i < 6; ++i) in.samples.push_back({Vec3(2, 1, 0.5), Vec3::Zero(), 0.02 * i});
  const auto f = predict(in, 0.1, PredictBackend::kLsq1);
  ASSERT_TRUE(f.has_value());
  EXPECT_LT((f->position - Vec3(2, 1, 0.5)).norm(), 1e-12);
  EXPECT_LT(f->velocity.norm(), 1e-12);
}

TEST(Predict, EmptyWindowGivesNoForecast) {
  EXPECT_FALSE(predict(PredictorInput{}, 0.1, PredictBackend::kCv).has_value());
}

TEST(Predict, NonPositiveHorizonRejected) {
  PredictorInput in;
  in.samples.push_back({Vec3::Zero(), Vec3::Zero(), 0.0});
  EXPECT_THROW(predict(in, 0.0, PredictBackend::kCv), ConfigError);
}

TEST(Predict, ZeroOneStepErrorOnLinearMotion) {
  const Vec3 v(0.4, -1.1, 0.2);
  const auto in = linear_window(Vec3(3, 2, 1), v, 10, 0.02);
  const Vec3 truth = in.samples.back().position + v * 0.02;
  for (const auto backend : {PredictBackend::kCv, PredictBackend::kLsq1}) {
    const auto f = predict(in, 0.02, backend);
    ASSERT_TRUE(f.has_value());
    EXPECT_LT((f->position - truth).norm(), 1e-12);
  }
}

TEST(Predict, BackendNamesParse) {
  EXPECT_EQ(predict_backend_from_string("cv"), PredictBackend::kCv);
  EXPECT_EQ(predict_backend_from_string("lsq"), PredictBackend::kLsq1);
  EXPECT_EQ(predict_backend_from_string("lsq2"), PredictBackend::kLsq2);
  EXPECT_THROW(predict_backend_from_string("lstm"), ConfigError);
}

}  // namespace
}  // namespace evasim
