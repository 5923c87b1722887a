#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "evasim/core.hpp"

namespace evasim {

struct StateSample {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double timestamp = 0.0;
};

struct PredictorInput {
  std::vector<StateSample> samples;  // time-ordered, newest last
};

struct Forecast {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double horizon = 0.0;
};

enum class PredictBackend { kCv, kLsq1, kLsq2 };

inline PredictBackend predict_backend_from_string(const std::string& name) {
  if (name == "cv") return PredictBackend::kCv;
  if (name == "lsq") return PredictBackend::kLsq1;
  if (name == "lsq2") return PredictBackend::kLsq2;
  throw ConfigError("unknown prediction backend: " + name);
}

namespace detail {

// Per-axis polynomial fit in time relative to the newest sample, evaluated at
// the requested horizon together with its derivative.
inline void lsq_extrapolate(const PredictorInput& input, double horizon, int degree,
                            Vec3& position, Vec3& velocity) {
  const int n = static_cast<int>(input.samples.size());
  const int deg = std::min(degree, n - 1);
  const double t_ref = input.samples.back().timestamp;
  Eigen::MatrixXd a(n, deg + 1);
  Eigen::MatrixXd b(n, 3);
  for (int i = 0; i < n; ++i) {
    const double dt = input.samples[i].timestamp - t_ref;
    double pw = 1.0;
    for (int j = 0; j <= deg; ++j) {
      a(i, j) = pw;
      pw *= dt;
    }
    b.row(i) = input.samples[i].position.transpose();
  }
  const Eigen::MatrixXd coef = a.colPivHouseholderQr().solve(b);
  position = Vec3::Zero();
  velocity = Vec3::Zero();
  double pw = 1.0;
  for (int j = 0; j <= deg; ++j) {
    position += coef.row(j).transpose() * pw;
    if (j + 1 <= deg) velocity += coef.row(j + 1).transpose() * ((j + 1) * pw);
    pw *= horizon;
  }
}

}  // namespace detail

inline std::optional<Forecast> predict(const PredictorInput& input, double horizon,
                                       PredictBackend backend) {
  if (horizon <= 0.0) throw ConfigError("forecast horizon must be positive");
  if (input.samples.empty()) return std::nullopt;

  Forecast f;
  f.horizon = horizon;
  const StateSample& last = input.samples.back();
  const bool lsq_viable = input.samples.size() >= 2;
  if (backend == PredictBackend::kCv || !lsq_viable) {
    f.position = last.position + horizon * last.velocity;
    f.velocity = last.velocity;
    return f;
  }
  const int degree = backend == PredictBackend::kLsq2 ? 2 : 1;
  detail::lsq_extrapolate(input, horizon, degree, f.position, f.velocity);
  return f;
}

}  // namespace evasim
