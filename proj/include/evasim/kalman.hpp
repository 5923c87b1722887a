#pragma once

#include "evasim/core.hpp"

namespace evasim {

using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

struct KalmanParams {
  double sigma_a = 3.0;        ///< white-acceleration process noise [m/s^2]
  double sigma_z = 0.05;       ///< position measurement noise [m]
  double init_pos_var = 0.01;  ///< [m^2]
  double init_vel_var = 25.0;  ///< [m^2/s^2]
};

/// Constant-velocity filter over [position; velocity]. The update uses the
/// Joseph form and re-symmetrizes, and every update verifies the covariance
/// stays PSD, throwing NumericalError otherwise.
class Cv3Kalman {
 public:
  Cv3Kalman() = default;
  Cv3Kalman(const Vec3& p0, const KalmanParams& params) : params_(params) {
    x_.head<3>() = p0;
    x_.tail<3>().setZero();
    P_.setZero();
    P_.topLeftCorner<3, 3>() = Mat3::Identity() * params.init_pos_var;
    P_.bottomRightCorner<3, 3>() = Mat3::Identity() * params.init_vel_var;
  }

  void predict(double dt) {
    Mat6 F = Mat6::Identity();
    F.topRightCorner<3, 3>() = Mat3::Identity() * dt;
    const double q = params_.sigma_a * params_.sigma_a;
    const double dt2 = dt * dt;
    Mat6 Q = Mat6::Zero();
    Q.topLeftCorner<3, 3>() = Mat3::Identity() * (q * dt2 * dt2 / 4.0);
    Q.topRightCorner<3, 3>() = Mat3::Identity() * (q * dt2 * dt / 2.0);
    Q.bottomLeftCorner<3, 3>() = Q.topRightCorner<3, 3>();
    Q.bottomRightCorner<3, 3>() = Mat3::Identity() * (q * dt2);
    x_ = F * x_;
    P_ = F * P_ * F.transpose() + Q;
  }

  void update(const Vec3& z) {
    Eigen::Matrix<double, 3, 6> H = Eigen::Matrix<double, 3, 6>::Zero();
    H.leftCols<3>() = Mat3::Identity();
    const Mat3 R = Mat3::Identity() * (params_.sigma_z * params_.sigma_z);
    const Mat3 S = H * P_ * H.transpose() + R;
    const Eigen::Matrix<double, 6, 3> K = P_ * H.transpose() * S.inverse();
    x_ += K * (z - H * x_);
    const Mat6 IKH = Mat6::Identity() - K * H;
    P_ = IKH * P_ * IKH.transpose() + K * R * K.transpose();
    const Mat6 sym = 0.5 * (P_ + P_.transpose());
    P_ = sym;
    check_psd();
  }

  Vec3 position() const { return x_.head<3>(); }
  Vec3 velocity() const { return x_.tail<3>(); }
  const Vec6& state() const { return x_; }
  const Mat6& covariance() const { return P_; }

  double min_covariance_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Mat6> es(P_, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

 private:
  void check_psd() const {
    if (min_covariance_eigenvalue() < -1e-12) {
      throw NumericalError("covariance lost positive semidefiniteness");
    }
  }

  KalmanParams params_;
  Vec6 x_ = Vec6::Zero();
  Mat6 P_ = Mat6::Identity();
};

}  // namespace evasim
