#pragma once

#include <blockloc/geometry/se3.hpp>
#include <blockloc/imu/imu_types.hpp>

#include <vector>

namespace blockloc {

struct ImuNoise {
  double gyro_noise = 1.7e-4;   // rad/s/sqrt(Hz)
  double accel_noise = 2.0e-3;  // m/s^2/sqrt(Hz)
  double gyro_walk = 1e-5;
  double accel_walk = 1e-4;
};

// Relative motion accumulated between two keyframes, independent of the
// absolute state except through the linearization bias. Gravity is excluded
// here and reintroduced by the residual.
struct PreintDelta {
  Quatd rot = Quatd::Identity();  // Delta R
  Vec3d vel = Vec3d::Zero();      // Delta v
  Vec3d pos = Vec3d::Zero();      // Delta p
  double dt = 0.0;

  Eigen::Matrix<double, 9, 9> covariance = Eigen::Matrix<double, 9, 9>::Zero();

  // First-order bias Jacobians (rows: rot, vel, pos).
  Mat3d jrot_bg = Mat3d::Zero();
  Mat3d jvel_bg = Mat3d::Zero();
  Mat3d jvel_ba = Mat3d::Zero();
  Mat3d jpos_bg = Mat3d::Zero();
  Mat3d jpos_ba = Mat3d::Zero();

  ImuBias lin_bias;  // bias the integration was linearized at

  // First-order reprediction at a shifted bias.
  Quatd rot_at(const ImuBias& b) const;
  Vec3d vel_at(const ImuBias& b) const;
  Vec3d pos_at(const ImuBias& b) const;
};

// Midpoint integration over the sample list. Throws BadImuStream on
// non-monotonic stamps or an empty list.
PreintDelta preintegrate(const std::vector<ImuSample>& samples, const ImuBias& bias,
                         const ImuNoise& noise = {});

// Full keyframe state the tracker optimizes.
struct NavState {
  PoseSE3d pose;
  Vec3d velocity = Vec3d::Zero();
  ImuBias bias;
};

// 15-dim residual (rot, vel, pos, bias-gyro, bias-accel) between two states
// under a preintegrated delta, with exact first-order Jacobians with
// respect to the 15-dim right-perturbation of each state.
struct ImuResidual {
  Eigen::Matrix<double, 15, 1> value = Eigen::Matrix<double, 15, 1>::Zero();
  Eigen::Matrix<double, 15, 15> jacobian_i = Eigen::Matrix<double, 15, 15>::Zero();
  Eigen::Matrix<double, 15, 15> jacobian_j = Eigen::Matrix<double, 15, 15>::Zero();
  Eigen::Matrix<double, 15, 15> information = Eigen::Matrix<double, 15, 15>::Zero();
};

ImuResidual imu_residual(const NavState& state_i, const NavState& state_j,
                         const PreintDelta& delta, const Vec3d& gravity,
                         const ImuNoise& noise = {});

// Dead reckoning for prediction and deskew rotation.
NavState forward_propagate(const NavState& state, const std::vector<ImuSample>& samples,
                           const Vec3d& gravity);

// Gravity direction from an assumed-stationary stretch of accelerometer
// data, scaled to the configured magnitude.
Vec3d estimate_gravity(const std::vector<ImuSample>& samples, double magnitude = 9.81);

}  // namespace blockloc
