#include <blockloc/core/error.hpp>
#include <blockloc/imu/preintegration.hpp>

#include <Eigen/Cholesky>

#include <cmath>

namespace blockloc {

Quatd PreintDelta::rot_at(const ImuBias& b) const {
  const Vec3d db = b.gyro - lin_bias.gyro;
  return (rot * so3_exp<double>(jrot_bg * db)).normalized();
}

Vec3d PreintDelta::vel_at(const ImuBias& b) const {
  return vel + jvel_bg * (b.gyro - lin_bias.gyro) + jvel_ba * (b.accel - lin_bias.accel);
}

Vec3d PreintDelta::pos_at(const ImuBias& b) const {
  return pos + jpos_bg * (b.gyro - lin_bias.gyro) + jpos_ba * (b.accel - lin_bias.accel);
}

PreintDelta preintegrate(const std::vector<ImuSample>& samples, const ImuBias& bias,
                         const ImuNoise& noise) {
  if (samples.empty()) throw BadImuStream("no samples");
  for (size_t i = 1; i < samples.size(); ++i) {
    if (!(samples[i].stamp > samples[i - 1].stamp)) {
      throw BadImuStream("non-monotonic imu stamps");
    }
  }

  PreintDelta d;
  d.lin_bias = bias;

  Mat3d R = Mat3d::Identity();  // current Delta R
  for (size_t i = 0; i + 1 < samples.size(); ++i) {
    const ImuSample& a = samples[i];
    const ImuSample& b = samples[i + 1];
    const double dt = b.stamp - a.stamp;
    const Vec3d w = 0.5 * (a.gyro + b.gyro) - bias.gyro;
    const Vec3d acc0 = a.accel - bias.accel;
    const Vec3d acc1 = b.accel - bias.accel;

    const Mat3d dR = so3_exp<double>(w * dt).toRotationMatrix();
    const Mat3d R_next = R * dR;
    const Vec3d a_mid = 0.5 * (R * acc0 + R_next * acc1);

    // Covariance propagation, states ordered (theta, v, p).
    const Mat3d Jr = so3_right_jacobian<double>(w * dt);
    Eigen::Matrix<double, 9, 9> F = Eigen::Matrix<double, 9, 9>::Identity();
    F.block<3, 3>(0, 0) = dR.transpose();
    F.block<3, 3>(3, 0) = -0.5 * dt * (R * skew(acc0) + R_next * skew(acc1) * dR.transpose());
    F.block<3, 3>(6, 0) = 0.5 * dt * F.block<3, 3>(3, 0);
    F.block<3, 3>(6, 3) = dt * Mat3d::Identity();

    Eigen::Matrix<double, 9, 6> G = Eigen::Matrix<double, 9, 6>::Zero();
    G.block<3, 3>(0, 0) = Jr * dt;
    G.block<3, 3>(3, 3) = 0.5 * (R + R_next) * dt;
    G.block<3, 3>(6, 3) = 0.25 * (R + R_next) * dt * dt;

    Eigen::Matrix<double, 6, 6> Q = Eigen::Matrix<double, 6, 6>::Zero();
    Q.topLeftCorner<3, 3>() =
        Mat3d::Identity() * (noise.gyro_noise * noise.gyro_noise / dt);
    Q.bottomRightCorner<3, 3>() =
        Mat3d::Identity() * (noise.accel_noise * noise.accel_noise / dt);
    d.covariance = F * d.covariance * F.transpose() + G * Q * G.transpose();

    // Bias Jacobians, midpoint-consistent recursions.
    const Mat3d jrot_prev = d.jrot_bg;
    d.jrot_bg = dR.transpose() * d.jrot_bg - Jr * dt;
    const Mat3d dv_dbg =
        -0.5 * dt * (R * skew(acc0) * jrot_prev + R_next * skew(acc1) * d.jrot_bg);
    const Mat3d dv_dba = -0.5 * dt * (R + R_next);
    d.jpos_bg += d.jvel_bg * dt + 0.5 * dt * dv_dbg;
    d.jpos_ba += d.jvel_ba * dt + 0.5 * dt * dv_dba;
    d.jvel_bg += dv_dbg;
    d.jvel_ba += dv_dba;

    d.pos += d.vel * dt + 0.5 * a_mid * dt * dt;
    d.vel += a_mid * dt;
    R = R_next;
    d.dt += dt;
  }
  d.rot = Quatd(R).normalized();
  d.covariance = 0.5 * (d.covariance + d.covariance.transpose().eval());
  return d;
}

ImuResidual imu_residual(const NavState& si, const NavState& sj, const PreintDelta& delta,
                         const Vec3d& gravity, const ImuNoise& noise) {
  using Mat15 = Eigen::Matrix<double, 15, 15>;

  const Mat3d Ri = si.pose.rotation.toRotationMatrix();
  const Mat3d Rj = sj.pose.rotation.toRotationMatrix();
  const Mat3d Ri_t = Ri.transpose();
  const double dt = delta.dt;

  const Vec3d dbg = si.bias.gyro - delta.lin_bias.gyro;

  const Quatd rot_corr = delta.rot_at(si.bias);
  const Vec3d vel_corr = delta.vel_at(si.bias);
  const Vec3d pos_corr = delta.pos_at(si.bias);

  ImuResidual out;
  const Mat3d E = rot_corr.toRotationMatrix().transpose() * (Ri_t * Rj);
  const Vec3d r_rot = so3_log(Quatd(E).normalized());
  const Vec3d dv = sj.velocity - si.velocity - gravity * dt;
  const Vec3d dp = sj.pose.translation - si.pose.translation - si.velocity * dt -
                   0.5 * gravity * dt * dt;
  const Vec3d r_vel = Ri_t * dv - vel_corr;
  const Vec3d r_pos = Ri_t * dp - pos_corr;

  out.value.segment<3>(0) = r_rot;
  out.value.segment<3>(3) = r_vel;
  out.value.segment<3>(6) = r_pos;
  out.value.segment<3>(9) = sj.bias.gyro - si.bias.gyro;
  out.value.segment<3>(12) = sj.bias.accel - si.bias.accel;

  // State tangent ordering: (rho, phi, v, bg, ba); pose perturbs on the
  // right, T Exp(delta), so translation moves by R * drho.
  const Mat3d Jr_inv = so3_right_jacobian_inv(r_rot);
  const Mat3d Jr_b = so3_right_jacobian<double>(Vec3d(delta.jrot_bg * dbg));

  auto& Ji = out.jacobian_i;
  auto& Jj = out.jacobian_j;

  // r_rot
  Ji.block<3, 3>(0, 3) = -Jr_inv * (Rj.transpose() * Ri);
  Ji.block<3, 3>(0, 9) = -Jr_inv * E.transpose() * Jr_b * delta.jrot_bg;
  Jj.block<3, 3>(0, 3) = Jr_inv;

  // r_vel
  Ji.block<3, 3>(3, 3) = skew(Vec3d(Ri_t * dv));
  Ji.block<3, 3>(3, 6) = -Ri_t;
  Ji.block<3, 3>(3, 9) = -delta.jvel_bg;
  Ji.block<3, 3>(3, 12) = -delta.jvel_ba;
  Jj.block<3, 3>(3, 6) = Ri_t;

  // r_pos
  Ji.block<3, 3>(6, 0) = -Mat3d::Identity();
  Ji.block<3, 3>(6, 3) = skew(Vec3d(Ri_t * dp));
  Ji.block<3, 3>(6, 6) = -Ri_t * dt;
  Ji.block<3, 3>(6, 9) = -delta.jpos_bg;
  Ji.block<3, 3>(6, 12) = -delta.jpos_ba;
  Jj.block<3, 3>(6, 0) = Ri_t * Rj;

  // bias random walk
  Ji.block<3, 3>(9, 9) = -Mat3d::Identity();
  Ji.block<3, 3>(12, 12) = -Mat3d::Identity();
  Jj.block<3, 3>(9, 9) = Mat3d::Identity();
  Jj.block<3, 3>(12, 12) = Mat3d::Identity();

  // Information: inverse preintegration covariance plus bias-walk blocks.
  Eigen::Matrix<double, 9, 9> cov = delta.covariance;
  cov.diagonal().array() += 1e-12;
  out.information = Mat15::Zero();
  out.information.topLeftCorner<9, 9>() =
      cov.ldlt().solve(Eigen::Matrix<double, 9, 9>::Identity());
  const double wt = std::max(dt, 1e-6);
  out.information.block<3, 3>(9, 9) =
      Mat3d::Identity() / (noise.gyro_walk * noise.gyro_walk * wt);
  out.information.block<3, 3>(12, 12) =
      Mat3d::Identity() / (noise.accel_walk * noise.accel_walk * wt);
  out.information = 0.5 * (out.information + out.information.transpose().eval());
  return out;
}

NavState forward_propagate(const NavState& state, const std::vector<ImuSample>& samples,
                           const Vec3d& gravity) {
  NavState out = state;
  if (samples.size() < 2) return out;
  for (size_t i = 0; i + 1 < samples.size(); ++i) {
    const ImuSample& a = samples[i];
    const ImuSample& b = samples[i + 1];
    const double dt = b.stamp - a.stamp;
    if (dt <= 0) throw BadImuStream("non-monotonic imu stamps");
    const Vec3d w = 0.5 * (a.gyro + b.gyro) - out.bias.gyro;
    const Quatd q_next = (out.pose.rotation * so3_exp<double>(w * dt)).normalized();
    const Vec3d acc_w = 0.5 * (out.pose.rotation * (a.accel - out.bias.accel) +
                               q_next * (b.accel - out.bias.accel)) +
                        gravity;
    out.pose.translation += out.velocity * dt + 0.5 * acc_w * dt * dt;
    out.velocity += acc_w * dt;
    out.pose.rotation = q_next;
  }
  return out;
}

Vec3d estimate_gravity(const std::vector<ImuSample>& samples, double magnitude) {
  Vec3d mean = Vec3d::Zero();
  if (samples.empty()) return Vec3d(0, 0, -magnitude);
  for (const auto& s : samples) mean += s.accel;
  mean /= static_cast<double>(samples.size());
  if (mean.norm() < 1e-6) return Vec3d(0, 0, -magnitude);
  return -mean.normalized() * magnitude;
}

}  // namespace blockloc
