#pragma once

#include <blockloc/core/error.hpp>
#include <blockloc/core/types.hpp>

#include <cmath>

// SE(3) poses as unit quaternion + translation, se(3) twists as 6-vectors
// ordered (rho, phi) = (translation, rotation). Free functions only; all
// templated on the scalar so float/double pipelines share one implementation.

namespace blockloc {

// Below this rotation angle exp/log switch to their second-order series.
inline constexpr double kSmallAngle = 1e-6;

template <typename S>
struct PoseSE3 {
  Quat<S> rotation = Quat<S>::Identity();
  Vec3<S> translation = Vec3<S>::Zero();

  static PoseSE3 Identity() { return PoseSE3{}; }

  // Transform a point: R p + t.
  Vec3<S> operator*(const Vec3<S>& p) const { return rotation * p + translation; }

  Mat4<S> matrix() const {
    Mat4<S> m = Mat4<S>::Identity();
    m.template topLeftCorner<3, 3>() = rotation.toRotationMatrix();
    m.template topRightCorner<3, 1>() = translation;
    return m;
  }
};

template <typename S>
using TwistSe3 = Vec6<S>;

using PoseSE3d = PoseSE3<double>;
using TwistSe3d = TwistSe3<double>;

template <typename S>
Mat3<S> skew(const Vec3<S>& v) {
  Mat3<S> m;
  m << S(0), -v.z(), v.y(),
       v.z(), S(0), -v.x(),
      -v.y(), v.x(), S(0);
  return m;
}

template <typename S>
PoseSE3<S> compose(const PoseSE3<S>& a, const PoseSE3<S>& b) {
  PoseSE3<S> out;
  out.rotation = (a.rotation * b.rotation).normalized();
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

template <typename S>
PoseSE3<S> inverse(const PoseSE3<S>& p) {
  PoseSE3<S> out;
  out.rotation = p.rotation.conjugate().normalized();
  out.translation = -(out.rotation * p.translation);
  return out;
}

template <typename S>
S rotation_angle(const PoseSE3<S>& p) {
  const S w = std::abs(p.rotation.w());
  const S n = p.rotation.vec().norm();
  return S(2) * std::atan2(n, w);
}

template <typename S>
Quat<S> so3_exp(const Vec3<S>& phi) {
  const S theta2 = phi.squaredNorm();
  const S theta = std::sqrt(theta2);
  S half_sinc;  // sin(theta/2)/theta
  S half_cos;   // cos(theta/2)
  if (theta < S(kSmallAngle)) {
    half_sinc = S(0.5) - theta2 / S(48);
    half_cos = S(1) - theta2 / S(8);
  } else {
    half_sinc = std::sin(S(0.5) * theta) / theta;
    half_cos = std::cos(S(0.5) * theta);
  }
  Quat<S> q(half_cos, half_sinc * phi.x(), half_sinc * phi.y(), half_sinc * phi.z());
  return q.normalized();
}

template <typename S>
Vec3<S> so3_log(const Quat<S>& q_in) {
  Quat<S> q = q_in;
  if (q.w() < S(0)) q.coeffs() = -q.coeffs();
  const S n = q.vec().norm();
  const S w = q.w();
  if (n < S(kSmallAngle)) {
    // phi = 2 v / w, second order in n/w.
    return q.vec() * (S(2) / w) * (S(1) - n * n / (S(3) * w * w));
  }
  const S angle = S(2) * std::atan2(n, w);
  return q.vec() * (angle / n);
}

// Left Jacobian of SO(3): V(phi) with exp translation t = V(phi) rho.
template <typename S>
Mat3<S> so3_left_jacobian(const Vec3<S>& phi) {
  const S theta2 = phi.squaredNorm();
  const Mat3<S> px = skew(phi);
  if (theta2 < S(kSmallAngle) * S(kSmallAngle)) {
    return Mat3<S>::Identity() + S(0.5) * px + px * px / S(6);
  }
  const S theta = std::sqrt(theta2);
  const S a = (S(1) - std::cos(theta)) / theta2;
  const S b = (theta - std::sin(theta)) / (theta2 * theta);
  return Mat3<S>::Identity() + a * px + b * px * px;
}

template <typename S>
Mat3<S> so3_left_jacobian_inv(const Vec3<S>& phi) {
  const S theta2 = phi.squaredNorm();
  const Mat3<S> px = skew(phi);
  if (theta2 < S(kSmallAngle) * S(kSmallAngle)) {
    return Mat3<S>::Identity() - S(0.5) * px + px * px / S(12);
  }
  const S theta = std::sqrt(theta2);
  const S c = (S(1) / theta2) - (S(1) + std::cos(theta)) / (S(2) * theta * std::sin(theta));
  return Mat3<S>::Identity() - S(0.5) * px + c * px * px;
}

// Right Jacobian of SO(3): Exp(phi + d) ~ Exp(phi) Exp(Jr(phi) d).
template <typename S>
Mat3<S> so3_right_jacobian(const Vec3<S>& phi) {
  return so3_left_jacobian<S>(Vec3<S>(-phi));
}

template <typename S>
Mat3<S> so3_right_jacobian_inv(const Vec3<S>& phi) {
  return so3_left_jacobian_inv<S>(Vec3<S>(-phi));
}

template <typename S>
PoseSE3<S> se3_exp(const TwistSe3<S>& xi) {
  const Vec3<S> rho = xi.template head<3>();
  const Vec3<S> phi = xi.template tail<3>();
  PoseSE3<S> out;
  out.rotation = so3_exp(phi);
  out.translation = so3_left_jacobian(phi) * rho;
  return out;
}

// Inverse of se3_exp; defined for rotation angles below pi - 1e-6.
template <typename S>
TwistSe3<S> se3_log(const PoseSE3<S>& pose) {
  if (rotation_angle(pose) >= S(M_PI) - S(1e-6)) {
    throw NearPiRotation();
  }
  const Vec3<S> phi = so3_log(pose.rotation);
  TwistSe3<S> xi;
  xi.template tail<3>() = phi;
  xi.template head<3>() = so3_left_jacobian_inv(phi) * pose.translation;
  return xi;
}

// base * exp(alpha * xi), alpha in [0, 1].
template <typename S>
PoseSE3<S> pose_interpolate(const PoseSE3<S>& base, const TwistSe3<S>& xi, S alpha) {
  if (!(alpha >= S(0) && alpha <= S(1))) {
    throw InvalidAlpha("pose_interpolate: alpha outside [0,1]");
  }
  return compose(base, se3_exp<S>(TwistSe3<S>(alpha * xi)));
}

}  // namespace blockloc
