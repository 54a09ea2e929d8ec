#pragma once

#include <blockloc/core/types.hpp>

namespace blockloc {

struct ImuSample {
  double stamp = 0.0;
  Vec3d accel = Vec3d::Zero();  // specific force, body frame (m/s^2)
  Vec3d gyro = Vec3d::Zero();   // angular rate, body frame (rad/s)
};

struct ImuBias {
  Vec3d gyro = Vec3d::Zero();
  Vec3d accel = Vec3d::Zero();
};

}  // namespace blockloc
