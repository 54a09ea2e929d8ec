#pragma once

#include <blockloc/geometry/se3.hpp>
#include <blockloc/imu/imu_types.hpp>
#include <blockloc/map/formats.hpp>

#include <vector>

namespace blockloc {

// Motion-compensated sweep, all points in the sweep-start sensor frame.
struct DeskewedScan {
  double stamp = 0.0;  // = RawScan::t_start
  PointCloud points;
};

struct DeskewStats {
  size_t gyro_fallbacks = 0;  // sweeps where a gyro gap forced twist-only rotation
};

// Relative motion over one frame period from the two previous poses:
// log(pose_km2^-1 * pose_km1).
TwistSe3d estimate_twist(const PoseSE3d& pose_km2, const PoseSE3d& pose_km1);

// Per-point correction into the sweep-start frame. Rotation comes from
// forward-integrated gyro samples covering the sweep (midpoint rule);
// translation is the constant-velocity alpha * rho from the twist. With an
// empty gyro list, or a gap above max_gyro_gap inside the sweep, rotation
// falls back to the twist as well.
DeskewedScan deskew_scan(const RawScan& scan, const TwistSe3d& twist,
                         const std::vector<ImuSample>& gyro, DeskewStats* stats = nullptr,
                         double max_gyro_gap = 0.02);

}  // namespace blockloc
