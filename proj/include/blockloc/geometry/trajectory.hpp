#pragma once

#include <blockloc/geometry/se3.hpp>

#include <string>
#include <vector>

namespace blockloc {

struct StampedPose {
  double stamp = 0.0;
  PoseSE3d pose;
};

using Trajectory = std::vector<StampedPose>;

// Text trajectory files, one pose per line:
//   timestamp tx ty tz qx qy qz qw
// Space separated, '#' starts a comment line.
Trajectory read_trajectory(const std::string& path);
void write_trajectory(const std::string& path, const Trajectory& traj);

std::string format_trajectory_line(const StampedPose& sp);
StampedPose parse_trajectory_line(const std::string& line);

}  // namespace blockloc
