#include <blockloc/core/error.hpp>
#include <blockloc/geometry/trajectory.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace blockloc {

std::string format_trajectory_line(const StampedPose& sp) {
  char buf[256];
  const auto& q = sp.pose.rotation;
  const auto& t = sp.pose.translation;
  std::snprintf(buf, sizeof(buf), "%.9f %.9f %.9f %.9f %.9f %.9f %.9f %.9f",
                sp.stamp, t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w());
  return buf;
}

StampedPose parse_trajectory_line(const std::string& line) {
  std::istringstream ss(line);
  StampedPose sp;
  double qx, qy, qz, qw;
  if (!(ss >> sp.stamp >> sp.pose.translation.x() >> sp.pose.translation.y() >>
        sp.pose.translation.z() >> qx >> qy >> qz >> qw)) {
    throw IoError("bad trajectory line: " + line);
  }
  sp.pose.rotation = Quatd(qw, qx, qy, qz).normalized();
  return sp;
}

Trajectory read_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trajectory file: " + path);
  Trajectory traj;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    traj.push_back(parse_trajectory_line(line));
  }
  return traj;
}

void write_trajectory(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open trajectory file for writing: " + path);
  for (const auto& sp : traj) out << format_trajectory_line(sp) << "\n";
}

}  // namespace blockloc
