#pragma once

#include <blockloc/geometry/trajectory.hpp>
#include <blockloc/imu/imu_types.hpp>
#include <blockloc/map/formats.hpp>
#include <blockloc/map/map_builder.hpp>

#include <string>
#include <vector>

namespace blockloc {
namespace sim {

// Axis-aligned box surface; the ray caster intersects against box shells.
struct Box {
  Vec3d lo = Vec3d::Zero();
  Vec3d hi = Vec3d::Zero();
};

struct WorldModel {
  std::vector<Box> boxes;
  Box bounds;                   // everything (trajectory included) must stay inside
  double surface_density = 50;  // points/m^2, for direct surface sampling
};

// Piecewise line/arc path through the waypoints at constant speed, corners
// rounded with a fillet radius so the analytic accelerations stay bounded.
struct TrajectorySpec {
  std::vector<Vec2d> waypoints;
  double speed = 1.5;          // m/s
  double fillet_radius = 2.0;  // m
  double hold_time = 1.0;      // stationary stretch at start (gravity estimation)
  double sensor_height = 1.0;  // z of the body/sensor frame
  bool yaw_follows_path = true;
  bool closed_loop = false;    // connect the last waypoint back to the first

  double frame_hz = 10.0;
  double imu_hz = 200.0;

  double range_sigma = 0.02;   // m
  double gyro_sigma = 0.0;     // rad/s
  double accel_sigma = 0.0;    // m/s^2
};

struct SensorModel {
  std::vector<double> ring_elevations_deg = {-15, -13, -11, -9, -7, -5, -3, -1,
                                             1,   3,   5,   7,  9,  11, 13, 15};
  int azimuth_steps = 240;
  double max_range = 60.0;
  double min_range = 0.5;
};

// Analytic trajectory state.
struct PathState {
  Vec3d position = Vec3d::Zero();
  double yaw = 0.0;
  Vec3d velocity = Vec3d::Zero();
  Vec3d acceleration = Vec3d::Zero();
  double yaw_rate = 0.0;
};

class PathModel {
 public:
  PathModel(const TrajectorySpec& spec);
  PathState state_at(double t) const;
  double duration() const { return total_time_; }
  PoseSE3d pose_at(double t) const;

 private:
  struct Segment {
    bool arc = false;
    double length = 0.0;
    // line: start point and unit direction; arc: center, radius, angles.
    Vec2d a = Vec2d::Zero(), dir = Vec2d::Zero();
    Vec2d center = Vec2d::Zero();
    double radius = 0.0, ang0 = 0.0, dang = 0.0;
  };
  std::vector<Segment> segments_;
  double speed_;
  double hold_;
  double z_;
  double total_len_ = 0.0;
  double total_time_ = 0.0;
};

struct Dataset {
  std::vector<RawScan> scans;
  std::vector<ImuSample> imu;
  Trajectory ground_truth;   // pose at each sweep start
  Trajectory offline_poses;  // what the map builder consumes
};

// Deterministic ray-cast rendering of the full dataset; noise is a pure
// function of (seed, frame, ring, azimuth).
Dataset render_dataset(const WorldModel& world, const TrajectorySpec& spec,
                       const SensorModel& sensor, uint64_t seed);

// First hit distance along the ray, or a negative value on a miss.
double raycast(const WorldModel& world, const Vec3d& origin, const Vec3d& dir,
               double max_range);

// Jittered uniform sampling of all box surfaces (test fixture helper).
PointCloud sample_surfaces(const WorldModel& world, uint64_t seed);

struct Scenario {
  WorldModel world;
  TrajectorySpec trajectory;
  SensorModel sensor;
  double block_size = 30.0;
};

// Built-in scenarios: "corridor-loop", "corridor-loop-large", "circle",
// "straight".
Scenario make_scenario(const std::string& name);

// Writes scan_%05d.scn, imu.csv, gt.txt, offline_poses.txt into dir.
void write_dataset(const Dataset& data, const std::string& dir);

std::vector<ImuSample> read_imu_csv(const std::string& path);
void write_imu_csv(const std::string& path, const std::vector<ImuSample>& samples);

}  // namespace sim
}  // namespace blockloc
