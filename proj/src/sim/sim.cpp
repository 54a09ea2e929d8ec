#include <blockloc/core/error.hpp>
#include <blockloc/core/rng.hpp>
#include <blockloc/sim/sim.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>

namespace blockloc {
namespace sim {
namespace {

Vec2d perp_left(const Vec2d& d) { return Vec2d(-d.y(), d.x()); }

}  // namespace

PathModel::PathModel(const TrajectorySpec& spec)
    : speed_(spec.speed), hold_(spec.hold_time), z_(spec.sensor_height) {
  if (spec.waypoints.size() < 2) throw OutOfWorld("trajectory needs >= 2 waypoints");
  if (spec.speed <= 0) throw OutOfWorld("speed must be positive");

  std::vector<Vec2d> wps = spec.waypoints;
  if (spec.closed_loop) wps.push_back(wps.front());

  Vec2d cursor = wps[0];
  for (size_t i = 1; i < wps.size(); ++i) {
    const bool corner = (i + 1 < wps.size()) && spec.fillet_radius > 1e-6;
    const Vec2d target = wps[i];
    Vec2d d0 = target - cursor;
    const double edge_len = d0.norm();
    if (edge_len < 1e-9) continue;
    d0 /= edge_len;

    if (!corner) {
      Segment line;
      line.arc = false;
      line.a = cursor;
      line.dir = d0;
      line.length = edge_len;
      segments_.push_back(line);
      cursor = target;
      continue;
    }

    Vec2d d1 = wps[i + 1] - target;
    const double next_len = d1.norm();
    d1 /= next_len;
    const double cross = d0.x() * d1.y() - d0.y() * d1.x();
    const double dot = std::clamp(d0.dot(d1), -1.0, 1.0);
    const double turn = std::atan2(std::abs(cross), dot);
    if (turn < 1e-6) {  // collinear, no fillet needed
      Segment line{false, edge_len, cursor, d0};
      segments_.push_back(line);
      cursor = target;
      continue;
    }
    const double tangent = spec.fillet_radius * std::tan(0.5 * turn);
    if (tangent > edge_len - 1e-9 || tangent > next_len - 1e-9) {
      throw OutOfWorld("fillet radius too large for waypoint spacing");
    }

    const Vec2d p0 = target - d0 * tangent;
    const double line_len = (p0 - cursor).norm();
    if (line_len > 1e-9) {
      Segment line{false, line_len, cursor, d0};
      segments_.push_back(line);
    }

    Segment arc;
    arc.arc = true;
    arc.radius = spec.fillet_radius;
    const double side = cross > 0 ? 1.0 : -1.0;
    arc.center = p0 + perp_left(d0) * side * spec.fillet_radius;
    const Vec2d r0 = p0 - arc.center;
    arc.ang0 = std::atan2(r0.y(), r0.x());
    arc.dang = side * turn;
    arc.length = spec.fillet_radius * turn;
    segments_.push_back(arc);

    cursor = target + d1 * tangent;
  }
  for (const auto& s : segments_) total_len_ += s.length;
  total_time_ = hold_ + total_len_ / speed_;
}

PathState PathModel::state_at(double t) const {
  PathState st;
  st.position.z() = z_;

  auto heading_of = [](const Segment& s, double local_s) {
    if (!s.arc) return std::atan2(s.dir.y(), s.dir.x());
    const double ang = s.ang0 + (s.dang >= 0 ? 1.0 : -1.0) * local_s / s.radius;
    // tangent is the radial direction rotated +-90 degrees
    return ang + (s.dang >= 0 ? M_PI_2 : -M_PI_2);
  };
  auto position_of = [](const Segment& s, double local_s) {
    if (!s.arc) return Vec2d(s.a + s.dir * local_s);
    const double ang = s.ang0 + (s.dang >= 0 ? 1.0 : -1.0) * local_s / s.radius;
    return Vec2d(s.center + s.radius * Vec2d(std::cos(ang), std::sin(ang)));
  };

  double s = (t - hold_) * speed_;
  const bool moving = s > 0.0 && s < total_len_;
  s = std::clamp(s, 0.0, total_len_);

  double base = 0.0;
  const Segment* seg = &segments_.back();
  double local = segments_.back().length;
  for (const auto& candidate : segments_) {
    if (s <= base + candidate.length || &candidate == &segments_.back()) {
      seg = &candidate;
      local = std::min(s - base, candidate.length);
      break;
    }
    base += candidate.length;
  }

  const Vec2d xy = position_of(*seg, local);
  st.position.x() = xy.x();
  st.position.y() = xy.y();
  st.yaw = heading_of(*seg, local);
  if (moving) {
    const Vec2d dir(std::cos(st.yaw), std::sin(st.yaw));
    st.velocity = Vec3d(dir.x() * speed_, dir.y() * speed_, 0.0);
    if (seg->arc) {
      const double sign = seg->dang >= 0 ? 1.0 : -1.0;
      st.yaw_rate = sign * speed_ / seg->radius;
      // centripetal acceleration toward the arc center
      const Vec2d radial = (seg->center - xy).normalized();
      const double a = speed_ * speed_ / seg->radius;
      st.acceleration = Vec3d(radial.x() * a, radial.y() * a, 0.0);
    }
  }
  return st;
}

PoseSE3d PathModel::pose_at(double t) const {
  const PathState st = state_at(t);
  PoseSE3d pose;
  pose.translation = st.position;
  pose.rotation = so3_exp<double>(Vec3d(0, 0, st.yaw));
  return pose;
}

double raycast(const WorldModel& world, const Vec3d& origin, const Vec3d& dir,
               double max_range) {
  double best = -1.0;
  for (const auto& box : world.boxes) {
    double t0 = 0.0, t1 = max_range;
    bool hit = true;
    for (int a = 0; a < 3 && hit; ++a) {
      const double inv = 1.0 / dir[a];
      double ta = (box.lo[a] - origin[a]) * inv;
      double tb = (box.hi[a] - origin[a]) * inv;
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      if (t0 > t1) hit = false;
    }
    if (!hit || t0 <= 1e-9) continue;
    if (best < 0 || t0 < best) best = t0;
  }
  return best;
}

Dataset render_dataset(const WorldModel& world, const TrajectorySpec& spec,
                       const SensorModel& sensor, uint64_t seed) {
  const PathModel path(spec);

  for (const auto& wp : spec.waypoints) {
    if (wp.x() < world.bounds.lo.x() || wp.x() > world.bounds.hi.x() ||
        wp.y() < world.bounds.lo.y() || wp.y() > world.bounds.hi.y()) {
      throw OutOfWorld("trajectory waypoint outside world bounds");
    }
  }

  Dataset data;
  const double frame_dt = 1.0 / spec.frame_hz;
  const int n_frames = static_cast<int>(std::floor(path.duration() / frame_dt));
  const int n_az = sensor.azimuth_steps;
  const size_t n_rings = sensor.ring_elevations_deg.size();

  std::vector<std::pair<double, double>> ring_trig(n_rings);
  for (size_t r = 0; r < n_rings; ++r) {
    const double e = sensor.ring_elevations_deg[r] * M_PI / 180.0;
    ring_trig[r] = {std::cos(e), std::sin(e)};
  }

  data.scans.resize(n_frames);
  auto render_frame = [&](int k) {
    RawScan scan;
    scan.t_start = k * frame_dt;
    scan.t_end = scan.t_start + frame_dt;
    scan.points.reserve(n_rings * n_az);
    for (int j = 0; j < n_az; ++j) {
      const double t_rel = static_cast<double>(j) / n_az;
      const PoseSE3d pose = path.pose_at(scan.t_start + t_rel * frame_dt);
      const Mat3d R = pose.rotation.toRotationMatrix();
      const double az = 2.0 * M_PI * j / n_az;
      const double ca = std::cos(az), sa = std::sin(az);
      for (size_t r = 0; r < n_rings; ++r) {
        const auto [ce, se] = ring_trig[r];
        const Vec3d dir_body(ce * ca, ce * sa, se);
        const Vec3d dir_world = R * dir_body;
        const double range =
            raycast(world, pose.translation, dir_world, sensor.max_range);
        if (range < sensor.min_range || range > sensor.max_range) continue;
        const uint64_t counter =
            hash_combine(hash_combine(uint64_t(k), uint64_t(r)), uint64_t(j));
        const double noisy =
            range + spec.range_sigma * counter_gaussian(seed ^ 0x5ca1ab1eULL, counter);
        RawScanPoint sp;
        sp.p = (noisy * dir_body).cast<float>();
        sp.t_rel = static_cast<float>(t_rel);
        scan.points.push_back(sp);
      }
    }
    data.scans[k] = std::move(scan);
  };

  // Frames are independent; render in parallel batches.
  const int hw = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::future<void>> jobs;
  std::atomic<int> next{0};
  for (int w = 0; w < hw; ++w) {
    jobs.push_back(std::async(std::launch::async, [&]() {
      for (int k = next.fetch_add(1); k < n_frames; k = next.fetch_add(1)) {
        render_frame(k);
      }
    }));
  }
  for (auto& j : jobs) j.get();

  // Ground-truth and offline poses, one per sweep start.
  for (int k = 0; k < n_frames; ++k) {
    data.ground_truth.push_back({k * frame_dt, path.pose_at(k * frame_dt)});
  }
  data.offline_poses = data.ground_truth;

  // IMU from the analytic derivatives plus gravity.
  const Vec3d gravity(0, 0, -9.81);
  const double imu_dt = 1.0 / spec.imu_hz;
  const int n_imu = static_cast<int>(std::floor((path.duration() + frame_dt) / imu_dt));
  data.imu.reserve(n_imu);
  for (int i = 0; i < n_imu; ++i) {
    const double t = i * imu_dt;
    const PathState st = path.state_at(std::min(t, path.duration()));
    const Mat3d R = so3_exp<double>(Vec3d(0, 0, st.yaw)).toRotationMatrix();
    ImuSample s;
    s.stamp = t;
    const uint64_t c = hash_combine(0xABCDEFull, uint64_t(i));
    s.gyro = Vec3d(0, 0, st.yaw_rate);
    s.accel = R.transpose() * (st.acceleration - gravity);
    for (int a = 0; a < 3; ++a) {
      s.gyro[a] += spec.gyro_sigma * counter_gaussian(seed ^ 0x99, c * 6 + a);
      s.accel[a] += spec.accel_sigma * counter_gaussian(seed ^ 0x99, c * 6 + 3 + a);
    }
    data.imu.push_back(s);
  }
  return data;
}

PointCloud sample_surfaces(const WorldModel& world, uint64_t seed) {
  PointCloud cloud;
  uint64_t counter = 0;
  for (const auto& box : world.boxes) {
    const Vec3d ext = box.hi - box.lo;
    // Six faces; axis a fixed at lo/hi, the other two spanned.
    for (int a = 0; a < 3; ++a) {
      const int u = (a + 1) % 3, v = (a + 2) % 3;
      const double area = ext[u] * ext[v];
      const int count = std::max(1, static_cast<int>(area * world.surface_density));
      for (int side = 0; side < 2; ++side) {
        for (int k = 0; k < count; ++k) {
          Vec3d p;
          p[a] = side == 0 ? box.lo[a] : box.hi[a];
          p[u] = box.lo[u] + ext[u] * counter_uniform(seed, counter++);
          p[v] = box.lo[v] + ext[v] * counter_uniform(seed, counter++);
          cloud.push_back(p.cast<float>());
        }
      }
    }
  }
  return cloud;
}

namespace {

void add_wall_ring(WorldModel& world, double x0, double y0, double x1, double y1,
                   double thickness, double height, bool inward) {
  const double t = thickness;
  if (inward) {
    world.boxes.push_back({{x0, y0, 0}, {x1, y0 + t, height}});
    world.boxes.push_back({{x0, y1 - t, 0}, {x1, y1, height}});
    world.boxes.push_back({{x0, y0, 0}, {x0 + t, y1, height}});
    world.boxes.push_back({{x1 - t, y0, 0}, {x1, y1, height}});
  } else {
    world.boxes.push_back({{x0 - t, y0 - t, 0}, {x1 + t, y0, height}});
    world.boxes.push_back({{x0 - t, y1, 0}, {x1 + t, y1 + t, height}});
    world.boxes.push_back({{x0 - t, y0, 0}, {x0, y1, height}});
    world.boxes.push_back({{x1, y0, 0}, {x1 + t, y1, height}});
  }
}

void add_pillar(WorldModel& world, double x, double y, double side, double height) {
  world.boxes.push_back(
      {{x - side / 2, y - side / 2, 0}, {x + side / 2, y + side / 2, height}});
}

// Rectangular ring corridor: outer walls at half_width outside the
// centerline rectangle [0,w]x[0,h], inner walls at half_width inside,
// pillars and wall bumps at irregular spots so the corridor is not
// translationally ambiguous.
Scenario corridor_scenario(double w, double h, double half_width, double block_size,
                           double speed, double max_range) {
  Scenario sc;
  sc.block_size = block_size;

  WorldModel& world = sc.world;
  const double wall_h = 2.5;
  add_wall_ring(world, -half_width, -half_width, w + half_width, h + half_width, 0.2,
                wall_h, false);
  add_wall_ring(world, half_width, half_width, w - half_width, h - half_width, 0.2,
                wall_h, true);
  // ground sheet
  world.boxes.push_back(
      {{-half_width - 1, -half_width - 1, -0.05}, {w + half_width + 1, h + half_width + 1, 0.0}});

  // Pillar pattern keyed to the perimeter so every stretch looks different.
  const double per = 2 * (w + h);
  for (double s = 3.0; s < per; s += 7.0 + 4.0 * std::sin(s * 0.35)) {
    double x, y;
    const double lateral = (std::fmod(s, 3.0) < 1.5 ? 1.0 : -1.0) * (half_width - 0.55);
    if (s < w) {
      x = s;
      y = lateral;
    } else if (s < w + h) {
      x = w + lateral;
      y = s - w;
    } else if (s < 2 * w + h) {
      x = w - (s - w - h);
      y = h + lateral;
    } else {
      x = lateral;
      y = h - (s - 2 * w - h);
    }
    add_pillar(world, x, y, 0.35, 2.2);
  }

  world.bounds = {{-half_width - 2, -half_width - 2, -1},
                  {w + half_width + 2, h + half_width + 2, 4}};

  TrajectorySpec& traj = sc.trajectory;
  traj.waypoints = {{8, 0}, {w, 0}, {w, h}, {0, h}, {0, 0}, {8, 0}};
  traj.speed = speed;
  traj.fillet_radius = 1.5;
  traj.sensor_height = 1.0;
  traj.range_sigma = 0.02;

  sc.sensor.max_range = max_range;
  return sc;
}

}  // namespace

Scenario make_scenario(const std::string& name) {
  if (name == "corridor-loop") {
    // 200 m loop, S = 30 m.
    return corridor_scenario(60, 40, 1.8, 30.0, 1.0, 60.0);
  }
  if (name == "corridor-loop-large") {
    // 320 m loop, S = 20 m, long sight lines.
    Scenario sc = corridor_scenario(100, 60, 1.8, 20.0, 1.5, 80.0);
    return sc;
  }
  if (name == "circle") {
    // Square with fillet = half side: the path degenerates to a circle, so
    // every analytic derivative is smooth.
    Scenario sc;
    sc.block_size = 30.0;
    const double r = 12.0;
    WorldModel& world = sc.world;
    add_wall_ring(world, -8, -8, 2 * r + 8, 2 * r + 8, 0.2, 2.5, false);
    world.boxes.push_back({{-9, -9, -0.05}, {2 * r + 9, 2 * r + 9, 0.0}});
    add_pillar(world, r, r, 0.6, 2.2);
    add_pillar(world, r - 5, r + 3, 0.4, 2.2);
    add_pillar(world, r + 6, r - 2, 0.4, 2.2);
    world.bounds = {{-10, -10, -1}, {2 * r + 10, 2 * r + 10, 4}};
    sc.trajectory.waypoints = {{0, 0}, {2 * r, 0}, {2 * r, 2 * r}, {0, 2 * r}};
    sc.trajectory.closed_loop = true;
    sc.trajectory.fillet_radius = r;
    sc.trajectory.speed = 1.5;
    sc.trajectory.range_sigma = 0.0;
    sc.sensor.max_range = 50.0;
    return sc;
  }
  if (name == "straight") {
    Scenario sc;
    sc.block_size = 15.0;
    WorldModel& world = sc.world;
    add_wall_ring(world, -2, -2, 42, 2, 0.2, 2.5, false);
    world.boxes.push_back({{-3, -3, -0.05}, {43, 3, 0.0}});
    add_pillar(world, 8, -1.3, 0.3, 2.2);
    add_pillar(world, 17, 1.3, 0.3, 2.2);
    add_pillar(world, 29, -1.3, 0.3, 2.2);
    add_pillar(world, 36, 1.2, 0.3, 2.2);
    world.bounds = {{-4, -4, -1}, {44, 4, 4}};
    sc.trajectory.waypoints = {{0, 0}, {40, 0}};
    sc.trajectory.speed = 1.0;
    sc.trajectory.range_sigma = 0.02;
    sc.sensor.max_range = 50.0;
    return sc;
  }
  throw ConfigError("unknown scenario: " + name);
}

void write_dataset(const Dataset& data, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (size_t i = 0; i < data.scans.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "scan_%05zu.scn", i);
    write_file((fs::path(dir) / name).string(), encode_scan(data.scans[i]));
  }
  write_imu_csv((fs::path(dir) / "imu.csv").string(), data.imu);
  write_trajectory((fs::path(dir) / "gt.txt").string(), data.ground_truth);
  write_trajectory((fs::path(dir) / "offline_poses.txt").string(), data.offline_poses);
}

std::vector<ImuSample> read_imu_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open imu csv: " + path);
  std::vector<ImuSample> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == 't' || line[0] == '#') continue;
    ImuSample s;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf,%lf", &s.stamp, &s.accel.x(),
                    &s.accel.y(), &s.accel.z(), &s.gyro.x(), &s.gyro.y(),
                    &s.gyro.z()) != 7) {
      throw IoError("bad imu csv line: " + line);
    }
    out.push_back(s);
  }
  return out;
}

void write_imu_csv(const std::string& path, const std::vector<ImuSample>& samples) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write imu csv: " + path);
  out << "t,ax,ay,az,gx,gy,gz\n";
  for (const auto& s : samples) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%.6f,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f\n", s.stamp,
                  s.accel.x(), s.accel.y(), s.accel.z(), s.gyro.x(), s.gyro.y(),
                  s.gyro.z());
    out << buf;
  }
}

}  // namespace sim
}  // namespace blockloc
