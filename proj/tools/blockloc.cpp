// blockloc: block-map LiDAR-inertial localization toolkit.
//
// Subcommands: simulate, build-maps, serve, init, localize, eval.

#include <CLI11.hpp>

#include <blockloc/core/config.hpp>
#include <blockloc/core/error.hpp>
#include <blockloc/eval/eval.hpp>
#include <blockloc/init/initialize.hpp>
#include <blockloc/map/formats.hpp>
#include <blockloc/map/map_builder.hpp>
#include <blockloc/scan/deskew.hpp>
#include <blockloc/server/map_server.hpp>
#include <blockloc/sim/sim.hpp>
#include <blockloc/tracker/tracker.hpp>

#include <algorithm>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>

namespace {

using namespace blockloc;
namespace fs = std::filesystem;

MapServer* g_server = nullptr;

void handle_signal(int) {
  if (g_server != nullptr) g_server->stop();
}

std::vector<std::string> sorted_scan_files(const std::string& dir) {
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".scn") files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw NoInput("no .scn files in " + dir);
  return files;
}

TrackerOptions tracker_options(const Config& cfg) {
  TrackerOptions opts;
  opts.max_keyframes = cfg.get_int("tracker.max_keyframes");
  opts.reserve_keyframes = cfg.get_int("tracker.reserve_keyframes");
  opts.switch_hysteresis = cfg.get_int("tracker.switch_hysteresis");
  opts.keyframe_trans = cfg.get_double("tracker.keyframe_trans");
  opts.keyframe_rot_deg = cfg.get_double("tracker.keyframe_rot_deg");
  opts.keyframe_time = cfg.get_double("tracker.keyframe_time");
  opts.max_scan_gap = cfg.get_double("tracker.max_scan_gap");
  opts.scan_leaf = static_cast<float>(cfg.get_double("tracker.scan_leaf"));
  opts.ndt.voxel_size = cfg.get_double("ndt.voxel_size");
  opts.ndt.sigma = cfg.get_double("ndt.sigma");
  opts.ndt.outlier_ratio = cfg.get_double("ndt.outlier_ratio");
  opts.imu_noise.gyro_noise = cfg.get_double("imu.gyro_noise");
  opts.imu_noise.accel_noise = cfg.get_double("imu.accel_noise");
  opts.imu_noise.gyro_walk = cfg.get_double("imu.gyro_walk");
  opts.imu_noise.accel_walk = cfg.get_double("imu.accel_walk");
  opts.gravity_magnitude = cfg.get_double("imu.gravity");
  return opts;
}

InitOptions init_options(const Config& cfg) {
  InitOptions opts;
  opts.resolution = cfg.get_double("bbs.resolution");
  opts.pyramid_levels = cfg.get_int("bbs.levels");
  opts.window = cfg.get_double("bbs.window");
  opts.slice_low = cfg.get_double("bbs.slice_low");
  opts.slice_high = cfg.get_double("bbs.slice_high");
  opts.base_score = cfg.get_double("bbs.base_score");
  opts.retry_score = cfg.get_double("bbs.retry_score");
  return opts;
}

Vec3d parse_xyz(const std::string& text) {
  Vec3d v;
  if (std::sscanf(text.c_str(), "%lf,%lf,%lf", &v.x(), &v.y(), &v.z()) != 3) {
    throw ConfigError("expected x,y,z, got: " + text);
  }
  return v;
}

// Gyro-quiet prefix of the IMU stream, for gravity alignment at startup.
Vec3d startup_gravity(const std::vector<ImuSample>& imu, double magnitude) {
  std::vector<ImuSample> still;
  for (const auto& s : imu) {
    if (s.gyro.norm() > 0.02 || still.size() > 400) break;
    still.push_back(s);
  }
  if (still.size() < 20) return Vec3d(0, 0, -magnitude);
  return estimate_gravity(still, magnitude);
}

int cmd_simulate(const std::string& scenario, uint64_t seed, const std::string& out) {
  const sim::Scenario sc = sim::make_scenario(scenario);
  const sim::Dataset data = sim::render_dataset(sc.world, sc.trajectory, sc.sensor, seed);
  sim::write_dataset(data, out);
  std::printf("wrote %zu scans, %zu imu samples to %s\n", data.scans.size(),
              data.imu.size(), out.c_str());
  return 0;
}

int cmd_build_maps(const std::string& scans_dir, const std::string& poses_path,
                   const std::string& out_dir, const Config& cfg) {
  BuilderOptions opts;
  opts.size_s = cfg.get_double("builder.block_size");
  opts.leaf = static_cast<float>(cfg.get_double("builder.leaf"));
  opts.max_stamp_gap = cfg.get_double("builder.max_stamp_gap");

  std::vector<OfflinePose> poses;
  for (const auto& sp : read_trajectory(poses_path)) poses.push_back({sp.stamp, sp.pose});

  BlockMapBuilder builder(poses, PoseSE3d::Identity(), opts);
  for (const auto& file : sorted_scan_files(scans_dir)) {
    const RawScan raw = decode_scan(read_file(file));
    KeyedScan ks;
    ks.stamp = raw.t_start;
    ks.points.reserve(raw.points.size());
    for (const auto& sp : raw.points) ks.points.push_back(sp.p);
    builder.add_scan(ks);
  }
  const MapLibrary lib = builder.finish();
  save_library(lib, out_dir);
  std::printf("built %zu block maps (S=%.1f m) into %s\n", lib.blocks.size(), opts.size_s,
              out_dir.c_str());
  for (const auto& b : lib.blocks) {
    std::printf("  bm %u: %zu points, centroid (%.1f %.1f %.1f)\n", b.id,
                b.points.size(), b.centroid.x(), b.centroid.y(), b.centroid.z());
  }
  return 0;
}

int cmd_serve(const std::string& maps_dir, const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw ConfigError("--addr must be host:port");
  MapServer server(maps_dir);
  g_server = &server;
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  std::printf("serving %s on %s\n", maps_dir.c_str(), addr.c_str());
  server.serve_forever(addr.substr(0, colon),
                       static_cast<uint16_t>(std::atoi(addr.c_str() + colon + 1)));
  return 0;
}

int cmd_init(const std::string& scan_path, const std::string& coarse_text,
             const std::string& server_addr, const Config& cfg) {
  const RawScan raw = decode_scan(read_file(scan_path));
  const DeskewedScan scan = deskew_scan(raw, TwistSe3d::Zero(), {});
  MapClient client(server_addr, cfg.get_int("server.timeout_ms"));
  const InitResult res =
      initialize_pose(parse_xyz(coarse_text), client, scan, init_options(cfg));
  std::printf("%s\n", format_trajectory_line({raw.t_start, res.pose}).c_str());
  std::fprintf(stderr, "bm=%u score=%.3f\n", res.bm_id, res.score);
  return 0;
}

int cmd_localize(const std::string& scans_dir, const std::string& imu_path,
                 const std::string& server_addr, const std::string& init_text,
                 const std::string& out_traj, const std::string& out_timing,
                 const Config& cfg) {
  const auto files = sorted_scan_files(scans_dir);
  const auto imu = sim::read_imu_csv(imu_path);
  MapClient client(server_addr, cfg.get_int("server.timeout_ms"));

  // Global initialization on the first scan.
  const RawScan first = decode_scan(read_file(files[0]));
  const DeskewedScan first_deskewed = deskew_scan(first, TwistSe3d::Zero(), {});
  const InitResult init =
      initialize_pose(parse_xyz(init_text), client, first_deskewed, init_options(cfg));
  std::fprintf(stderr, "initialized in bm %u, score %.3f\n", init.bm_id, init.score);

  TrackerOptions opts = tracker_options(cfg);
  PoseTracker tracker(opts, &client);
  tracker.initialize(init.pose, init.bm_id,
                     startup_gravity(imu, opts.gravity_magnitude));

  size_t imu_cursor = 0;
  for (const auto& file : files) {
    const RawScan scan = decode_scan(read_file(file));
    std::vector<ImuSample> segment;
    while (imu_cursor < imu.size() && imu[imu_cursor].stamp <= scan.t_end) {
      segment.push_back(imu[imu_cursor++]);
    }
    try {
      tracker.process_frame(scan, segment);
    } catch (const TrackingLost& e) {
      std::fprintf(stderr, "%s\n", e.what());
      break;
    }
  }

  write_trajectory(out_traj, tracker.trajectory());
  if (!out_timing.empty()) write_timing_csv(out_timing, tracker.timing());
  std::printf("tracked %zu frames, %d block switches\n", tracker.trajectory().size(),
              tracker.switch_count());
  return 0;
}

int cmd_eval(const std::string& est_path, const std::string& gt_path,
             const std::string& mode_text, bool no_align, const std::string& csv) {
  const Trajectory est = read_trajectory(est_path);
  const Trajectory gt = read_trajectory(gt_path);
  const TrajPair pair = TrajPair::associate(est, gt);
  const AteMode mode = mode_text == "full" ? AteMode::kFull : AteMode::kTrans;
  const AteResult res = ate_rmse(pair, mode, !no_align);
  std::printf("ate_rmse_%s %.6f\n", mode_text.c_str(), res.rmse);
  if (!csv.empty()) write_residual_csv(csv, res);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"block-map LiDAR-inertial localization"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  uint64_t seed = 7;
  app.add_option("--config", config_path, "flat key = value config file");
  app.add_option("--set", overrides, "config override key=value")->take_all();
  app.add_option("--seed", seed, "rng seed");

  auto* sim_cmd = app.add_subcommand("simulate", "render a synthetic dataset");
  std::string scenario = "corridor-loop", sim_out;
  sim_cmd->add_option("--scenario", scenario, "corridor-loop|corridor-loop-large|circle|straight");
  sim_cmd->add_option("--out", sim_out, "output directory")->required();

  auto* build_cmd = app.add_subcommand("build-maps", "build block maps from scans");
  std::string scans_dir, poses_path, maps_out;
  build_cmd->add_option("--scans", scans_dir)->required();
  build_cmd->add_option("--poses", poses_path)->required();
  build_cmd->add_option("--out", maps_out)->required();

  auto* serve_cmd = app.add_subcommand("serve", "serve block maps over TCP");
  std::string maps_dir, addr = "127.0.0.1:7700";
  serve_cmd->add_option("--maps", maps_dir)->required();
  serve_cmd->add_option("--addr", addr, "host:port");

  auto* init_cmd = app.add_subcommand("init", "global pose initialization");
  std::string scan_path, coarse, server_addr = "127.0.0.1:7700";
  init_cmd->add_option("--scan", scan_path)->required();
  init_cmd->add_option("--coarse", coarse, "x,y,z coarse position")->required();
  init_cmd->add_option("--server", server_addr);
  double window = -1, res = -1;
  init_cmd->add_option("--window", window, "full window width (m)");
  init_cmd->add_option("--res", res, "grid resolution (m)");

  auto* loc_cmd = app.add_subcommand("localize", "track a scan stream");
  std::string loc_scans, imu_path, loc_server = "127.0.0.1:7700", init_xyz;
  std::string out_traj = "traj.txt", out_timing;
  loc_cmd->add_option("--scans", loc_scans)->required();
  loc_cmd->add_option("--imu", imu_path)->required();
  loc_cmd->add_option("--server", loc_server);
  loc_cmd->add_option("--init", init_xyz, "x,y,z coarse position")->required();
  loc_cmd->add_option("--out", out_traj);
  loc_cmd->add_option("--timing", out_timing);

  auto* eval_cmd = app.add_subcommand("eval", "trajectory ATE evaluation");
  std::string est_path, gt_path, mode = "trans", eval_csv;
  bool no_align = false;
  eval_cmd->add_option("--est", est_path)->required();
  eval_cmd->add_option("--gt", gt_path)->required();
  eval_cmd->add_option("--mode", mode)->check(CLI::IsMember({"trans", "full"}));
  eval_cmd->add_flag("--no-align", no_align);
  eval_cmd->add_option("--csv", eval_csv);

  CLI11_PARSE(app, argc, argv);

  try {
    Config cfg = config_path.empty() ? Config() : Config::from_file(config_path);
    for (const auto& o : overrides) cfg.set_override(o);

    if (sim_cmd->parsed()) return cmd_simulate(scenario, seed, sim_out);
    if (build_cmd->parsed()) return cmd_build_maps(scans_dir, poses_path, maps_out, cfg);
    if (serve_cmd->parsed()) return cmd_serve(maps_dir, addr);
    if (init_cmd->parsed()) {
      if (window > 0) cfg.set("bbs.window", std::to_string(window));
      if (res > 0) cfg.set("bbs.resolution", std::to_string(res));
      return cmd_init(scan_path, coarse, server_addr, cfg);
    }
    if (loc_cmd->parsed()) {
      return cmd_localize(loc_scans, imu_path, loc_server, init_xyz, out_traj,
                          out_timing, cfg);
    }
    if (eval_cmd->parsed()) {
      return cmd_eval(est_path, gt_path, mode, no_align, eval_csv);
    }
  } catch (const std::exception& e) {
    // Machine-readable single-line error on stderr.
    std::string msg = e.what();
    for (auto& c : msg) {
      if (c == '"') c = '\'';
      if (c == '\n') c = ' ';
    }
    std::fprintf(stderr, "{\"code\": 2, \"message\": \"%s\"}\n", msg.c_str());
    return 2;
  }
  return 0;
}
