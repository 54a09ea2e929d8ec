#pragma once

#include <blockloc/geometry/trajectory.hpp>
#include <blockloc/scan/deskew.hpp>
#include <blockloc/server/map_client.hpp>
#include <blockloc/tracker/window.hpp>

#include <future>
#include <optional>

namespace blockloc {

struct TrackerOptions {
  int max_keyframes = 20;     // N_a
  int reserve_keyframes = 5;  // N_r
  int switch_hysteresis = 3;  // consecutive keyframes before a block switch

  double keyframe_trans = 0.5;      // meters (inclusive thresholds)
  double keyframe_rot_deg = 10.0;   // degrees
  double keyframe_time = 1.0;       // seconds
  double max_scan_gap = 2.0;        // seconds without scans -> TrackingLost

  float scan_leaf = 0.4f;           // voxel leaf for the per-keyframe scan

  NdtParams ndt;
  ImuNoise imu_noise;
  double gravity_magnitude = 9.81;

  double init_sigma_trans = 0.1;         // first-keyframe prior
  double init_sigma_rot_deg = 1.0;
  double prefetch_margin_factor = 0.25;  // prefetch when d_foreign < d_own + f*S

  OptimizeOptions optimize;
};

// Raised when the scan stream breaks or the optimizer cannot make progress;
// carries the last good pose so the caller can re-run global initialization.
struct TrackingLost : Error {
  TrackingLost(const std::string& msg, const PoseSE3d& pose)
      : Error("TrackingLost: " + msg), last_pose(pose) {}
  PoseSE3d last_pose;
};

struct TimingRow {
  double stamp = 0.0;
  double update_ms = 0.0;
  int window_size = 0;
  int bm_id = -1;
  bool switched = false;
};

struct KeyframeRecord {
  double stamp = 0.0;
  PoseSE3d pose;
  uint32_t bm_id = 0;
  bool switched = false;
};

void write_timing_csv(const std::string& path, const std::vector<TimingRow>& rows);

// Pose tracking over a dynamic sliding window. Runs either against a map
// source (block switching enabled) or a fixed grid (monolithic mode).
class PoseTracker {
 public:
  // Served block maps; `source` must outlive the tracker.
  PoseTracker(const TrackerOptions& opts, MapSource* source);
  // Monolithic grid, no switching.
  PoseTracker(const TrackerOptions& opts, std::shared_ptr<const NdtGrid> grid);
  ~PoseTracker();

  // First keyframe prior from global initialization. Call before the first
  // process_frame. Gravity direction may come from estimate_gravity().
  void initialize(const PoseSE3d& init_pose, uint32_t bm_id,
                  std::optional<Vec3d> gravity = std::nullopt);

  // Feeds one sweep plus the IMU samples since the previous call.
  // Returns the tracked pose at the sweep start.
  PoseSE3d process_frame(const RawScan& scan, const std::vector<ImuSample>& imu);

  const std::vector<TimingRow>& timing() const { return timing_; }
  const Trajectory& trajectory() const { return trajectory_; }
  const std::vector<KeyframeRecord>& keyframes() const { return keyframe_log_; }
  const SlidingWindow& window() const { return window_; }
  int switch_count() const { return switch_count_; }
  uint32_t current_bm() const { return current_bm_; }

 private:
  struct Prefetched {
    uint32_t bm_id = 0;
    std::shared_ptr<const NdtGrid> grid;
    Vec3d centroid = Vec3d::Zero();
  };

  bool keyframe_due(const PoseSE3d& predicted, double stamp) const;
  void add_keyframe(const PoseSE3d& predicted, const Vec3d& velocity, double stamp,
                    std::shared_ptr<const PointCloud> scan_ds,
                    const std::vector<ImuSample>& preint_samples);
  bool run_switch_policy(const PoseSE3d& pose);
  void start_prefetch(uint32_t bm_id);
  std::shared_ptr<const NdtGrid> wait_for_grid(uint32_t bm_id);

  TrackerOptions opts_;
  MapSource* source_ = nullptr;

  SlidingWindow window_;
  std::shared_ptr<const NdtGrid> grid_;
  Vec3d gravity_ = Vec3d(0, 0, -9.81);
  Vec3d own_centroid_ = Vec3d::Zero();
  double block_size_s_ = 30.0;
  uint32_t current_bm_ = 0;
  bool initialized_ = false;

  uint64_t next_key_ = 0;
  double last_frame_stamp_ = -1.0;
  double last_keyframe_stamp_ = 0.0;
  NavState propagated_;   // dead-reckoned state since the newest keyframe
  std::vector<ImuSample> pending_imu_;  // samples since the newest keyframe
  std::optional<PoseSE3d> prev_frame_pose_;
  std::optional<PoseSE3d> prev_prev_frame_pose_;

  int mismatch_count_ = 0;
  uint32_t mismatch_id_ = 0;
  int switch_count_ = 0;
  std::future<Prefetched> prefetch_;
  std::optional<Prefetched> prefetch_done_;
  uint32_t prefetch_target_ = 0;
  bool prefetch_active_ = false;

  std::vector<TimingRow> timing_;
  Trajectory trajectory_;
  std::vector<KeyframeRecord> keyframe_log_;
  DeskewStats deskew_stats_;
};

}  // namespace blockloc
