#pragma once

#include <blockloc/geometry/trajectory.hpp>

#include <array>
#include <map>
#include <string>
#include <vector>

namespace blockloc {

enum class AteMode { kTrans, kFull };

// Trajectories associated by nearest timestamp within max_dt.
struct TrajPair {
  std::vector<StampedPose> est;
  std::vector<StampedPose> gt;  // same length, index-aligned with est

  static TrajPair associate(const Trajectory& est, const Trajectory& gt,
                            double max_dt = 0.05);
};

struct AteResult {
  double rmse = 0.0;
  PoseSE3d alignment;  // transform applied to the estimate
  // Per-pose residuals for CSV output: stamp, translation error (3),
  // roll/pitch/yaw error (3).
  std::vector<std::array<double, 7>> residuals;
};

// ATE RMSE after rigid Umeyama alignment (no scale) of the translation
// tracks; mode kFull appends roll/pitch/yaw residuals in radians to the
// meter translation residuals before the RMSE.
AteResult ate_rmse(const TrajPair& pair, AteMode mode, bool align = true);

void write_residual_csv(const std::string& path, const AteResult& result);

struct TimingStats {
  double mean_ms = 0.0;
  double p95_ms = 0.0;  // nearest-rank 95th percentile
  size_t rows = 0;
  int switch_count = 0;
  std::map<int, double> per_bm_mean_ms;
};

TimingStats timing_stats(const std::string& csv_path);

}  // namespace blockloc
