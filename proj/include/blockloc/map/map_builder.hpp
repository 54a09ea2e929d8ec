#pragma once

#include <blockloc/geometry/se3.hpp>
#include <blockloc/map/block_map.hpp>

#include <vector>

namespace blockloc {

struct KeyedScan {
  double stamp = 0.0;
  PointCloud points;  // sensor frame
};

struct OfflinePose {
  double stamp = 0.0;
  PoseSE3d pose;  // world <- offline body
};

struct BuilderOptions {
  double size_s = 30.0;        // block size S (meters)
  double max_stamp_gap = 0.1;  // scan/pose association bound (seconds)
  float leaf = 0.25f;          // voxel leaf applied when a candidate finalizes
};

struct BuildStats {
  size_t scans_used = 0;
  size_t scans_skipped = 0;  // no pose within max_stamp_gap
  size_t candidates_finalized = 0;
  size_t merged = 0;
  size_t discarded = 0;
};

// Streaming block-map accumulation: scans are appended in time order, the
// candidate is cut whenever the pose wanders more than S from its anchor,
// and finished candidates are stored, merged or discarded by centroid
// distance against the library.
class BlockMapBuilder {
 public:
  BlockMapBuilder(std::vector<OfflinePose> poses, const PoseSE3d& extrinsics,
                  const BuilderOptions& opts);

  void add_scan(const KeyedScan& scan);
  MapLibrary finish();

  const BuildStats& stats() const { return stats_; }

 private:
  void finalize_current();

  std::vector<OfflinePose> poses_;
  PoseSE3d sensor_from_body_inv_;  // (T^L_off)^-1
  BuilderOptions opts_;
  BuildStats stats_;

  MapLibrary library_;
  PointCloud candidate_;
  Vec3d anchor_ = Vec3d::Zero();
  bool have_anchor_ = false;
};

// Store/merge/discard one finished candidate against the library.
// Precondition: the library already holds at least two blocks; the caller
// stores the first two candidates unconditionally.
void finalize_candidate(BlockMap candidate, MapLibrary& library, double size_s,
                        BuildStats* stats = nullptr);

MapLibrary generate_block_maps(const std::vector<KeyedScan>& scans,
                               const std::vector<OfflinePose>& poses,
                               const PoseSE3d& extrinsics, const BuilderOptions& opts,
                               BuildStats* stats = nullptr);

}  // namespace blockloc
