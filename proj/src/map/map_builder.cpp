#include <blockloc/map/map_builder.hpp>

#include <algorithm>
#include <cmath>

namespace blockloc {
namespace {

// Nearest pose by timestamp; poses must be sorted.
const OfflinePose* closest_pose(const std::vector<OfflinePose>& poses, double stamp,
                                double max_gap) {
  if (poses.empty()) return nullptr;
  auto it = std::lower_bound(poses.begin(), poses.end(), stamp,
                             [](const OfflinePose& p, double t) { return p.stamp < t; });
  const OfflinePose* best = nullptr;
  double best_gap = max_gap;
  if (it != poses.end() && std::abs(it->stamp - stamp) <= best_gap) {
    best = &*it;
    best_gap = std::abs(it->stamp - stamp);
  }
  if (it != poses.begin()) {
    const auto& prev = *(it - 1);
    if (std::abs(prev.stamp - stamp) <= best_gap) best = &prev;
  }
  return best;
}

}  // namespace

BlockMapBuilder::BlockMapBuilder(std::vector<OfflinePose> poses, const PoseSE3d& extrinsics,
                                 const BuilderOptions& opts)
    : poses_(std::move(poses)), sensor_from_body_inv_(inverse(extrinsics)), opts_(opts) {
  std::sort(poses_.begin(), poses_.end(),
            [](const OfflinePose& a, const OfflinePose& b) { return a.stamp < b.stamp; });
}

void BlockMapBuilder::add_scan(const KeyedScan& scan) {
  const OfflinePose* op = closest_pose(poses_, scan.stamp, opts_.max_stamp_gap);
  if (op == nullptr) {
    ++stats_.scans_skipped;
    return;
  }
  const Vec3d t = op->pose.translation;

  if (have_anchor_ && (t - anchor_).norm() > opts_.size_s) {
    // Candidate is complete: cut it here and re-anchor at the current pose.
    finalize_current();
    anchor_ = t;
  } else if (!have_anchor_) {
    anchor_ = t;
    have_anchor_ = true;
  }

  // Reproject into the body frame, then into the world via the offline pose.
  candidate_.reserve(candidate_.size() + scan.points.size());
  for (const auto& p : scan.points) {
    const Vec3d body = sensor_from_body_inv_ * p.cast<double>();
    candidate_.push_back((op->pose * body).cast<float>());
  }
  ++stats_.scans_used;
}

void BlockMapBuilder::finalize_current() {
  if (candidate_.empty()) return;
  BlockMap bm;
  bm.size_s = static_cast<float>(opts_.size_s);
  bm.points = voxel_downsample(candidate_, opts_.leaf);
  bm.recompute_centroid();
  candidate_.clear();
  ++stats_.candidates_finalized;

  if (library_.blocks.size() < 2) {
    // The first two candidates are stored unconditionally.
    bm.id = static_cast<uint32_t>(library_.blocks.size());
    library_.blocks.push_back(std::move(bm));
    library_.rebuild_index();
    return;
  }
  finalize_candidate(std::move(bm), library_, opts_.size_s, &stats_);
}

MapLibrary BlockMapBuilder::finish() {
  finalize_current();
  if (library_.blocks.empty()) throw NoInput("no scans produced any block map");
  return std::move(library_);
}

void finalize_candidate(BlockMap candidate, MapLibrary& library, double size_s,
                        BuildStats* stats) {
  const auto [nearest_id, d] = library.nearest_block(candidate.centroid);
  if (d >= 0.5 * size_s) {
    candidate.id = library.blocks.back().id + 1;
    library.blocks.push_back(std::move(candidate));
    library.rebuild_index();
  } else if (d > 0.1 * size_s) {
    // Merge into the nearest block and renew its centroid.
    for (auto& b : library.blocks) {
      if (b.id == nearest_id) {
        b.points.insert(b.points.end(), candidate.points.begin(), candidate.points.end());
        b.recompute_centroid();
        break;
      }
    }
    library.rebuild_index();
    if (stats) ++stats->merged;
  } else {
    // Nearly coincident with an existing block: drop it.
    if (stats) ++stats->discarded;
  }
}

MapLibrary generate_block_maps(const std::vector<KeyedScan>& scans,
                               const std::vector<OfflinePose>& poses,
                               const PoseSE3d& extrinsics, const BuilderOptions& opts,
                               BuildStats* stats) {
  if (scans.empty()) throw NoInput("empty scan stream");
  BlockMapBuilder builder(poses, extrinsics, opts);
  for (const auto& scan : scans) builder.add_scan(scan);
  MapLibrary lib = builder.finish();
  if (stats) *stats = builder.stats();
  return lib;
}

}  // namespace blockloc
