#include <blockloc/core/error.hpp>
#include <blockloc/init/initialize.hpp>

#include <cmath>
#include <unordered_set>

namespace blockloc {

std::vector<Vec2d> flatten_scan(const DeskewedScan& scan, double sensor_z, double slice_lo,
                                double slice_hi, double cell, size_t max_points) {
  // Keep points that would land inside the map slice, deduplicated per cell.
  std::vector<Vec2d> flat;
  std::unordered_set<int64_t> seen;
  flat.reserve(scan.points.size() / 4);
  for (const auto& p : scan.points) {
    const double wz = sensor_z + p.z();
    if (wz < slice_lo || wz > slice_hi) continue;
    const int64_t ix = static_cast<int64_t>(std::floor(p.x() / cell));
    const int64_t iy = static_cast<int64_t>(std::floor(p.y() / cell));
    if (!seen.insert((ix << 24) ^ (iy & 0xFFFFFF)).second) continue;
    flat.emplace_back(p.x(), p.y());
  }
  if (flat.size() > max_points) {
    // Deterministic stride subsample.
    std::vector<Vec2d> sub;
    sub.reserve(max_points);
    const double stride = static_cast<double>(flat.size()) / max_points;
    for (size_t i = 0; i < max_points; ++i) {
      sub.push_back(flat[static_cast<size_t>(i * stride)]);
    }
    flat = std::move(sub);
  }
  return flat;
}

InitResult initialize_in_block(const Vec3d& coarse, const BlockMap& block,
                               const DeskewedScan& scan, const InitOptions& opts) {
  const double ground = ground_level(block);
  const double z_lo = ground + opts.slice_low;
  const double z_hi = ground + opts.slice_high;
  const ScorePyramid pyr =
      build_pyramid(block, opts.resolution, opts.pyramid_levels, z_lo, z_hi);

  const std::vector<Vec2d> flat =
      flatten_scan(scan, coarse.z(), z_lo, z_hi, opts.resolution, opts.max_scan_points);
  if (flat.empty()) throw NoInitialPose("no scan points in the scoring slice");

  SearchWindow window;
  window.center = Vec3d(coarse.x(), coarse.y(), 0.0);
  window.extent_x = 0.5 * opts.window;
  window.extent_y = 0.5 * opts.window;
  window.extent_theta = M_PI;
  window.linear_step = opts.resolution;
  window.angular_step = angular_step_for(opts.resolution, flat);

  InitCandidate cand;
  try {
    cand = bbs_search(flat, pyr, window, opts.base_score);
  } catch (const NoInitialPose&) {
    cand = bbs_search(flat, pyr, window, opts.retry_score);  // single backoff
  }

  // Lift (x, y, theta) to SE(3): z from map points near the solution,
  // roll = pitch = 0.
  double z_sum = 0.0;
  size_t z_count = 0;
  for (const auto& p : block.points) {
    const double dx = p.x() - cand.x;
    const double dy = p.y() - cand.y;
    if (dx * dx + dy * dy <= 4.0) {
      z_sum += p.z();
      ++z_count;
    }
  }
  InitResult out;
  out.bm_id = block.id;
  out.score = cand.score;
  out.pose.translation =
      Vec3d(cand.x, cand.y, z_count > 0 ? z_sum / static_cast<double>(z_count)
                                        : block.centroid.z());
  out.pose.rotation = so3_exp<double>(Vec3d(0, 0, cand.theta));
  return out;
}

InitResult initialize_pose(const Vec3d& coarse, MapSource& source,
                           const DeskewedScan& scan, const InitOptions& opts) {
  const QueryResult q = source.query(coarse);
  const BlockMap block = source.fetch(q.bm_id);
  return initialize_in_block(coarse, block, scan, opts);
}

}  // namespace blockloc
