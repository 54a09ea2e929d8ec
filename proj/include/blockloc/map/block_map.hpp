#pragma once

#include <blockloc/core/error.hpp>
#include <blockloc/core/types.hpp>

#include <cstdint>
#include <utility>
#include <vector>

namespace blockloc {

// One block map: a bounded point set with its centroid. Points live in the
// world frame of the offline trajectory.
struct BlockMap {
  uint32_t id = 0;
  float size_s = 0.f;  // block size S the builder ran with
  PointCloud points;
  Vec3d centroid = Vec3d::Zero();

  void recompute_centroid();
};

// Small exact 3-D KD-tree over a fixed point set. Ties on distance are
// resolved toward the lower index so queries match a linear scan exactly.
class KdTree3 {
 public:
  KdTree3() = default;
  explicit KdTree3(std::vector<Vec3d> points);

  bool empty() const { return points_.empty(); }
  size_t size() const { return points_.size(); }

  // (index, squared distance) of the nearest point.
  std::pair<int, double> nearest(const Vec3d& q) const;

  // k nearest, ordered by (distance, index).
  std::vector<std::pair<int, double>> knn(const Vec3d& q, int k) const;

 private:
  struct Node {
    int point = -1;
    int axis = 0;
    int left = -1;
    int right = -1;
  };

  int build(std::vector<int>& idx, int lo, int hi, int depth);
  void search(int node, const Vec3d& q, int k,
              std::vector<std::pair<double, int>>& best) const;

  std::vector<Vec3d> points_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

// All block maps plus the centroid index used to pick the active block.
struct MapLibrary {
  std::vector<BlockMap> blocks;
  KdTree3 centroid_index;

  void rebuild_index();

  // Nearest block to a position: (block id, euclidean distance).
  // Ties break toward the lower id.
  std::pair<uint32_t, double> nearest_block(const Vec3d& position) const;

  // Two nearest blocks, for switch/prefetch decisions.
  std::vector<std::pair<uint32_t, double>> nearest_blocks(const Vec3d& position, int k) const;
};

// Deterministic voxel-grid downsampling: one centroid per occupied cell,
// cells emitted in first-seen order.
PointCloud voxel_downsample(const PointCloud& points, float leaf);

}  // namespace blockloc
