#pragma once

#include <blockloc/core/types.hpp>
#include <blockloc/map/block_map.hpp>

#include <vector>

namespace blockloc {

// Stack of max-pooled 2-D occupancy grids. Level 0 has cell size `cell`;
// each coarser level halves the resolution, so a level-i cell covers a
// 2^i x 2^i patch of level 0 and stores the max over it.
class ScorePyramid {
 public:
  ScorePyramid() = default;

  double cell_size() const { return cell_; }
  int num_levels() const { return static_cast<int>(levels_.size()); }
  int width() const { return nx_; }
  int height() const { return ny_; }
  const Vec2d& origin() const { return origin_; }

  // Occupancy at a level-0 cell index; 0 outside the grid.
  uint8_t at0(int ix, int iy) const {
    if (ix < 0 || iy < 0 || ix >= nx_ || iy >= ny_) return 0;
    return levels_[0][static_cast<size_t>(iy) * nx_ + ix];
  }

  // Value of the level cell containing level-0 index (ix, iy).
  uint8_t at(int level, int ix, int iy) const {
    if (ix < 0 || iy < 0 || ix >= nx_ || iy >= ny_) return 0;
    const int w = level_width(level);
    return levels_[level][static_cast<size_t>(iy >> level) * w + (ix >> level)];
  }

  // Upper bound over all level-0 cells in [ix0, ix0+2^level) x [iy0, ...):
  // the max of the (at most four) level cells the patch overlaps.
  uint8_t patch_max(int level, int ix0, int iy0) const;

  int level_width(int level) const { return (nx_ + (1 << level) - 1) >> level; }
  int level_height(int level) const { return (ny_ + (1 << level) - 1) >> level; }

  // Level-0 cell index of a world (x, y); may be outside the grid.
  void cell_of(double x, double y, int* ix, int* iy) const;

  friend ScorePyramid build_pyramid(const BlockMap& block, double cell, int levels,
                                    double z_min, double z_max);

 private:
  double cell_ = 0.25;
  Vec2d origin_ = Vec2d::Zero();  // world position of the corner of cell (0,0)
  int nx_ = 0, ny_ = 0;
  std::vector<std::vector<uint8_t>> levels_;
};

// Projects block points with z inside [z_min, z_max] onto (x, y) and
// rasterizes them at `cell`, then max-pools `levels` times.
// Throws EmptySlice when no point falls inside the slice.
ScorePyramid build_pyramid(const BlockMap& block, double cell, int levels, double z_min,
                           double z_max);

// 5th-percentile z of the block, used as the local ground height.
double ground_level(const BlockMap& block);

}  // namespace blockloc
