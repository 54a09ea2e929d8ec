#pragma once

#include <blockloc/core/types.hpp>
#include <blockloc/init/score_pyramid.hpp>

#include <cstdint>
#include <vector>

namespace blockloc {

// Discrete (x, y, theta) search window centered on a coarse pose guess.
// Extents are half-widths; the discrete half-counts are ceil(extent/step).
struct SearchWindow {
  Vec3d center = Vec3d::Zero();  // (x, y, theta)
  double extent_x = 20.0;        // meters
  double extent_y = 20.0;        // meters
  double extent_theta = M_PI;    // radians
  double linear_step = 0.25;     // meters, must equal the pyramid cell size
  double angular_step = 0.01;    // radians

  int half_x() const { return static_cast<int>(std::ceil(extent_x / linear_step)); }
  int half_y() const { return static_cast<int>(std::ceil(extent_y / linear_step)); }
  int half_theta() const { return static_cast<int>(std::ceil(extent_theta / angular_step)); }
  uint64_t total_poses() const {
    return uint64_t(2 * half_x() + 1) * uint64_t(2 * half_y() + 1) *
           uint64_t(2 * half_theta() + 1);
  }
};

struct InitCandidate {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double score = 0.0;
};

struct BbsStats {
  uint64_t expanded = 0;  // nodes popped and evaluated
  uint64_t leaves = 0;
  uint64_t exhaustive = 0;  // full discrete window size, for comparison
};

// Mean occupancy of the scan transformed by (x, y, theta), looked up at the
// given pyramid level. Points outside the grid contribute zero.
double score_at(const ScorePyramid& pyr, const std::vector<Vec2d>& scan, double x,
                double y, double theta, int level = 0);

// Depth-first branch and bound over the window. Returns the maximizing
// discrete pose with level-0 score strictly above base_score; ties resolve
// to the smallest (|dtheta|, |dx|, |dy|) offset from the window center.
// Throws NoInitialPose when nothing beats base_score.
InitCandidate bbs_search(const std::vector<Vec2d>& scan, const ScorePyramid& pyr,
                         const SearchWindow& window, double base_score,
                         BbsStats* stats = nullptr);

// Exhaustive reference search with the same tie-break; used as the oracle
// in tests and for pruning-ratio accounting.
InitCandidate exhaustive_search(const std::vector<Vec2d>& scan, const ScorePyramid& pyr,
                                const SearchWindow& window, double base_score);

// Cartographer-style angular step: the angle subtended by one cell at the
// scan's maximum range.
double angular_step_for(double cell, const std::vector<Vec2d>& scan);

}  // namespace blockloc
