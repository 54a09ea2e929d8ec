#include <blockloc/core/error.hpp>
#include <blockloc/init/score_pyramid.hpp>

#include <algorithm>
#include <cmath>

namespace blockloc {

uint8_t ScorePyramid::patch_max(int level, int ix0, int iy0) const {
  const int span = 1 << level;
  const int ix1 = ix0 + span - 1;
  const int iy1 = iy0 + span - 1;
  if (ix1 < 0 || iy1 < 0 || ix0 >= nx_ || iy0 >= ny_) return 0;
  const int w = level_width(level);
  const int h = level_height(level);
  const int cx0 = std::max(ix0, 0) >> level;
  const int cx1 = std::min(ix1, nx_ - 1) >> level;
  const int cy0 = std::max(iy0, 0) >> level;
  const int cy1 = std::min(iy1, ny_ - 1) >> level;
  uint8_t best = 0;
  for (int cy = cy0; cy <= cy1 && cy < h; ++cy) {
    for (int cx = cx0; cx <= cx1 && cx < w; ++cx) {
      best = std::max(best, levels_[level][static_cast<size_t>(cy) * w + cx]);
    }
  }
  return best;
}

void ScorePyramid::cell_of(double x, double y, int* ix, int* iy) const {
  *ix = static_cast<int>(std::floor((x - origin_.x()) / cell_));
  *iy = static_cast<int>(std::floor((y - origin_.y()) / cell_));
}

ScorePyramid build_pyramid(const BlockMap& block, double cell, int levels, double z_min,
                           double z_max) {
  std::vector<Vec2d> flat;
  flat.reserve(block.points.size());
  for (const auto& p : block.points) {
    if (p.z() >= z_min && p.z() <= z_max) flat.emplace_back(p.x(), p.y());
  }
  if (flat.empty()) throw EmptySlice("no block points in z slice");

  Vec2d lo = flat[0], hi = flat[0];
  for (const auto& p : flat) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }

  ScorePyramid pyr;
  pyr.cell_ = cell;
  pyr.origin_ = lo - Vec2d::Constant(0.5 * cell);
  pyr.nx_ = static_cast<int>(std::floor((hi.x() - pyr.origin_.x()) / cell)) + 1;
  pyr.ny_ = static_cast<int>(std::floor((hi.y() - pyr.origin_.y()) / cell)) + 1;

  pyr.levels_.resize(std::max(levels, 1));
  pyr.levels_[0].assign(static_cast<size_t>(pyr.nx_) * pyr.ny_, 0);
  for (const auto& p : flat) {
    int ix, iy;
    pyr.cell_of(p.x(), p.y(), &ix, &iy);
    pyr.levels_[0][static_cast<size_t>(iy) * pyr.nx_ + ix] = 1;
  }

  for (int li = 1; li < static_cast<int>(pyr.levels_.size()); ++li) {
    const int pw = pyr.level_width(li - 1);
    const int ph = pyr.level_height(li - 1);
    const int w = pyr.level_width(li);
    const int h = pyr.level_height(li);
    auto& lvl = pyr.levels_[li];
    lvl.assign(static_cast<size_t>(w) * h, 0);
    const auto& prev = pyr.levels_[li - 1];
    for (int y = 0; y < ph; ++y) {
      for (int x = 0; x < pw; ++x) {
        const uint8_t v = prev[static_cast<size_t>(y) * pw + x];
        auto& cellv = lvl[static_cast<size_t>(y >> 1) * w + (x >> 1)];
        cellv = std::max(cellv, v);
      }
    }
  }
  return pyr;
}

double ground_level(const BlockMap& block) {
  if (block.points.empty()) throw EmptySlice("empty block");
  std::vector<float> zs;
  zs.reserve(block.points.size());
  for (const auto& p : block.points) zs.push_back(p.z());
  const size_t k = static_cast<size_t>(0.05 * (zs.size() - 1));
  std::nth_element(zs.begin(), zs.begin() + k, zs.end());
  return zs[k];
}

}  // namespace blockloc
