#include <blockloc/core/error.hpp>
#include <blockloc/init/bbs.hpp>

#include <algorithm>
#include <array>
#include <cmath>

namespace blockloc {
namespace {

struct CellXY {
  int x, y;
};

// Level-0 base cells of the scan rotated to one discrete angle and shifted
// by the window center. Integer (jx, jy) offsets then move cells exactly.
std::vector<CellXY> base_cells(const ScorePyramid& pyr, const std::vector<Vec2d>& scan,
                               const Vec3d& center, double theta) {
  std::vector<CellXY> cells(scan.size());
  const double c = std::cos(theta), s = std::sin(theta);
  for (size_t i = 0; i < scan.size(); ++i) {
    const double px = c * scan[i].x() - s * scan[i].y() + center.x();
    const double py = s * scan[i].x() + c * scan[i].y() + center.y();
    pyr.cell_of(px, py, &cells[i].x, &cells[i].y);
  }
  return cells;
}

int count_at(const ScorePyramid& pyr, const std::vector<CellXY>& cells, int jx, int jy) {
  int count = 0;
  for (const auto& cell : cells) count += pyr.at0(cell.x + jx, cell.y + jy);
  return count;
}

int upper_bound_at(const ScorePyramid& pyr, const std::vector<CellXY>& cells, int jx,
                   int jy, int height) {
  int count = 0;
  for (const auto& cell : cells) count += pyr.patch_max(height, cell.x + jx, cell.y + jy);
  return count;
}

struct Key {
  int at, ax, ay, jt, jx, jy;

  bool operator<(const Key& o) const {
    if (at != o.at) return at < o.at;
    if (ax != o.ax) return ax < o.ax;
    if (ay != o.ay) return ay < o.ay;
    if (jt != o.jt) return jt < o.jt;
    if (jx != o.jx) return jx < o.jx;
    return jy < o.jy;
  }
};

Key make_key(int jt, int jx, int jy) {
  return Key{std::abs(jt), std::abs(jx), std::abs(jy), jt, jx, jy};
}

struct Best {
  bool found = false;
  int count = 0;
  Key key{};
  int jt = 0, jx = 0, jy = 0;

  // Strictly-better-or-tie-winning update.
  bool offer(int count_in, int jt_in, int jx_in, int jy_in, double min_count) {
    if (!(static_cast<double>(count_in) > min_count)) return false;
    const Key k = make_key(jt_in, jx_in, jy_in);
    if (!found || count_in > count || (count_in == count && k < key)) {
      found = true;
      count = count_in;
      key = k;
      jt = jt_in;
      jx = jx_in;
      jy = jy_in;
      return true;
    }
    return false;
  }
};

InitCandidate to_candidate(const Best& best, const SearchWindow& w, size_t n_points) {
  InitCandidate out;
  out.x = w.center.x() + best.jx * w.linear_step;
  out.y = w.center.y() + best.jy * w.linear_step;
  out.theta = w.center.z() + best.jt * w.angular_step;
  out.score = static_cast<double>(best.count) / static_cast<double>(n_points);
  return out;
}

}  // namespace

double score_at(const ScorePyramid& pyr, const std::vector<Vec2d>& scan, double x,
                double y, double theta, int level) {
  if (scan.empty()) return 0.0;
  const double c = std::cos(theta), s = std::sin(theta);
  int sum = 0;
  for (const auto& p : scan) {
    int ix, iy;
    pyr.cell_of(c * p.x() - s * p.y() + x, s * p.x() + c * p.y() + y, &ix, &iy);
    sum += pyr.at(level, ix, iy);
  }
  return static_cast<double>(sum) / static_cast<double>(scan.size());
}

InitCandidate exhaustive_search(const std::vector<Vec2d>& scan, const ScorePyramid& pyr,
                                const SearchWindow& w, double base_score) {
  if (scan.empty()) throw NoInitialPose("empty scan");
  const int wx = w.half_x(), wy = w.half_y(), wt = w.half_theta();
  const double min_count = base_score * static_cast<double>(scan.size());
  Best best;
  for (int jt = -wt; jt <= wt; ++jt) {
    const auto cells = base_cells(pyr, scan, w.center, w.center.z() + jt * w.angular_step);
    for (int jx = -wx; jx <= wx; ++jx) {
      for (int jy = -wy; jy <= wy; ++jy) {
        best.offer(count_at(pyr, cells, jx, jy), jt, jx, jy, min_count);
      }
    }
  }
  if (!best.found) throw NoInitialPose("no pose above base score");
  return to_candidate(best, w, scan.size());
}

InitCandidate bbs_search(const std::vector<Vec2d>& scan, const ScorePyramid& pyr,
                         const SearchWindow& w, double base_score, BbsStats* stats) {
  if (scan.empty()) throw NoInitialPose("empty scan");
  const int wx = w.half_x(), wy = w.half_y(), wt = w.half_theta();
  const double min_count = base_score * static_cast<double>(scan.size());
  const int top = std::max(0, pyr.num_levels() - 1);

  struct Node {
    int jx, jy, jt, height, ub;
  };

  if (stats) {
    *stats = BbsStats{};
    stats->exhaustive = w.total_poses();
  }

  // Rotations are enumerated outright; branching happens in (x, y) only.
  std::vector<std::vector<CellXY>> rotated(static_cast<size_t>(2 * wt + 1));
  for (int jt = -wt; jt <= wt; ++jt) {
    rotated[jt + wt] = base_cells(pyr, scan, w.center, w.center.z() + jt * w.angular_step);
  }

  std::vector<Node> stack;
  {
    std::vector<Node> roots;
    const int span = 1 << top;
    for (int jt = -wt; jt <= wt; ++jt) {
      const auto& cells = rotated[jt + wt];
      for (int jx = -wx; jx <= wx; jx += span) {
        for (int jy = -wy; jy <= wy; jy += span) {
          roots.push_back({jx, jy, jt, top, upper_bound_at(pyr, cells, jx, jy, top)});
        }
      }
    }
    std::sort(roots.begin(), roots.end(),
              [](const Node& a, const Node& b) { return a.ub < b.ub; });
    stack = std::move(roots);  // highest upper bound on top
  }

  Best best;
  while (!stack.empty()) {
    const Node node = stack.back();
    stack.pop_back();
    if (stats) ++stats->expanded;

    // Prune: the bound is admissible, so a strictly lower bound cannot beat
    // the incumbent; equal bounds must still be explored for the tie-break.
    if (best.found) {
      if (node.ub < best.count) continue;
    } else {
      if (!(static_cast<double>(node.ub) > min_count)) continue;
    }

    if (node.height == 0) {
      if (stats) ++stats->leaves;
      best.offer(node.ub, node.jt, node.jx, node.jy, min_count);
      continue;
    }

    const int h = node.height - 1;
    const int half = 1 << h;
    const auto& cells = rotated[node.jt + wt];
    std::array<Node, 4> children;
    int n_children = 0;
    for (const int dx : {0, half}) {
      for (const int dy : {0, half}) {
        const int jx = node.jx + dx;
        const int jy = node.jy + dy;
        if (jx > wx || jy > wy) continue;
        children[n_children++] = {jx, jy, node.jt, h, upper_bound_at(pyr, cells, jx, jy, h)};
      }
    }
    std::sort(children.begin(), children.begin() + n_children,
              [](const Node& a, const Node& b) { return a.ub < b.ub; });
    for (int i = 0; i < n_children; ++i) stack.push_back(children[i]);
  }

  if (!best.found) throw NoInitialPose("no pose above base score");
  return to_candidate(best, w, scan.size());
}

double angular_step_for(double cell, const std::vector<Vec2d>& scan) {
  double max_range2 = 1.0;
  for (const auto& p : scan) max_range2 = std::max(max_range2, p.squaredNorm());
  const double d = std::sqrt(max_range2);
  return std::acos(1.0 - cell * cell / (2.0 * d * d));
}

}  // namespace blockloc
