#include <blockloc/map/block_map.hpp>

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace blockloc {

void BlockMap::recompute_centroid() {
  Vec3d sum = Vec3d::Zero();
  for (const auto& p : points) sum += p.cast<double>();
  centroid = points.empty() ? Vec3d::Zero() : Vec3d(sum / static_cast<double>(points.size()));
}

KdTree3::KdTree3(std::vector<Vec3d> points) : points_(std::move(points)) {
  if (points_.empty()) return;
  std::vector<int> idx(points_.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  nodes_.reserve(points_.size());
  root_ = build(idx, 0, static_cast<int>(idx.size()), 0);
}

int KdTree3::build(std::vector<int>& idx, int lo, int hi, int depth) {
  if (lo >= hi) return -1;
  const int axis = depth % 3;
  const int mid = (lo + hi) / 2;
  std::nth_element(idx.begin() + lo, idx.begin() + mid, idx.begin() + hi,
                   [&](int a, int b) {
                     if (points_[a][axis] != points_[b][axis])
                       return points_[a][axis] < points_[b][axis];
                     return a < b;
                   });
  Node node;
  node.point = idx[mid];
  node.axis = axis;
  const int self = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  nodes_[self].left = build(idx, lo, mid, depth + 1);
  nodes_[self].right = build(idx, mid + 1, hi, depth + 1);
  return self;
}

void KdTree3::search(int node, const Vec3d& q, int k,
                     std::vector<std::pair<double, int>>& best) const {
  if (node < 0) return;
  const Node& n = nodes_[node];
  const Vec3d& p = points_[n.point];
  const double d2 = (p - q).squaredNorm();

  auto worse = [&](const std::pair<double, int>& a, const std::pair<double, int>& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second < b.second;
  };
  const std::pair<double, int> cand{d2, n.point};
  if (static_cast<int>(best.size()) < k) {
    best.push_back(cand);
    std::sort(best.begin(), best.end(), worse);
  } else if (worse(cand, best.back())) {
    best.back() = cand;
    std::sort(best.begin(), best.end(), worse);
  }

  const double delta = q[n.axis] - p[n.axis];
  const int near = delta < 0 ? n.left : n.right;
  const int far = delta < 0 ? n.right : n.left;
  search(near, q, k, best);
  // Visit the far side on exact ties too, so equal-distance lower ids win.
  if (static_cast<int>(best.size()) < k || delta * delta <= best.back().first) {
    search(far, q, k, best);
  }
}

std::pair<int, double> KdTree3::nearest(const Vec3d& q) const {
  auto r = knn(q, 1);
  if (r.empty()) throw NoBlocks("nearest query on empty KdTree3");
  return {r[0].first, r[0].second};
}

std::vector<std::pair<int, double>> KdTree3::knn(const Vec3d& q, int k) const {
  std::vector<std::pair<double, int>> best;
  search(root_, q, k, best);
  std::vector<std::pair<int, double>> out;
  out.reserve(best.size());
  for (const auto& [d2, i] : best) out.emplace_back(i, d2);
  return out;
}

void MapLibrary::rebuild_index() {
  std::vector<Vec3d> centroids;
  centroids.reserve(blocks.size());
  for (const auto& b : blocks) centroids.push_back(b.centroid);
  centroid_index = KdTree3(std::move(centroids));
}

std::pair<uint32_t, double> MapLibrary::nearest_block(const Vec3d& position) const {
  if (blocks.empty()) throw NoBlocks();
  const auto [idx, d2] = centroid_index.nearest(position);
  return {blocks[idx].id, std::sqrt(d2)};
}

std::vector<std::pair<uint32_t, double>> MapLibrary::nearest_blocks(const Vec3d& position,
                                                                    int k) const {
  if (blocks.empty()) throw NoBlocks();
  std::vector<std::pair<uint32_t, double>> out;
  for (const auto& [idx, d2] : centroid_index.knn(position, k)) {
    out.emplace_back(blocks[idx].id, std::sqrt(d2));
  }
  return out;
}

PointCloud voxel_downsample(const PointCloud& points, float leaf) {
  struct Cell {
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    int count = 0;
    int order = 0;
  };
  std::unordered_map<int64_t, Cell> cells;
  cells.reserve(points.size());
  int next_order = 0;
  const double inv = 1.0 / leaf;
  for (const auto& p : points) {
    const int64_t ix = static_cast<int64_t>(std::floor(p.x() * inv));
    const int64_t iy = static_cast<int64_t>(std::floor(p.y() * inv));
    const int64_t iz = static_cast<int64_t>(std::floor(p.z() * inv));
    const int64_t key = ((ix & 0x1FFFFF) << 42) | ((iy & 0x1FFFFF) << 21) | (iz & 0x1FFFFF);
    auto& c = cells[key];
    if (c.count == 0) c.order = next_order++;
    c.sum += p.cast<double>();
    c.count += 1;
  }
  std::vector<const Cell*> ordered(cells.size());
  for (const auto& [key, c] : cells) ordered[c.order] = &c;
  PointCloud out;
  out.reserve(ordered.size());
  for (const Cell* c : ordered) {
    out.push_back((c->sum / c->count).cast<float>());
  }
  return out;
}

}  // namespace blockloc
