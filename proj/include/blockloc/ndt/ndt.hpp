#pragma once

#include <blockloc/core/types.hpp>
#include <blockloc/geometry/se3.hpp>

#include <cstdint>
#include <unordered_map>
#include <vector>

namespace blockloc {

struct NdtParams {
  double voxel_size = 1.0;
  double sigma = 0.1;          // isotropic residual prior -> information_scale = 1/sigma^2
  double outlier_ratio = 0.55; // feeds the Magnusson mixture constants

  double information_scale() const { return 1.0 / (sigma * sigma); }
};

// Mixture constants d1, d2 of the per-point score d1 * exp(-d2/2 * m).
struct MagnussonConstants {
  double d1 = 0.0;
  double d2 = 0.0;
};
MagnussonConstants magnusson_constants(double outlier_ratio, double voxel_size);

struct NdtVoxel {
  Vec3d mean = Vec3d::Zero();
  Mat3d info = Mat3d::Zero();  // regularized inverse covariance
  Mat3d cov = Mat3d::Zero();
  int count = 0;
  bool active = false;  // participates in scoring only with count >= 6
};

// Sparse voxel grid of per-voxel Gaussians.
class NdtGrid {
 public:
  NdtGrid() = default;

  double voxel_size() const { return voxel_size_; }
  size_t size() const { return voxels_.size(); }
  size_t active_count() const { return active_count_; }

  const NdtVoxel* lookup(const Vec3d& p) const {
    const auto it = voxels_.find(key_of(p));
    return it == voxels_.end() ? nullptr : &it->second;
  }

  const std::unordered_map<int64_t, NdtVoxel>& voxels() const { return voxels_; }

  int64_t key_of(const Vec3d& p) const;

  friend NdtGrid build_ndt_grid(const PointCloud& points, double voxel_size);

 private:
  double voxel_size_ = 1.0;
  std::unordered_map<int64_t, NdtVoxel> voxels_;
  size_t active_count_ = 0;
};

// Per-voxel sample mean/covariance with an eigenvalue floor of 0.01 times
// the largest eigenvalue. Voxels with fewer than 6 points are kept but
// flagged inactive.
NdtGrid build_ndt_grid(const PointCloud& points, double voxel_size);

struct NdtEval {
  double score = 0.0;        // sum over points of d1 exp(-d2/2 m)
  Vec6d gradient = Vec6d::Zero();   // d score / d (rho, phi), right perturbation
  Mat6d hessian = Mat6d::Zero();
  int matched = 0;           // points that hit an active voxel
};

// DIRECT1 evaluation: each transformed point contributes through the single
// voxel containing it. Gradient and Hessian are exact derivatives of the
// score with respect to the right-multiplied tangent at the given pose.
NdtEval ndt_evaluate(const PoseSE3d& pose, const PointCloud& scan, const NdtGrid& grid,
                     const NdtParams& params = {});

struct NdtAlignResult {
  PoseSE3d pose;
  NdtEval eval;      // at the final pose
  int iterations = 0;
  bool converged = false;
};

// Damped Newton ascent of the NDT score, used for scan-to-scan odometry.
NdtAlignResult ndt_align(const PoseSE3d& initial, const PointCloud& scan,
                         const NdtGrid& grid, const NdtParams& params = {},
                         int max_iterations = 30);

}  // namespace blockloc
