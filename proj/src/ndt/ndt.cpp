#include <blockloc/ndt/ndt.hpp>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>

namespace blockloc {

MagnussonConstants magnusson_constants(double outlier_ratio, double voxel_size) {
  // Gaussian-plus-uniform mixture fitted so the exponential model matches
  // the true log-likelihood at m = 0 and m = 1.
  const double c1 = 10.0 * (1.0 - outlier_ratio);
  const double c2 = outlier_ratio / std::pow(voxel_size, 3);
  const double d3 = -std::log(c2);
  const double d1 = -std::log(c1 + c2) - d3;
  const double d2 =
      -2.0 * std::log((-std::log(c1 * std::exp(-0.5) + c2) - d3) / d1);
  return {-d1, d2};  // flip sign so the score is positive and maximized
}

int64_t NdtGrid::key_of(const Vec3d& p) const {
  const double inv = 1.0 / voxel_size_;
  const int64_t ix = static_cast<int64_t>(std::floor(p.x() * inv));
  const int64_t iy = static_cast<int64_t>(std::floor(p.y() * inv));
  const int64_t iz = static_cast<int64_t>(std::floor(p.z() * inv));
  return ((ix & 0x1FFFFF) << 42) | ((iy & 0x1FFFFF) << 21) | (iz & 0x1FFFFF);
}

NdtGrid build_ndt_grid(const PointCloud& points, double voxel_size) {
  struct Acc {
    Vec3d sum = Vec3d::Zero();
    Mat3d sq = Mat3d::Zero();
    int count = 0;
  };
  NdtGrid grid;
  grid.voxel_size_ = voxel_size;

  std::unordered_map<int64_t, Acc> acc;
  acc.reserve(points.size() / 4 + 1);
  for (const auto& pf : points) {
    const Vec3d p = pf.cast<double>();
    Acc& a = acc[grid.key_of(p)];
    a.sum += p;
    a.sq += p * p.transpose();
    a.count += 1;
  }

  grid.voxels_.reserve(acc.size());
  for (const auto& [key, a] : acc) {
    NdtVoxel v;
    v.count = a.count;
    v.mean = a.sum / a.count;
    if (a.count >= 6) {
      Mat3d cov = a.sq / a.count - v.mean * v.mean.transpose();
      cov = 0.5 * (cov + cov.transpose().eval());
      // Floor small eigenvalues at 1% of the largest so thin surfaces stay
      // invertible.
      Eigen::SelfAdjointEigenSolver<Mat3d> es(cov);
      Vec3d evals = es.eigenvalues().cwiseMax(0.0);
      const double floor_val = std::max(evals.maxCoeff() * 0.01, 1e-9);
      evals = evals.cwiseMax(floor_val);
      const Mat3d& U = es.eigenvectors();
      v.cov = U * evals.asDiagonal() * U.transpose();
      v.info = U * evals.cwiseInverse().asDiagonal() * U.transpose();
      v.active = true;
      ++grid.active_count_;
    }
    grid.voxels_.emplace(key, std::move(v));
  }
  return grid;
}

NdtEval ndt_evaluate(const PoseSE3d& pose, const PointCloud& scan, const NdtGrid& grid,
                     const NdtParams& params) {
  const auto [d1, d2] = magnusson_constants(params.outlier_ratio, grid.voxel_size());
  const Mat3d R = pose.rotation.toRotationMatrix();

  NdtEval out;
  for (const auto& pf : scan) {
    const Vec3d p = pf.cast<double>();
    const Vec3d q = R * p + pose.translation;
    const NdtVoxel* voxel = grid.lookup(q);
    if (voxel == nullptr || !voxel->active) continue;

    const Vec3d e = q - voxel->mean;
    const Vec3d le = voxel->info * e;
    const double m = e.dot(le);
    const double s = d1 * std::exp(-0.5 * d2 * m);

    // q(delta) = pose * Exp(delta) * p  =>  dq/d(rho,phi) = [R, -R hat(p)].
    Eigen::Matrix<double, 3, 6> J;
    J.leftCols<3>() = R;
    J.rightCols<3>() = -R * skew(p);

    const Vec6d a = J.transpose() * le;  // (1/2) dm/ddelta
    out.score += s;
    out.gradient += (-d2 * s) * a;

    // Exact second derivative: includes the curvature of the point
    // transform. w = R^T * info * e feeds the second-order terms.
    const Vec3d w = R.transpose() * le;
    const Mat3d W = skew(w);
    const Mat3d P = skew(p);
    Mat6d C = Mat6d::Zero();
    C.block<3, 3>(0, 3) = 0.5 * W;
    C.block<3, 3>(3, 0) = -0.5 * W;
    C.block<3, 3>(3, 3) = 0.5 * (W * P + P * W);

    const Mat6d G = J.transpose() * voxel->info * J;
    out.hessian += s * (d2 * d2 * (a * a.transpose()) - d2 * G - d2 * C);
    ++out.matched;
  }
  out.hessian = 0.5 * (out.hessian + out.hessian.transpose().eval());
  return out;
}

NdtAlignResult ndt_align(const PoseSE3d& initial, const PointCloud& scan,
                         const NdtGrid& grid, const NdtParams& params,
                         int max_iterations) {
  NdtAlignResult result;
  result.pose = initial;
  result.eval = ndt_evaluate(result.pose, scan, grid, params);

  double lambda = 1e-3;
  for (int it = 0; it < max_iterations; ++it) {
    ++result.iterations;
    // Ascend the score: solve (-H + lambda I) step = gradient.
    Mat6d A = -result.eval.hessian;
    A.diagonal().array() += lambda;
    Eigen::LDLT<Mat6d> ldlt(A);
    if (ldlt.info() != Eigen::Success) {
      lambda *= 10;
      continue;
    }
    const Vec6d step = ldlt.solve(result.eval.gradient);
    if (!step.allFinite()) {
      lambda *= 10;
      continue;
    }
    PoseSE3d cand = compose(result.pose, se3_exp<double>(step));
    NdtEval cand_eval = ndt_evaluate(cand, scan, grid, params);
    if (cand_eval.score > result.eval.score) {
      result.pose = cand;
      result.eval = std::move(cand_eval);
      lambda = std::max(lambda * 0.5, 1e-6);
      if (step.norm() < 1e-8) {
        result.converged = true;
        break;
      }
    } else {
      lambda *= 10;
      if (lambda > 1e8) break;
    }
    if (result.eval.gradient.norm() < 1e-9) {
      result.converged = true;
      break;
    }
  }
  if (result.eval.gradient.norm() < 1e-3 * std::max(1, result.eval.matched)) {
    result.converged = true;
  }
  return result;
}

}  // namespace blockloc
