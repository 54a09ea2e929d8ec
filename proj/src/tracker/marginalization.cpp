#include <blockloc/core/error.hpp>
#include <blockloc/tracker/marginalization.hpp>

#include <Eigen/Eigenvalues>

namespace blockloc {

MarginalSystem schur_marginalize(const MatXd& H, const VecXd& b,
                                 const std::vector<int>& keep,
                                 const std::vector<int>& drop, double eig_clamp) {
  const int nk = static_cast<int>(keep.size());
  const int nd = static_cast<int>(drop.size());

  MatXd H_kk(nk, nk), H_kd(nk, nd), H_dd(nd, nd);
  VecXd b_k(nk), b_d(nd);
  for (int i = 0; i < nk; ++i) {
    b_k(i) = b(keep[i]);
    for (int j = 0; j < nk; ++j) H_kk(i, j) = H(keep[i], keep[j]);
    for (int j = 0; j < nd; ++j) H_kd(i, j) = H(keep[i], drop[j]);
  }
  for (int i = 0; i < nd; ++i) {
    b_d(i) = b(drop[i]);
    for (int j = 0; j < nd; ++j) H_dd(i, j) = H(drop[i], drop[j]);
  }

  H_dd = 0.5 * (H_dd + H_dd.transpose().eval());
  Eigen::SelfAdjointEigenSolver<MatXd> es(H_dd);
  if (es.info() != Eigen::Success) {
    throw DegenerateMarginalization("eigendecomposition failed");
  }
  if (es.eigenvalues().minCoeff() < -1e-9) {
    throw DegenerateMarginalization("H_dd has a significantly negative eigenvalue");
  }
  VecXd inv = es.eigenvalues();
  for (int i = 0; i < inv.size(); ++i) {
    inv(i) = inv(i) > eig_clamp ? 1.0 / inv(i) : 0.0;
  }
  const MatXd H_dd_inv =
      es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();

  MarginalSystem out;
  out.H = H_kk - H_kd * H_dd_inv * H_kd.transpose();
  out.H = 0.5 * (out.H + out.H.transpose().eval());
  out.b = b_k - H_kd * H_dd_inv * b_d;
  return out;
}

}  // namespace blockloc
