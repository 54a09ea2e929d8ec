#pragma once

#include <blockloc/core/types.hpp>

#include <vector>

namespace blockloc {

struct MarginalSystem {
  MatXd H;
  VecXd b;
};

// Schur complement of a Gauss-Newton system H x = b over the index split
// (keep, drop):
//   H_hat = H_kk - H_kd H_dd^{-1} H_dk,   b_hat = b_k - H_kd H_dd^{-1} b_d.
// H_dd is inverted through its eigendecomposition; eigenvalues below
// eig_clamp are treated as exact zeros (pseudo-inverse). An eigenvalue
// below -1e-9 means the input was not PSD and raises
// DegenerateMarginalization.
MarginalSystem schur_marginalize(const MatXd& H, const VecXd& b,
                                 const std::vector<int>& keep,
                                 const std::vector<int>& drop,
                                 double eig_clamp = 1e-10);

}  // namespace blockloc
