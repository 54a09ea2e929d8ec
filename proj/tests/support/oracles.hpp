#pragma once

// Test-only reference implementations, kept independent of the library
// code paths they check.

#include <blockloc/core/types.hpp>

#include <cmath>
#include <random>
#include <vector>

namespace blockloc::test {

// Brute-force matrix exponential by scaling and squaring plus Taylor series.
inline Mat4d expm(Mat4d A) {
  int squarings = 0;
  double norm = A.cwiseAbs().maxCoeff();
  while (norm > 0.25) {
    A *= 0.5;
    norm *= 0.5;
    ++squarings;
  }
  Mat4d term = Mat4d::Identity();
  Mat4d sum = Mat4d::Identity();
  for (int k = 1; k <= 30; ++k) {
    term = (term * A) / static_cast<double>(k);
    sum += term;
    if (term.cwiseAbs().maxCoeff() < 1e-18) break;
  }
  for (int i = 0; i < squarings; ++i) sum = sum * sum;
  return sum;
}

// 4x4 twist matrix of (rho, phi).
inline Mat4d twist_hat(const Vec6d& xi) {
  Mat4d m = Mat4d::Zero();
  const Vec3d rho = xi.head<3>();
  const Vec3d phi = xi.tail<3>();
  m(0, 1) = -phi.z();
  m(0, 2) = phi.y();
  m(1, 0) = phi.z();
  m(1, 2) = -phi.x();
  m(2, 0) = -phi.y();
  m(2, 1) = phi.x();
  m.block<3, 1>(0, 3) = rho;
  return m;
}

// Central finite difference of a scalar function of an n-vector.
template <typename F>
VecXd fd_gradient(const F& f, const VecXd& x, double h = 1e-6) {
  VecXd g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    VecXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (f(xp) - f(xm)) / (2 * h);
  }
  return g;
}

template <typename F>
MatXd fd_hessian(const F& f, const VecXd& x, double h = 1e-4) {
  const int n = static_cast<int>(x.size());
  MatXd H(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      VecXd xpp = x, xpm = x, xmp = x, xmm = x;
      xpp(i) += h;
      xpp(j) += h;
      xpm(i) += h;
      xpm(j) -= h;
      xmp(i) -= h;
      xmp(j) += h;
      xmm(i) -= h;
      xmm(j) -= h;
      H(i, j) = (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (4 * h * h);
    }
  }
  return H;
}

}  // namespace blockloc::test
