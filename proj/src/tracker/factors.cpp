#include <blockloc/tracker/window.hpp>

#include <Eigen/Eigenvalues>

namespace blockloc {
namespace {

// Scatter a dense block residual contribution into the global system.
// blocks[i] is the 15-column Jacobian of the residual w.r.t. variable i.
void scatter(const std::vector<int>& offsets, const std::vector<int>& vars,
             const std::vector<Eigen::Ref<const MatXd>>& jacobians, const VecXd& weighted_r,
             const MatXd& weighted_J, MatXd* H, VecXd* g) {
  // weighted_J = Omega * J_full stacked per var in `jacobians` order.
  for (size_t a = 0; a < vars.size(); ++a) {
    const int ra = offsets[vars[a]];
    if (ra < 0) continue;
    g->segment<kStateDim>(ra).noalias() += jacobians[a].transpose() * weighted_r;
    for (size_t b = 0; b < vars.size(); ++b) {
      const int rb = offsets[vars[b]];
      if (rb < 0) continue;
      H->block<kStateDim, kStateDim>(ra, rb).noalias() +=
          jacobians[a].transpose() * weighted_J.middleCols(b * kStateDim, kStateDim);
    }
  }
}

}  // namespace

KeyframeState retract(const KeyframeState& x, const Eigen::Matrix<double, 15, 1>& delta) {
  KeyframeState out = x;
  out.nav.pose = compose(x.nav.pose, se3_exp<double>(delta.head<6>()));
  out.nav.velocity += delta.segment<3>(6);
  out.nav.bias.gyro += delta.segment<3>(9);
  out.nav.bias.accel += delta.segment<3>(12);
  return out;
}

Eigen::Matrix<double, 15, 1> local_delta(const NavState& x, const NavState& lin) {
  Eigen::Matrix<double, 15, 1> d;
  d.head<6>() = se3_log(compose(inverse(lin.pose), x.pose));
  d.segment<3>(6) = x.velocity - lin.velocity;
  d.segment<3>(9) = x.bias.gyro - lin.bias.gyro;
  d.segment<3>(12) = x.bias.accel - lin.bias.accel;
  return d;
}

PriorFactor::PriorFactor(int var, const NavState& prior, double sigma_trans,
                         double sigma_rot, double sigma_vel, double sigma_bg,
                         double sigma_ba)
    : prior_(prior) {
  vars_ = {var};
  weights_.segment<3>(0).setConstant(1.0 / (sigma_trans * sigma_trans));
  weights_.segment<3>(3).setConstant(1.0 / (sigma_rot * sigma_rot));
  weights_.segment<3>(6).setConstant(1.0 / (sigma_vel * sigma_vel));
  weights_.segment<3>(9).setConstant(1.0 / (sigma_bg * sigma_bg));
  weights_.segment<3>(12).setConstant(1.0 / (sigma_ba * sigma_ba));
}

double PriorFactor::accumulate(const std::vector<KeyframeState>& states,
                               const std::vector<int>& offsets, MatXd* H,
                               VecXd* g) const {
  const NavState& x = states[vars_[0]].nav;
  const Mat3d R = x.pose.rotation.toRotationMatrix();

  Eigen::Matrix<double, 15, 1> r;
  r.segment<3>(0) = x.pose.translation - prior_.pose.translation;
  const Vec3d r_rot =
      so3_log(Quatd(prior_.pose.rotation.conjugate() * x.pose.rotation).normalized());
  r.segment<3>(3) = r_rot;
  r.segment<3>(6) = x.velocity - prior_.velocity;
  r.segment<3>(9) = x.bias.gyro - prior_.bias.gyro;
  r.segment<3>(12) = x.bias.accel - prior_.bias.accel;

  Eigen::Matrix<double, 15, 15> J = Eigen::Matrix<double, 15, 15>::Identity();
  J.block<3, 3>(0, 0) = R;  // p + R drho
  J.block<3, 3>(3, 3) = so3_right_jacobian_inv(r_rot);

  const double cost = 0.5 * r.dot(weights_.asDiagonal() * r);
  if (H != nullptr && g != nullptr) {
    const MatXd wJ = weights_.asDiagonal() * J;
    scatter(offsets, vars_, {Eigen::Ref<const MatXd>(J)}, weights_.asDiagonal() * r, wJ, H,
            g);
  }
  return cost;
}

OdomFactor::OdomFactor(int var_i, int var_j, const PoseSE3d& measured,
                       const Mat6d& information)
    : measured_(measured), info_(information) {
  vars_ = {var_i, var_j};
}

double OdomFactor::accumulate(const std::vector<KeyframeState>& states,
                              const std::vector<int>& offsets, MatXd* H,
                              VecXd* g) const {
  const NavState& xi = states[vars_[0]].nav;
  const NavState& xj = states[vars_[1]].nav;
  const Mat3d Ri = xi.pose.rotation.toRotationMatrix();
  const Mat3d Rj = xj.pose.rotation.toRotationMatrix();
  const Mat3d Ri_t = Ri.transpose();

  // Residual rows: (translation, rotation).
  const Vec3d dp = Ri_t * (xj.pose.translation - xi.pose.translation);
  Vec6d r;
  r.head<3>() = dp - measured_.translation;
  const Vec3d r_rot = so3_log(
      Quatd(measured_.rotation.conjugate() * (xi.pose.rotation.conjugate() * xj.pose.rotation))
          .normalized());
  r.tail<3>() = r_rot;

  Eigen::Matrix<double, 6, 15> Ji = Eigen::Matrix<double, 6, 15>::Zero();
  Eigen::Matrix<double, 6, 15> Jj = Eigen::Matrix<double, 6, 15>::Zero();
  const Mat3d Jr_inv = so3_right_jacobian_inv(r_rot);
  Ji.block<3, 3>(0, 0) = -Mat3d::Identity();
  Ji.block<3, 3>(0, 3) = skew(dp);
  Ji.block<3, 3>(3, 3) = -Jr_inv * (Rj.transpose() * Ri);
  Jj.block<3, 3>(0, 0) = Ri_t * Rj;
  Jj.block<3, 3>(3, 3) = Jr_inv;

  const double cost = 0.5 * r.dot(info_ * r);
  if (H != nullptr && g != nullptr) {
    MatXd Jfull(6, 2 * kStateDim);
    Jfull.leftCols<kStateDim>() = Ji;
    Jfull.rightCols<kStateDim>() = Jj;
    scatter(offsets, vars_,
            {Eigen::Ref<const MatXd>(Jfull.leftCols<kStateDim>()),
             Eigen::Ref<const MatXd>(Jfull.rightCols<kStateDim>())},
            info_ * r, info_ * Jfull, H, g);
  }
  return cost;
}

MapFactor::MapFactor(int var, std::shared_ptr<const NdtGrid> grid, const NdtParams& params)
    : grid_(std::move(grid)), params_(params) {
  vars_ = {var};
}

double MapFactor::accumulate(const std::vector<KeyframeState>& states,
                             const std::vector<int>& offsets, MatXd* H, VecXd* g) const {
  const KeyframeState& kf = states[vars_[0]];
  const NdtEval eval = ndt_evaluate(kf.nav.pose, *kf.scan, *grid_, params_);
  const double scale = params_.information_scale();
  const double cost = -scale * eval.score;
  if (H != nullptr && g != nullptr) {
    const int row = offsets[vars_[0]];
    if (row >= 0) {
      g->segment<6>(row) -= scale * eval.gradient;
      // Gauss-Newton style PSD projection of the ascent curvature keeps the
      // normal equations solvable away from the optimum.
      Eigen::SelfAdjointEigenSolver<Mat6d> es(-eval.hessian);
      const Vec6d clamped = es.eigenvalues().cwiseMax(0.0);
      const Mat6d Hpsd =
          es.eigenvectors() * clamped.asDiagonal() * es.eigenvectors().transpose();
      H->block<6, 6>(row, row) += scale * Hpsd;
    }
  }
  return cost;
}

ImuFactor::ImuFactor(int var_i, int var_j, PreintDelta delta, const Vec3d& gravity,
                     const ImuNoise& noise)
    : delta_(std::move(delta)), gravity_(gravity), noise_(noise) {
  vars_ = {var_i, var_j};
}

double ImuFactor::accumulate(const std::vector<KeyframeState>& states,
                             const std::vector<int>& offsets, MatXd* H, VecXd* g) const {
  const ImuResidual res = imu_residual(states[vars_[0]].nav, states[vars_[1]].nav, delta_,
                                       gravity_, noise_);
  const double cost = 0.5 * res.value.dot(res.information * res.value);
  if (H != nullptr && g != nullptr) {
    MatXd Jfull(15, 2 * kStateDim);
    Jfull.leftCols<kStateDim>() = res.jacobian_i;
    Jfull.rightCols<kStateDim>() = res.jacobian_j;
    scatter(offsets, vars_,
            {Eigen::Ref<const MatXd>(Jfull.leftCols<kStateDim>()),
             Eigen::Ref<const MatXd>(Jfull.rightCols<kStateDim>())},
            res.information * res.value, res.information * Jfull, H, g);
  }
  return cost;
}

MargPriorFactor::MargPriorFactor(std::vector<int> vars, MatXd H_hat, VecXd b_hat,
                                 std::vector<KeyframeState> lin_states)
    : H_hat_(std::move(H_hat)), b_hat_(std::move(b_hat)), lin_states_(std::move(lin_states)) {
  vars_ = std::move(vars);
}

double MargPriorFactor::accumulate(const std::vector<KeyframeState>& states,
                                   const std::vector<int>& offsets, MatXd* H,
                                   VecXd* g) const {
  const int n = static_cast<int>(vars_.size());
  VecXd delta(n * kStateDim);
  for (int i = 0; i < n; ++i) {
    delta.segment<kStateDim>(i * kStateDim) =
        local_delta(states[vars_[i]].nav, lin_states_[i].nav);
  }
  const double cost = 0.5 * delta.dot(H_hat_ * delta) - b_hat_.dot(delta);
  if (H != nullptr && g != nullptr) {
    const VecXd grad = H_hat_ * delta - b_hat_;
    for (int i = 0; i < n; ++i) {
      const int ri = offsets[vars_[i]];
      if (ri < 0) continue;
      g->segment<kStateDim>(ri) += grad.segment<kStateDim>(i * kStateDim);
      for (int j = 0; j < n; ++j) {
        const int rj = offsets[vars_[j]];
        if (rj < 0) continue;
        H->block<kStateDim, kStateDim>(ri, rj) +=
            H_hat_.block<kStateDim, kStateDim>(i * kStateDim, j * kStateDim);
      }
    }
  }
  return cost;
}

}  // namespace blockloc
