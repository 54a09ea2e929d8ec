#pragma once

#include <blockloc/geometry/se3.hpp>
#include <blockloc/imu/preintegration.hpp>
#include <blockloc/ndt/ndt.hpp>

#include <memory>
#include <vector>

namespace blockloc {

// Tangent dimension per keyframe: pose (rho, phi), velocity, gyro/accel bias.
inline constexpr int kStateDim = 15;

struct KeyframeState {
  uint64_t key = 0;  // stable id across window edits
  double stamp = 0.0;
  NavState nav;
  uint32_t bm_id = 0;
  std::shared_ptr<const PointCloud> scan;  // downsampled deskewed scan
};

// x = lin (+) delta  with pose perturbed on the right.
KeyframeState retract(const KeyframeState& x, const Eigen::Matrix<double, 15, 1>& delta);
Eigen::Matrix<double, 15, 1> local_delta(const NavState& x, const NavState& lin);

class Factor {
 public:
  enum class Kind { kOdom, kMap, kImu, kPrior, kMargPrior };

  virtual ~Factor() = default;
  virtual Kind kind() const = 0;

  // True when the factor pins the global pose gauge.
  virtual bool anchors_pose() const { return false; }

  const std::vector<int>& vars() const { return vars_; }
  void remap(int shift) {
    for (auto& v : vars_) v += shift;
  }

  // Adds the factor's cost at `states` and, when H/g are non-null, its
  // Gauss-Newton contribution. offsets[i] is the row of state i's tangent
  // block in H (or -1 when the state is outside the system being built).
  virtual double accumulate(const std::vector<KeyframeState>& states,
                            const std::vector<int>& offsets, MatXd* H,
                            VecXd* g) const = 0;

 protected:
  std::vector<int> vars_;
};

// Unary anchor on one keyframe, used for the first keyframe after global
// initialization. Sigmas are standard deviations.
class PriorFactor : public Factor {
 public:
  PriorFactor(int var, const NavState& prior, double sigma_trans, double sigma_rot,
              double sigma_vel = 0.5, double sigma_bg = 0.05, double sigma_ba = 0.5);
  Kind kind() const override { return Kind::kPrior; }
  bool anchors_pose() const override { return true; }
  double accumulate(const std::vector<KeyframeState>& states,
                    const std::vector<int>& offsets, MatXd* H, VecXd* g) const override;

 private:
  NavState prior_;
  Eigen::Matrix<double, 15, 1> weights_;  // diagonal information
};

// Relative-pose measurement between consecutive keyframes (scan-to-scan NDT).
class OdomFactor : public Factor {
 public:
  OdomFactor(int var_i, int var_j, const PoseSE3d& measured, const Mat6d& information);
  Kind kind() const override { return Kind::kOdom; }
  double accumulate(const std::vector<KeyframeState>& states,
                    const std::vector<int>& offsets, MatXd* H, VecXd* g) const override;

 private:
  PoseSE3d measured_;
  Mat6d info_;
};

// Aggregate NDT matching factor of one keyframe's scan against a block grid.
class MapFactor : public Factor {
 public:
  MapFactor(int var, std::shared_ptr<const NdtGrid> grid, const NdtParams& params);
  Kind kind() const override { return Kind::kMap; }
  bool anchors_pose() const override { return true; }
  void rebind(std::shared_ptr<const NdtGrid> grid) { grid_ = std::move(grid); }
  double accumulate(const std::vector<KeyframeState>& states,
                    const std::vector<int>& offsets, MatXd* H, VecXd* g) const override;

 private:
  std::shared_ptr<const NdtGrid> grid_;
  NdtParams params_;
};

class ImuFactor : public Factor {
 public:
  ImuFactor(int var_i, int var_j, PreintDelta delta, const Vec3d& gravity,
            const ImuNoise& noise);
  Kind kind() const override { return Kind::kImu; }
  double accumulate(const std::vector<KeyframeState>& states,
                    const std::vector<int>& offsets, MatXd* H, VecXd* g) const override;
  const PreintDelta& delta() const { return delta_; }

 private:
  PreintDelta delta_;
  Vec3d gravity_;
  ImuNoise noise_;
};

// Gaussian prior from Schur-complement marginalization, kept at a fixed
// linearization point (first-estimates convention).
class MargPriorFactor : public Factor {
 public:
  MargPriorFactor(std::vector<int> vars, MatXd H_hat, VecXd b_hat,
                  std::vector<KeyframeState> lin_states);
  Kind kind() const override { return Kind::kMargPrior; }
  bool anchors_pose() const override { return true; }
  double accumulate(const std::vector<KeyframeState>& states,
                    const std::vector<int>& offsets, MatXd* H, VecXd* g) const override;

  const MatXd& H_hat() const { return H_hat_; }
  const VecXd& b_hat() const { return b_hat_; }

 private:
  MatXd H_hat_;
  VecXd b_hat_;
  std::vector<KeyframeState> lin_states_;
};

struct SlidingWindow {
  std::vector<KeyframeState> states;
  std::vector<std::unique_ptr<Factor>> factors;
  std::unique_ptr<MargPriorFactor> prior;

  int max_keyframes = 20;      // N_a
  int reserve_keyframes = 5;   // N_r kept across a block switch

  size_t tangent_dim() const { return states.size() * kStateDim; }
};

struct OptimizeOptions {
  int max_iterations = 15;
  double gradient_tol = 1e-6;
  double step_tol = 1e-8;
  double lambda_init = 1e-4;
};

struct OptimizeReport {
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  bool converged = false;
  bool diverged = false;  // no damping level produced a cost decrease
};

// Levenberg-Marquardt on the stacked tangent space of all window states.
// Throws Underconstrained when nothing anchors the global pose.
OptimizeReport optimize_window(SlidingWindow& window, const OptimizeOptions& opts = {});

// Marginalizes the oldest `drop_count` states per Schur complement,
// consuming every factor that touches them (plus the existing prior) and
// installing the resulting prior on the involved retained states.
void marginalize_states(SlidingWindow& window, int drop_count, double eig_clamp = 1e-10);

}  // namespace blockloc
