#include <blockloc/scan/deskew.hpp>

#include <algorithm>
#include <cmath>

namespace blockloc {

TwistSe3d estimate_twist(const PoseSE3d& pose_km2, const PoseSE3d& pose_km1) {
  return se3_log(compose(inverse(pose_km2), pose_km1));
}

namespace {

// Body rotation from sweep start to each requested time, integrated with the
// midpoint rule over the gyro stream. Returns false on a coverage gap.
class GyroIntegrator {
 public:
  GyroIntegrator(const std::vector<ImuSample>& gyro, double t0, double max_gap)
      : gyro_(gyro), max_gap_(max_gap), t_(t0) {
    idx_ = 0;
    while (idx_ + 1 < gyro_.size() && gyro_[idx_ + 1].stamp <= t0) ++idx_;
    ok_ = !gyro_.empty() && gyro_.front().stamp <= t0 + max_gap_;
  }

  bool ok() const { return ok_; }

  // Advance to time t (non-decreasing across calls) and return the rotation
  // from sweep start to t.
  Quatd rotation_at(double t) {
    while (ok_ && t_ < t) {
      if (idx_ + 1 >= gyro_.size()) {
        if (t - t_ > max_gap_) ok_ = false;
        break;
      }
      const ImuSample& a = gyro_[idx_];
      const ImuSample& b = gyro_[idx_ + 1];
      if (b.stamp - a.stamp > max_gap_) {
        ok_ = false;
        break;
      }
      const double t_next = std::min(b.stamp, t);
      const double dt = t_next - t_;
      if (dt > 0) {
        const Vec3d w = 0.5 * (a.gyro + b.gyro);
        q_ = (q_ * so3_exp<double>(w * dt)).normalized();
        t_ = t_next;
      }
      if (t_next >= b.stamp) ++idx_;
      if (t_ >= t) break;
    }
    return q_;
  }

 private:
  const std::vector<ImuSample>& gyro_;
  double max_gap_;
  double t_;
  size_t idx_;
  Quatd q_ = Quatd::Identity();
  bool ok_ = true;
};

}  // namespace

DeskewedScan deskew_scan(const RawScan& scan, const TwistSe3d& twist,
                         const std::vector<ImuSample>& gyro, DeskewStats* stats,
                         double max_gyro_gap) {
  DeskewedScan out;
  out.stamp = scan.t_start;
  out.points.resize(scan.points.size());

  const double duration = scan.t_end - scan.t_start;
  const Vec3d rho = twist.head<3>();
  const Vec3d phi = twist.tail<3>();

  // First pass with the gyro; abandoned wholesale on a coverage gap so the
  // whole sweep is corrected consistently.
  GyroIntegrator integ(gyro, scan.t_start, max_gyro_gap);
  bool use_gyro = integ.ok() && !gyro.empty();
  if (use_gyro) {
    bool failed = false;
    for (size_t i = 0; i < scan.points.size(); ++i) {
      const auto& sp = scan.points[i];
      const double alpha = sp.t_rel;
      const Quatd q = integ.rotation_at(scan.t_start + alpha * duration);
      if (!integ.ok()) {
        failed = true;
        break;
      }
      const Vec3d p = q * sp.p.cast<double>() + alpha * rho;
      out.points[i] = p.cast<float>();
    }
    if (failed) {
      use_gyro = false;
      if (stats) ++stats->gyro_fallbacks;
    }
  }

  if (!use_gyro) {
    for (size_t i = 0; i < scan.points.size(); ++i) {
      const auto& sp = scan.points[i];
      const double alpha = sp.t_rel;
      Vec3d p;
      if (phi.squaredNorm() == 0.0) {
        p = sp.p.cast<double>() + alpha * rho;
      } else {
        p = so3_exp<double>(alpha * phi) * sp.p.cast<double>() + alpha * rho;
      }
      out.points[i] = p.cast<float>();
    }
  }
  return out;
}

}  // namespace blockloc
