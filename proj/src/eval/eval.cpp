#include <blockloc/core/error.hpp>
#include <blockloc/eval/eval.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace blockloc {

TrajPair TrajPair::associate(const Trajectory& est, const Trajectory& gt, double max_dt) {
  TrajPair pair;
  size_t j = 0;
  for (const auto& e : est) {
    while (j + 1 < gt.size() &&
           std::abs(gt[j + 1].stamp - e.stamp) <= std::abs(gt[j].stamp - e.stamp)) {
      ++j;
    }
    if (gt.empty() || std::abs(gt[j].stamp - e.stamp) > max_dt) continue;
    pair.est.push_back(e);
    pair.gt.push_back(gt[j]);
  }
  if (pair.est.size() < 2) throw InsufficientOverlap("fewer than 2 associated poses");
  return pair;
}

namespace {

Vec3d rpy_of(const Mat3d& R) {
  // ZYX convention: yaw about z, pitch about y, roll about x.
  const double pitch = -std::asin(std::clamp(R(2, 0), -1.0, 1.0));
  const double roll = std::atan2(R(2, 1), R(2, 2));
  const double yaw = std::atan2(R(1, 0), R(0, 0));
  return Vec3d(roll, pitch, yaw);
}

}  // namespace

AteResult ate_rmse(const TrajPair& pair, AteMode mode, bool align) {
  const size_t n = pair.est.size();
  AteResult out;
  out.alignment = PoseSE3d::Identity();

  if (align) {
    MatXd src(3, n), dst(3, n);
    for (size_t i = 0; i < n; ++i) {
      src.col(i) = pair.est[i].pose.translation;
      dst.col(i) = pair.gt[i].pose.translation;
    }
    const Mat4d T = Eigen::umeyama(src, dst, false);
    out.alignment.rotation = Quatd(Mat3d(T.topLeftCorner<3, 3>())).normalized();
    out.alignment.translation = T.topRightCorner<3, 1>();
  }

  double sum_sq = 0.0;
  out.residuals.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    const PoseSE3d aligned = compose(out.alignment, pair.est[i].pose);
    const Vec3d et = aligned.translation - pair.gt[i].pose.translation;
    const Mat3d R_err = pair.gt[i].pose.rotation.toRotationMatrix().transpose() *
                        aligned.rotation.toRotationMatrix();
    const Vec3d erot = rpy_of(R_err);
    sum_sq += et.squaredNorm();
    if (mode == AteMode::kFull) sum_sq += erot.squaredNorm();
    out.residuals.push_back({pair.est[i].stamp, et.x(), et.y(), et.z(), erot.x(),
                             erot.y(), erot.z()});
  }
  out.rmse = std::sqrt(sum_sq / static_cast<double>(n));
  return out;
}

void write_residual_csv(const std::string& path, const AteResult& result) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write csv: " + path);
  out << "stamp,ex,ey,ez,er,ep,eyaw\n";
  for (const auto& r : result.residuals) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%.6f,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f\n", r[0], r[1],
                  r[2], r[3], r[4], r[5], r[6]);
    out << buf;
  }
}

TimingStats timing_stats(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw IoError("cannot open timing csv: " + csv_path);
  TimingStats stats;
  std::vector<double> updates;
  std::map<int, std::pair<double, size_t>> per_bm;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.rfind("stamp", 0) == 0) continue;
    }
    double stamp, ms;
    int wsize, bm, sw;
    if (std::sscanf(line.c_str(), "%lf,%lf,%d,%d,%d", &stamp, &ms, &wsize, &bm, &sw) !=
        5) {
      throw IoError("bad timing csv line: " + line);
    }
    updates.push_back(ms);
    auto& acc = per_bm[bm];
    acc.first += ms;
    acc.second += 1;
    stats.switch_count += sw;
  }
  if (updates.empty()) throw IoError("timing csv has no rows");

  stats.rows = updates.size();
  double sum = 0.0;
  for (double v : updates) sum += v;
  stats.mean_ms = sum / static_cast<double>(updates.size());

  std::sort(updates.begin(), updates.end());
  const size_t rank =
      std::max<size_t>(1, static_cast<size_t>(std::ceil(0.95 * updates.size())));
  stats.p95_ms = updates[rank - 1];

  for (const auto& [bm, acc] : per_bm) {
    stats.per_bm_mean_ms[bm] = acc.first / static_cast<double>(acc.second);
  }
  return stats;
}

}  // namespace blockloc
