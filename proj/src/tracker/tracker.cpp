#include <blockloc/tracker/tracker.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>

namespace blockloc {
namespace {

// Samples covering [t0, t1] with endpoints interpolated onto the boundary.
std::vector<ImuSample> slice_samples(const std::vector<ImuSample>& samples, double t0,
                                     double t1) {
  std::vector<ImuSample> out;
  if (samples.empty() || t1 <= t0) return out;
  auto lerp = [](const ImuSample& a, const ImuSample& b, double t) {
    const double u = (t - a.stamp) / (b.stamp - a.stamp);
    ImuSample s;
    s.stamp = t;
    s.accel = a.accel + u * (b.accel - a.accel);
    s.gyro = a.gyro + u * (b.gyro - a.gyro);
    return s;
  };
  for (size_t i = 0; i < samples.size(); ++i) {
    const ImuSample& s = samples[i];
    if (s.stamp < t0) {
      if (i + 1 < samples.size() && samples[i + 1].stamp > t0) {
        out.push_back(lerp(s, samples[i + 1], t0));
      }
      continue;
    }
    if (s.stamp > t1) {
      if (!out.empty() && i > 0 && samples[i - 1].stamp < t1) {
        out.push_back(lerp(samples[i - 1], s, t1));
      }
      break;
    }
    out.push_back(s);
  }
  return out;
}

Mat6d clamp_information(const Mat6d& info, double floor_val, double cap) {
  Eigen::SelfAdjointEigenSolver<Mat6d> es(0.5 * (info + info.transpose().eval()));
  const Vec6d ev = es.eigenvalues().cwiseMax(floor_val).cwiseMin(cap);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

void write_timing_csv(const std::string& path, const std::vector<TimingRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write timing csv: " + path);
  out << "stamp,update_ms,window_size,bm_id,switched\n";
  for (const auto& r : rows) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%.6f,%.4f,%d,%d,%d\n", r.stamp, r.update_ms,
                  r.window_size, r.bm_id, r.switched ? 1 : 0);
    out << buf;
  }
}

PoseTracker::PoseTracker(const TrackerOptions& opts, MapSource* source)
    : opts_(opts), source_(source) {
  window_.max_keyframes = opts.max_keyframes;
  window_.reserve_keyframes = opts.reserve_keyframes;
}

PoseTracker::PoseTracker(const TrackerOptions& opts, std::shared_ptr<const NdtGrid> grid)
    : opts_(opts), grid_(std::move(grid)) {
  window_.max_keyframes = opts.max_keyframes;
  window_.reserve_keyframes = opts.reserve_keyframes;
}

PoseTracker::~PoseTracker() {
  if (prefetch_.valid()) prefetch_.wait();
}

void PoseTracker::initialize(const PoseSE3d& init_pose, uint32_t bm_id,
                             std::optional<Vec3d> gravity) {
  gravity_ = gravity.value_or(Vec3d(0, 0, -opts_.gravity_magnitude));
  current_bm_ = bm_id;
  if (source_ != nullptr) {
    const BlockMap block = source_->fetch(bm_id);
    own_centroid_ = block.centroid;
    if (block.size_s > 0) block_size_s_ = block.size_s;
    grid_ = std::make_shared<NdtGrid>(build_ndt_grid(block.points, opts_.ndt.voxel_size));
  }
  propagated_.pose = init_pose;
  propagated_.velocity = Vec3d::Zero();
  propagated_.bias = ImuBias{};
  initialized_ = true;
}

bool PoseTracker::keyframe_due(const PoseSE3d& predicted, double stamp) const {
  if (window_.states.empty()) return true;
  const KeyframeState& last = window_.states.back();
  const PoseSE3d rel = compose(inverse(last.nav.pose), predicted);
  if (rel.translation.norm() >= opts_.keyframe_trans) return true;
  if (rotation_angle(rel) >= opts_.keyframe_rot_deg * M_PI / 180.0) return true;
  return stamp - last.stamp >= opts_.keyframe_time;
}

PoseSE3d PoseTracker::process_frame(const RawScan& scan,
                                    const std::vector<ImuSample>& imu) {
  if (!initialized_) throw Error("process_frame before initialize");
  const auto tic = std::chrono::steady_clock::now();

  if (last_frame_stamp_ >= 0.0 &&
      scan.t_start - last_frame_stamp_ > opts_.max_scan_gap) {
    throw TrackingLost("scan gap of " + std::to_string(scan.t_start - last_frame_stamp_) +
                           " s",
                       window_.states.empty() ? propagated_.pose
                                              : window_.states.back().nav.pose);
  }

  pending_imu_.insert(pending_imu_.end(), imu.begin(), imu.end());

  // Dead-reckon to the sweep start.
  if (!window_.states.empty()) {
    const double t_from = std::max(last_keyframe_stamp_, last_frame_stamp_);
    const auto seg = slice_samples(pending_imu_, t_from, scan.t_start);
    if (seg.size() >= 2) propagated_ = forward_propagate(propagated_, seg, gravity_);
  }

  // Deskew: constant-velocity translation from the two previous frame
  // poses, rotation from the gyro within the sweep.
  TwistSe3d twist = TwistSe3d::Zero();
  if (prev_frame_pose_ && prev_prev_frame_pose_) {
    try {
      twist = estimate_twist(*prev_prev_frame_pose_, *prev_frame_pose_);
    } catch (const NearPiRotation&) {
      twist.setZero();
    }
  }
  const auto sweep_gyro = slice_samples(pending_imu_, scan.t_start, scan.t_end);
  const DeskewedScan deskewed = deskew_scan(scan, twist, sweep_gyro, &deskew_stats_);

  bool switched = false;
  PoseSE3d out_pose = propagated_.pose;

  if (keyframe_due(propagated_.pose, scan.t_start)) {
    auto scan_ds = std::make_shared<PointCloud>(
        voxel_downsample(deskewed.points, opts_.scan_leaf));
    const auto preint_samples =
        slice_samples(pending_imu_, last_keyframe_stamp_, scan.t_start);
    add_keyframe(propagated_.pose, propagated_.velocity, scan.t_start, scan_ds,
                 preint_samples);
    if (source_ != nullptr) switched = run_switch_policy(window_.states.back().nav.pose);

    // Reset dead reckoning from the optimized newest state.
    propagated_ = window_.states.back().nav;
    last_keyframe_stamp_ = scan.t_start;
    const double keep_from = scan.t_start - 0.05;
    pending_imu_.erase(std::remove_if(pending_imu_.begin(), pending_imu_.end(),
                                      [&](const ImuSample& s) { return s.stamp < keep_from; }),
                       pending_imu_.end());
    out_pose = window_.states.back().nav.pose;

    keyframe_log_.push_back(
        {scan.t_start, out_pose, current_bm_, switched});
  }

  prev_prev_frame_pose_ = prev_frame_pose_;
  prev_frame_pose_ = out_pose;
  last_frame_stamp_ = scan.t_start;
  trajectory_.push_back({scan.t_start, out_pose});

  const auto toc = std::chrono::steady_clock::now();
  TimingRow row;
  row.stamp = scan.t_start;
  row.update_ms = std::chrono::duration<double, std::milli>(toc - tic).count();
  row.window_size = static_cast<int>(window_.states.size());
  row.bm_id = static_cast<int>(current_bm_);
  row.switched = switched;
  timing_.push_back(row);
  return out_pose;
}

void PoseTracker::add_keyframe(const PoseSE3d& predicted, const Vec3d& velocity,
                               double stamp, std::shared_ptr<const PointCloud> scan_ds,
                               const std::vector<ImuSample>& preint_samples) {
  KeyframeState kf;
  kf.key = next_key_++;
  kf.stamp = stamp;
  kf.nav.pose = predicted;
  kf.nav.velocity = velocity;
  kf.nav.bias = window_.states.empty() ? ImuBias{} : window_.states.back().nav.bias;
  kf.bm_id = current_bm_;
  kf.scan = std::move(scan_ds);

  const int idx = static_cast<int>(window_.states.size());
  window_.states.push_back(kf);

  if (idx == 0) {
    window_.factors.push_back(std::make_unique<PriorFactor>(
        0, kf.nav, opts_.init_sigma_trans, opts_.init_sigma_rot_deg * M_PI / 180.0));
    window_.factors.push_back(std::make_unique<MapFactor>(0, grid_, opts_.ndt));
  } else {
    const KeyframeState& prev = window_.states[idx - 1];

    if (preint_samples.size() >= 2) {
      window_.factors.push_back(std::make_unique<ImuFactor>(
          idx - 1, idx, preintegrate(preint_samples, prev.nav.bias, opts_.imu_noise),
          gravity_, opts_.imu_noise));
    }

    // Scan-to-scan odometry against the previous keyframe's scan.
    const NdtGrid prev_grid = build_ndt_grid(*prev.scan, opts_.ndt.voxel_size);
    const PoseSE3d guess = compose(inverse(prev.nav.pose), predicted);
    const NdtAlignResult align =
        ndt_align(guess, *window_.states[idx].scan, prev_grid, opts_.ndt);
    if (align.eval.matched > 10) {
      const Mat6d info = clamp_information(
          -opts_.ndt.information_scale() * align.eval.hessian, 1e1, 1e8);
      window_.factors.push_back(
          std::make_unique<OdomFactor>(idx - 1, idx, align.pose, info));
    }

    window_.factors.push_back(std::make_unique<MapFactor>(idx, grid_, opts_.ndt));
  }

  const OptimizeReport report = optimize_window(window_, opts_.optimize);
  if (report.diverged) {
    throw TrackingLost("optimizer diverged",
                       window_.states.size() > 1
                           ? window_.states[window_.states.size() - 2].nav.pose
                           : window_.states.back().nav.pose);
  }

  // Steady-state FIFO marginalization.
  if (static_cast<int>(window_.states.size()) > window_.max_keyframes) {
    marginalize_states(window_,
                       static_cast<int>(window_.states.size()) - window_.max_keyframes);
  }
}

void PoseTracker::start_prefetch(uint32_t bm_id) {
  if (prefetch_active_ && prefetch_target_ == bm_id) return;
  if (prefetch_done_ && prefetch_done_->bm_id == bm_id) return;
  if (prefetch_.valid()) prefetch_.wait();  // let a stale prefetch finish
  MapSource* source = source_;
  const double voxel = opts_.ndt.voxel_size;
  prefetch_target_ = bm_id;
  prefetch_active_ = true;
  prefetch_ = std::async(std::launch::async, [source, bm_id, voxel]() {
    Prefetched out;
    out.bm_id = bm_id;
    const BlockMap block = source->fetch(bm_id);
    out.centroid = block.centroid;
    out.grid = std::make_shared<NdtGrid>(build_ndt_grid(block.points, voxel));
    return out;
  });
}

std::shared_ptr<const NdtGrid> PoseTracker::wait_for_grid(uint32_t bm_id) {
  if (prefetch_done_ && prefetch_done_->bm_id == bm_id) {
    own_centroid_ = prefetch_done_->centroid;
    auto grid = prefetch_done_->grid;
    prefetch_done_.reset();
    return grid;
  }
  if (prefetch_active_ && prefetch_target_ == bm_id && prefetch_.valid()) {
    Prefetched got = prefetch_.get();
    prefetch_active_ = false;
    own_centroid_ = got.centroid;
    return got.grid;
  }
  // No prefetch in flight: synchronous fetch.
  const BlockMap block = source_->fetch(bm_id);
  own_centroid_ = block.centroid;
  return std::make_shared<NdtGrid>(build_ndt_grid(block.points, opts_.ndt.voxel_size));
}

bool PoseTracker::run_switch_policy(const PoseSE3d& pose) {
  // Collect a finished prefetch without blocking.
  if (prefetch_active_ && prefetch_.valid() &&
      prefetch_.wait_for(std::chrono::seconds(0)) == std::future_status::ready) {
    prefetch_done_ = prefetch_.get();
    prefetch_active_ = false;
  }

  QueryResult q;
  try {
    q = source_->query(pose.translation);
  } catch (const ServerUnavailable&) {
    return false;  // keep tracking on the current grid, retry next keyframe
  } catch (const EmptyLibrary&) {
    return false;
  }

  if (q.bm_id != current_bm_) {
    if (mismatch_id_ != q.bm_id) {
      mismatch_id_ = q.bm_id;
      mismatch_count_ = 0;
    }
    ++mismatch_count_;
    start_prefetch(q.bm_id);
  } else {
    mismatch_count_ = 0;
    // Approaching a boundary: fetch the next block before it is needed.
    if (q.has_second) {
      const double margin = opts_.prefetch_margin_factor * block_size_s_;
      if (q.second_distance < q.distance + margin) start_prefetch(q.second_id);
    }
  }

  if (mismatch_count_ < opts_.switch_hysteresis) return false;

  // Switch: keep only the newest N_r keyframes, marginalizing the rest, and
  // re-aim the surviving map factors at the new grid.
  const uint32_t new_bm = q.bm_id;
  auto new_grid = wait_for_grid(new_bm);

  const int drop =
      std::max(0, static_cast<int>(window_.states.size()) - window_.reserve_keyframes);
  if (drop > 0) {
    try {
      marginalize_states(window_, drop);
    } catch (const DegenerateMarginalization& e) {
      std::fprintf(stderr, "[tracker] degenerate marginalization at switch: %s\n",
                   e.what());
      // Drop the consumed information instead of installing a prior.
      window_.prior.reset();
      window_.states.erase(window_.states.begin(), window_.states.begin() + drop);
      for (auto& f : window_.factors) f->remap(-drop);
    }
  }

  grid_ = std::move(new_grid);
  current_bm_ = new_bm;
  for (auto& st : window_.states) st.bm_id = new_bm;
  for (auto& f : window_.factors) {
    if (f->kind() == Factor::Kind::kMap) {
      static_cast<MapFactor*>(f.get())->rebind(grid_);
    }
  }
  mismatch_count_ = 0;
  ++switch_count_;
  return true;
}

}  // namespace blockloc
