#pragma once

#include <blockloc/geometry/se3.hpp>
#include <blockloc/init/bbs.hpp>
#include <blockloc/map/formats.hpp>
#include <blockloc/scan/deskew.hpp>
#include <blockloc/server/map_client.hpp>

namespace blockloc {

struct InitOptions {
  double resolution = 0.25;    // level-0 cell size r
  int pyramid_levels = 6;
  double window = 40.0;        // full linear window width (meters)
  double slice_low = 0.3;      // z slice above local ground
  double slice_high = 2.0;
  double base_score = 0.6;     // adaptive base score, first attempt
  double retry_score = 0.3;    // single backoff retry
  size_t max_scan_points = 400;
};

struct InitResult {
  PoseSE3d pose;
  uint32_t bm_id = 0;
  double score = 0.0;
};

// Flattens a scan for 2-D scoring: keeps points whose world height (given a
// coarse sensor z) falls inside the map slice, deduplicates per cell and
// subsamples to max_points.
std::vector<Vec2d> flatten_scan(const DeskewedScan& scan, double sensor_z, double slice_lo,
                                double slice_hi, double cell, size_t max_points);

// Coarse-to-fine global initialization inside the block nearest to `coarse`:
// fetch the block, build the score pyramid, run branch-and-bound in a
// window x 2pi around the coarse position, then lift (x, y, theta) to SE(3)
// with z from nearby map points and zero roll/pitch.
InitResult initialize_pose(const Vec3d& coarse, MapSource& source,
                           const DeskewedScan& scan, const InitOptions& opts = {});

// The same search against an already-fetched block (used by tests and the
// tracker's relocalization path).
InitResult initialize_in_block(const Vec3d& coarse, const BlockMap& block,
                               const DeskewedScan& scan, const InitOptions& opts = {});

}  // namespace blockloc
