#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <blockloc/map/block_map.hpp>
#include <blockloc/map/map_builder.hpp>

#include <random>

using namespace blockloc;

namespace {

// Scan with points symmetric around the sensor, so a block's centroid is the
// mean of its member poses.
KeyedScan symmetric_scan(double stamp) {
  KeyedScan ks;
  ks.stamp = stamp;
  ks.points = {{0.f, 2.f, 0.f}, {0.f, -2.f, 0.f}, {0.f, 0.f, 1.f}, {0.f, 0.f, -1.f}};
  return ks;
}

std::pair<std::vector<KeyedScan>, std::vector<OfflinePose>> straight_line_input(
    int count, double spacing) {
  std::vector<KeyedScan> scans;
  std::vector<OfflinePose> poses;
  for (int i = 0; i < count; ++i) {
    const double t = 0.1 * i;
    scans.push_back(symmetric_scan(t));
    OfflinePose op;
    op.stamp = t;
    op.pose.translation = Vec3d(i * spacing, 0, 0);
    poses.push_back(op);
  }
  return {scans, poses};
}

BlockMap make_block(uint32_t id, const Vec3d& centroid, int n = 12) {
  BlockMap bm;
  bm.id = id;
  bm.size_s = 10.f;
  for (int i = 0; i < n; ++i) {
    const double a = 2 * M_PI * i / n;
    bm.points.push_back(
        (centroid + Vec3d(std::cos(a), std::sin(a), 0.05 * i)).cast<float>());
  }
  bm.recompute_centroid();
  return bm;
}

}  // namespace

TEST_CASE("single scan produces one block with that scan's points") {
  auto [scans, poses] = straight_line_input(1, 1.0);
  BuilderOptions opts;
  opts.size_s = 25.0;
  opts.leaf = 0.01f;  // effectively no downsampling
  const MapLibrary lib =
      generate_block_maps(scans, poses, PoseSE3d::Identity(), opts);
  REQUIRE(lib.blocks.size() == 1);
  CHECK(lib.blocks[0].id == 0);
  CHECK(lib.blocks[0].points.size() == scans[0].points.size());
}

TEST_CASE("empty stream raises NoInput") {
  CHECK_THROWS_AS(generate_block_maps({}, {}, PoseSE3d::Identity(), {}), NoInput);
}

TEST_CASE("scan with no pose within the stamp gap is skipped") {
  auto [scans, poses] = straight_line_input(5, 1.0);
  scans.push_back(symmetric_scan(99.0));  // far outside the pose range
  BuildStats stats;
  const MapLibrary lib =
      generate_block_maps(scans, poses, PoseSE3d::Identity(), {}, &stats);
  CHECK(stats.scans_skipped == 1);
  CHECK(stats.scans_used == 5);
  CHECK(lib.blocks.size() == 1);
}

// 36 poses marching along +x at 1 m spacing (0..35 m), S = 10:
// candidates cut when the distance from the anchor first exceeds S, the
// boundary scan re-anchoring and opening the next candidate. Stored blocks
// hold scans [0..10], [11..21], [22..32], [33..35] with centroids at
// x = 5, 16, 27, 34; the third and the trailing candidate pass the
// d >= 0.5 S rule (11 m and 7 m to the nearest centroid). No merges.
TEST_CASE("35 m straight line enacts the generation algorithm exactly") {
  auto [scans, poses] = straight_line_input(36, 1.0);
  BuilderOptions opts;
  opts.size_s = 10.0;
  opts.leaf = 0.01f;
  BuildStats stats;
  const MapLibrary lib =
      generate_block_maps(scans, poses, PoseSE3d::Identity(), opts, &stats);

  REQUIRE(lib.blocks.size() == 4);
  CHECK(stats.candidates_finalized == 4);
  CHECK(stats.merged == 0);
  CHECK(stats.discarded == 0);

  const double expected_cx[] = {5.0, 16.0, 27.0, 34.0};
  const size_t expected_scans[] = {11, 21 - 11 + 1, 32 - 22 + 1, 35 - 33 + 1};
  for (int i = 0; i < 4; ++i) {
    CHECK(lib.blocks[i].id == static_cast<uint32_t>(i));
    CHECK(lib.blocks[i].centroid.x() == doctest::Approx(expected_cx[i]).epsilon(1e-9));
    CHECK(lib.blocks[i].points.size() == expected_scans[i] * 4);
  }

  // Membership: each block spans exactly its scans' x range (+-2 in y).
  float min_x = 1e9f, max_x = -1e9f;
  for (const auto& p : lib.blocks[1].points) {
    min_x = std::min(min_x, p.x());
    max_x = std::max(max_x, p.x());
  }
  CHECK(min_x == doctest::Approx(11.0));
  CHECK(max_x == doctest::Approx(21.0));

  // All centroid pairs separated by more than 0.1 S.
  for (size_t i = 0; i < lib.blocks.size(); ++i) {
    for (size_t j = i + 1; j < lib.blocks.size(); ++j) {
      CHECK((lib.blocks[i].centroid - lib.blocks[j].centroid).norm() >
            0.1 * opts.size_s);
    }
  }
}

TEST_CASE("identical runs produce bit-identical libraries") {
  auto [scans, poses] = straight_line_input(36, 1.0);
  BuilderOptions opts;
  opts.size_s = 10.0;
  const MapLibrary a = generate_block_maps(scans, poses, PoseSE3d::Identity(), opts);
  const MapLibrary b = generate_block_maps(scans, poses, PoseSE3d::Identity(), opts);
  REQUIRE(a.blocks.size() == b.blocks.size());
  for (size_t i = 0; i < a.blocks.size(); ++i) {
    REQUIRE(a.blocks[i].points.size() == b.blocks[i].points.size());
    for (size_t k = 0; k < a.blocks[i].points.size(); ++k) {
      CHECK(a.blocks[i].points[k] == b.blocks[i].points[k]);
    }
  }
}

TEST_CASE("extrinsics reprojection applies (T^L_off)^-1 then the offline pose") {
  // Lidar mounted 0.5 m forward of the body origin, rotated 90 deg about z.
  PoseSE3d extr;
  extr.rotation = Quatd(Eigen::AngleAxisd(M_PI_2, Vec3d::UnitZ()));
  extr.translation = Vec3d(0.5, 0, 0);

  KeyedScan ks;
  ks.stamp = 0.0;
  ks.points = {{1.f, 0.f, 0.f}};
  OfflinePose op;
  op.stamp = 0.0;
  op.pose.translation = Vec3d(10, 0, 0);

  const MapLibrary lib =
      generate_block_maps({ks}, {op}, extr, BuilderOptions{10.0, 0.1, 0.01f});
  const Vec3d expected = op.pose * (inverse(extr) * Vec3d(1, 0, 0));
  REQUIRE(lib.blocks.size() == 1);
  REQUIRE(lib.blocks[0].points.size() == 1);
  CHECK((lib.blocks[0].points[0].cast<double>() - expected).norm() < 1e-5);
}

TEST_CASE("finalize_candidate branch: coincident centroid is discarded") {
  MapLibrary lib;
  lib.blocks.push_back(make_block(0, Vec3d(0, 0, 0)));
  lib.blocks.push_back(make_block(1, Vec3d(20, 0, 0)));
  lib.rebuild_index();

  BuildStats stats;
  finalize_candidate(make_block(99, Vec3d(0, 0, 0)), lib, 10.0, &stats);
  CHECK(lib.blocks.size() == 2);
  CHECK(stats.discarded == 1);
}

TEST_CASE("finalize_candidate branch: d = 0.3 S merges with weighted centroid") {
  MapLibrary lib;
  lib.blocks.push_back(make_block(0, Vec3d(0, 0, 0), 10));
  lib.blocks.push_back(make_block(1, Vec3d(20, 0, 0), 10));
  lib.rebuild_index();

  const BlockMap cand = make_block(99, Vec3d(3, 0, 0), 30);  // d = 3 = 0.3 S
  const Vec3d expected =
      (lib.blocks[0].centroid * 10 + cand.centroid * 30) / 40.0;

  BuildStats stats;
  finalize_candidate(cand, lib, 10.0, &stats);
  REQUIRE(lib.blocks.size() == 2);
  CHECK(stats.merged == 1);
  CHECK(lib.blocks[0].points.size() == 40);
  CHECK((lib.blocks[0].centroid - expected).norm() < 1e-9);
}

TEST_CASE("finalize_candidate branch: d = 0.6 S stores a new block with next id") {
  MapLibrary lib;
  lib.blocks.push_back(make_block(0, Vec3d(0, 0, 0)));
  lib.blocks.push_back(make_block(1, Vec3d(20, 0, 0)));
  lib.rebuild_index();

  finalize_candidate(make_block(99, Vec3d(6, 0, 0), 8), lib, 10.0, nullptr);
  REQUIRE(lib.blocks.size() == 3);
  CHECK(lib.blocks[2].id == 2);
  CHECK(lib.blocks[2].points.size() == 8);
}

TEST_CASE("nearest_block matches a linear scan and breaks ties by lower id") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-50, 50);

  MapLibrary lib;
  for (uint32_t i = 0; i < 25; ++i) {
    lib.blocks.push_back(make_block(i, Vec3d(u(rng), u(rng), 0.2 * i)));
  }
  lib.rebuild_index();

  for (int q = 0; q < 100; ++q) {
    const Vec3d pos(u(rng), u(rng), u(rng) * 0.1);
    // linear-scan oracle with the same tie-break
    uint32_t best_id = 0;
    double best_d = 1e300;
    for (const auto& b : lib.blocks) {
      const double d = (b.centroid - pos).norm();
      if (d < best_d || (d == best_d && b.id < best_id)) {
        best_d = d;
        best_id = b.id;
      }
    }
    const auto [id, dist] = lib.nearest_block(pos);
    CHECK(id == best_id);
    CHECK(dist == doctest::Approx(best_d).epsilon(1e-12));
  }

  // exact centroid query
  const auto [id0, d0] = lib.nearest_block(lib.blocks[7].centroid);
  CHECK(id0 == 7);
  CHECK(d0 == doctest::Approx(0.0));

  // equidistant tie resolves to the lower id
  MapLibrary tie;
  tie.blocks.push_back(make_block(0, Vec3d(-5, 0, 0)));
  tie.blocks.push_back(make_block(1, Vec3d(5, 0, 0)));
  // make_block points perturb the centroid identically for both, so the
  // midpoint is exactly equidistant
  tie.blocks[0].centroid = Vec3d(-5, 0, 0);
  tie.blocks[1].centroid = Vec3d(5, 0, 0);
  tie.rebuild_index();
  CHECK(tie.nearest_block(Vec3d(0, 1, 0)).first == 0);

  MapLibrary empty;
  CHECK_THROWS_AS(empty.nearest_block(Vec3d::Zero()), NoBlocks);
}

TEST_CASE("every input point lands in at most one stored block") {
  auto [scans, poses] = straight_line_input(36, 1.0);
  BuilderOptions opts;
  opts.size_s = 10.0;
  opts.leaf = 0.01f;
  const MapLibrary lib = generate_block_maps(scans, poses, PoseSE3d::Identity(), opts);
  size_t total = 0;
  for (const auto& b : lib.blocks) total += b.points.size();
  CHECK(total == 36 * 4);  // no duplication without merges
}

TEST_CASE("adjacent blocks from a straight run overlap in x") {
  // With symmetric scans the per-scan footprint spans +-0 in x, so overlap
  // here means adjacent extents touch within half a leaf; use a scan with
  // forward spread to model a real sensor footprint.
  std::vector<KeyedScan> scans;
  std::vector<OfflinePose> poses;
  for (int i = 0; i < 36; ++i) {
    KeyedScan ks;
    ks.stamp = 0.1 * i;
    for (double dx = -6; dx <= 6; dx += 1.0) ks.points.push_back(Vec3f(dx, 1, 0));
    scans.push_back(ks);
    OfflinePose op;
    op.stamp = 0.1 * i;
    op.pose.translation = Vec3d(i, 0, 0);
    poses.push_back(op);
  }
  BuilderOptions opts;
  opts.size_s = 10.0;
  opts.leaf = 0.01f;
  const MapLibrary lib = generate_block_maps(scans, poses, PoseSE3d::Identity(), opts);
  REQUIRE(lib.blocks.size() >= 2);
  for (size_t i = 0; i + 1 < lib.blocks.size(); ++i) {
    float max_a = -1e9f, min_b = 1e9f;
    for (const auto& p : lib.blocks[i].points) max_a = std::max(max_a, p.x());
    for (const auto& p : lib.blocks[i + 1].points) min_b = std::min(min_b, p.x());
    CHECK(max_a >= min_b);  // point extents of consecutive blocks overlap
  }
}
