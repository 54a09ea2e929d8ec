#pragma once

#include <blockloc/map/block_map.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace blockloc {

// Raw sweep with per-point time fractions, as stored in .scn files.
struct RawScanPoint {
  Vec3f p = Vec3f::Zero();
  float t_rel = 0.f;  // fraction of the sweep in [0, 1]
};

struct RawScan {
  double t_start = 0.0;
  double t_end = 0.0;
  std::vector<RawScanPoint> points;
};

using Bytes = std::vector<uint8_t>;

// Block-map file, little endian:
//   magic "BMAP", u32 version=1, u32 id, f32 size_S, f32[3] centroid,
//   u64 point_count, point_count * f32[3].
// The centroid field is always written as f32(mean of points); loading
// recomputes the double-precision centroid from the points.
Bytes encode_block_map(const BlockMap& bm);
BlockMap decode_block_map(const Bytes& bytes);

// Scan file, little endian:
//   magic "SCN1", f64 t_start, f64 t_end, u64 n, n * (f32 x, f32 y, f32 z, f32 t_rel).
Bytes encode_scan(const RawScan& scan);
RawScan decode_scan(const Bytes& bytes);

Bytes read_file(const std::string& path);
void write_file(const std::string& path, const Bytes& bytes);

// library.idx: one line per block, `id cx cy cz point_count filename`.
struct LibraryIndexEntry {
  uint32_t id = 0;
  Vec3d centroid = Vec3d::Zero();
  uint64_t point_count = 0;
  std::string filename;
};

std::vector<LibraryIndexEntry> read_library_index(const std::string& path);

// Writes bm_<id>.bmap files plus library.idx into dir.
void save_library(const MapLibrary& lib, const std::string& dir);
MapLibrary load_library(const std::string& dir);

}  // namespace blockloc
