#include <blockloc/core/error.hpp>
#include <blockloc/map/formats.hpp>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace blockloc {
namespace {

// Little-endian byte buffer helpers. The build targets little-endian hosts;
// memcpy keeps them alias-safe.
template <typename T>
void put(Bytes& out, const T& v) {
  const size_t n = out.size();
  out.resize(n + sizeof(T));
  std::memcpy(out.data() + n, &v, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const Bytes& b) : bytes_(b) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw IoError("truncated buffer");
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  void expect_magic(const char* magic) {
    if (pos_ + 4 > bytes_.size()) throw IoError("truncated buffer");
    if (std::memcmp(bytes_.data() + pos_, magic, 4) != 0) {
      throw IoError(std::string("bad magic, expected ") + magic);
    }
    pos_ += 4;
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  const Bytes& bytes_;
  size_t pos_ = 0;
};

void put_magic(Bytes& out, const char* magic) {
  out.insert(out.end(), magic, magic + 4);
}

}  // namespace

Bytes encode_block_map(const BlockMap& bm) {
  Bytes out;
  out.reserve(28 + bm.points.size() * 12);
  put_magic(out, "BMAP");
  put<uint32_t>(out, 1);
  put<uint32_t>(out, bm.id);
  put<float>(out, bm.size_s);
  // Stored centroid is advisory; the loader recomputes in double precision.
  Vec3d sum = Vec3d::Zero();
  for (const auto& p : bm.points) sum += p.cast<double>();
  const Vec3d c = bm.points.empty() ? Vec3d::Zero() : Vec3d(sum / double(bm.points.size()));
  put<float>(out, static_cast<float>(c.x()));
  put<float>(out, static_cast<float>(c.y()));
  put<float>(out, static_cast<float>(c.z()));
  put<uint64_t>(out, bm.points.size());
  for (const auto& p : bm.points) {
    put<float>(out, p.x());
    put<float>(out, p.y());
    put<float>(out, p.z());
  }
  return out;
}

BlockMap decode_block_map(const Bytes& bytes) {
  Reader r(bytes);
  r.expect_magic("BMAP");
  const uint32_t version = r.get<uint32_t>();
  if (version != 1) throw IoError("unsupported bmap version " + std::to_string(version));
  BlockMap bm;
  bm.id = r.get<uint32_t>();
  bm.size_s = r.get<float>();
  r.get<float>();  // stored centroid, recomputed below
  r.get<float>();
  r.get<float>();
  const uint64_t n = r.get<uint64_t>();
  if (n > (1ull << 32)) throw IoError("unreasonable bmap point count");
  bm.points.resize(n);
  for (uint64_t i = 0; i < n; ++i) {
    bm.points[i].x() = r.get<float>();
    bm.points[i].y() = r.get<float>();
    bm.points[i].z() = r.get<float>();
  }
  if (!r.at_end()) throw IoError("trailing bytes in bmap");
  bm.recompute_centroid();
  return bm;
}

Bytes encode_scan(const RawScan& scan) {
  Bytes out;
  out.reserve(28 + scan.points.size() * 16);
  put_magic(out, "SCN1");
  put<double>(out, scan.t_start);
  put<double>(out, scan.t_end);
  put<uint64_t>(out, scan.points.size());
  for (const auto& sp : scan.points) {
    put<float>(out, sp.p.x());
    put<float>(out, sp.p.y());
    put<float>(out, sp.p.z());
    put<float>(out, sp.t_rel);
  }
  return out;
}

RawScan decode_scan(const Bytes& bytes) {
  Reader r(bytes);
  r.expect_magic("SCN1");
  RawScan scan;
  scan.t_start = r.get<double>();
  scan.t_end = r.get<double>();
  const uint64_t n = r.get<uint64_t>();
  if (n > (1ull << 32)) throw IoError("unreasonable scan point count");
  scan.points.resize(n);
  for (uint64_t i = 0; i < n; ++i) {
    scan.points[i].p.x() = r.get<float>();
    scan.points[i].p.y() = r.get<float>();
    scan.points[i].p.z() = r.get<float>();
    scan.points[i].t_rel = r.get<float>();
  }
  if (!r.at_end()) throw IoError("trailing bytes in scan");
  return scan;
}

Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  in.seekg(0, std::ios::end);
  const auto size = in.tellg();
  in.seekg(0);
  Bytes bytes(static_cast<size_t>(size));
  in.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!in) throw IoError("short read: " + path);
  return bytes;
}

void write_file(const std::string& path, const Bytes& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open file for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write: " + path);
}

std::vector<LibraryIndexEntry> read_library_index(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open library index: " + path);
  std::vector<LibraryIndexEntry> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    LibraryIndexEntry e;
    if (!(ss >> e.id >> e.centroid.x() >> e.centroid.y() >> e.centroid.z() >>
          e.point_count >> e.filename)) {
      throw IoError("bad library index line: " + line);
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

void save_library(const MapLibrary& lib, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream idx(fs::path(dir) / "library.idx");
  if (!idx) throw IoError("cannot write library.idx in " + dir);
  for (const auto& bm : lib.blocks) {
    char name[64];
    std::snprintf(name, sizeof(name), "bm_%u.bmap", bm.id);
    write_file((fs::path(dir) / name).string(), encode_block_map(bm));
    char line[256];
    std::snprintf(line, sizeof(line), "%u %.17g %.17g %.17g %zu %s", bm.id,
                  bm.centroid.x(), bm.centroid.y(), bm.centroid.z(),
                  bm.points.size(), name);
    idx << line << "\n";
  }
}

MapLibrary load_library(const std::string& dir) {
  namespace fs = std::filesystem;
  MapLibrary lib;
  for (const auto& e : read_library_index((fs::path(dir) / "library.idx").string())) {
    BlockMap bm = decode_block_map(read_file((fs::path(dir) / e.filename).string()));
    if (bm.id != e.id) throw IoError("library index mismatch for " + e.filename);
    lib.blocks.push_back(std::move(bm));
  }
  lib.rebuild_index();
  return lib;
}

}  // namespace blockloc
