#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <blockloc/map/formats.hpp>
#include <blockloc/server/protocol.hpp>

#include <filesystem>
#include <random>

using namespace blockloc;

namespace {

std::mt19937_64 rng(2024);

BlockMap fuzz_block() {
  std::uniform_int_distribution<int> nd(0, 300);
  std::uniform_real_distribution<float> u(-100.f, 100.f);
  BlockMap bm;
  bm.id = static_cast<uint32_t>(rng());
  bm.size_s = std::abs(u(rng));
  const int n = nd(rng);
  for (int i = 0; i < n; ++i) bm.points.push_back(Vec3f(u(rng), u(rng), u(rng)));
  bm.recompute_centroid();
  return bm;
}

RawScan fuzz_scan() {
  std::uniform_int_distribution<int> nd(0, 400);
  std::uniform_real_distribution<float> u(-80.f, 80.f);
  std::uniform_real_distribution<double> t(0, 1e6);
  RawScan s;
  s.t_start = t(rng);
  s.t_end = s.t_start + 0.1;
  const int n = nd(rng);
  float t_rel = 0.f;
  for (int i = 0; i < n; ++i) {
    RawScanPoint sp;
    sp.p = Vec3f(u(rng), u(rng), u(rng));
    t_rel = std::min(1.f, t_rel + 1.f / std::max(1, n));
    sp.t_rel = t_rel;
    s.points.push_back(sp);
  }
  return s;
}

Message fuzz_message() {
  std::uniform_int_distribution<int> kind(0, 4);
  std::uniform_real_distribution<double> u(-1e4, 1e4);
  switch (kind(rng)) {
    case 0:
      return QueryMsg{Vec3d(u(rng), u(rng), u(rng))};
    case 1:
      return FetchMsg{static_cast<uint32_t>(rng())};
    case 2: {
      MetaMsg m;
      m.id = static_cast<uint32_t>(rng());
      m.centroid = Vec3d(u(rng), u(rng), u(rng));
      m.distance = std::abs(u(rng));
      if (rng() % 2) {
        m.second_id = static_cast<uint32_t>(rng());
        m.second_distance = std::abs(u(rng));
      }
      return m;
    }
    case 3: {
      BlobMsg b;
      const size_t n = rng() % 2048;
      b.payload.resize(n);
      for (auto& byte : b.payload) byte = static_cast<uint8_t>(rng());
      return b;
    }
    default: {
      ErrorMsg e;
      e.code = static_cast<WireError>(1 + rng() % 4);
      const size_t n = rng() % 64;
      e.message.assign(n, 'x');
      return e;
    }
  }
}

}  // namespace

TEST_CASE("bmap bytes re-serialize identically across 1000 fuzzed blocks") {
  for (int i = 0; i < 1000; ++i) {
    const BlockMap bm = fuzz_block();
    const Bytes a = encode_block_map(bm);
    const BlockMap back = decode_block_map(a);
    const Bytes b = encode_block_map(back);
    REQUIRE(a == b);
    REQUIRE(back.points.size() == bm.points.size());
  }
}

TEST_CASE("scan bytes re-serialize identically across 1000 fuzzed scans") {
  for (int i = 0; i < 1000; ++i) {
    const RawScan s = fuzz_scan();
    const Bytes a = encode_scan(s);
    const RawScan back = decode_scan(a);
    const Bytes b = encode_scan(back);
    REQUIRE(a == b);
    REQUIRE(back.points.size() == s.points.size());
  }
}

TEST_CASE("wire frames re-serialize identically across 1000 fuzzed messages") {
  for (int i = 0; i < 1000; ++i) {
    const Bytes a = encode_frame(fuzz_message());
    const Message decoded = decode_frame_body(a.data() + 4, a.size() - 4);
    const Bytes b = encode_frame(decoded);
    REQUIRE(a == b);
  }
}

TEST_CASE("decoded centroid matches the double-precision mean") {
  for (int i = 0; i < 50; ++i) {
    const BlockMap bm = fuzz_block();
    if (bm.points.empty()) continue;
    const BlockMap back = decode_block_map(encode_block_map(bm));
    Vec3d mean = Vec3d::Zero();
    for (const auto& p : back.points) mean += p.cast<double>();
    mean /= static_cast<double>(back.points.size());
    CHECK((back.centroid - mean).norm() < 1e-6);
  }
}

TEST_CASE("corrupt inputs are rejected") {
  Bytes bad = encode_block_map(fuzz_block());
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_block_map(bad), IoError);

  Bytes truncated = encode_scan(fuzz_scan());
  if (truncated.size() > 8) truncated.resize(truncated.size() - 5);
  CHECK_THROWS_AS(decode_scan(truncated), IoError);

  Bytes junk = {9, 9, 9};
  CHECK_THROWS_AS(decode_frame_body(junk.data(), junk.size()), ProtocolError);
}

TEST_CASE("library save/load round trip preserves block bytes") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "blockloc_fmt_test";
  fs::remove_all(dir);

  MapLibrary lib;
  for (uint32_t i = 0; i < 4; ++i) {
    BlockMap bm = fuzz_block();
    bm.id = i;
    lib.blocks.push_back(std::move(bm));
  }
  lib.rebuild_index();
  save_library(lib, dir.string());

  const MapLibrary back = load_library(dir.string());
  REQUIRE(back.blocks.size() == lib.blocks.size());
  for (size_t i = 0; i < lib.blocks.size(); ++i) {
    CHECK(encode_block_map(back.blocks[i]) == encode_block_map(lib.blocks[i]));
  }
  fs::remove_all(dir);
}
