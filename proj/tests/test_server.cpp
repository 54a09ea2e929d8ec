#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <blockloc/map/formats.hpp>
#include <blockloc/server/map_client.hpp>
#include <blockloc/server/map_server.hpp>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <filesystem>
#include <random>
#include <thread>

using namespace blockloc;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  fs::path dir;
  MapLibrary lib;
  std::unique_ptr<MapServer> server;

  explicit Fixture(int blocks = 6) {
    dir = fs::temp_directory_path() /
          ("blockloc_srv_" + std::to_string(::getpid()) + "_" + std::to_string(blocks));
    fs::remove_all(dir);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<float> u(-2.f, 2.f);
    for (int i = 0; i < blocks; ++i) {
      BlockMap bm;
      bm.id = static_cast<uint32_t>(i);
      bm.size_s = 10.f;
      const Vec3f base(10.f * i, 5.f * (i % 3), 0.f);
      for (int k = 0; k < 50; ++k) bm.points.push_back(base + Vec3f(u(rng), u(rng), u(rng)));
      bm.recompute_centroid();
      lib.blocks.push_back(std::move(bm));
    }
    lib.rebuild_index();
    save_library(lib, dir.string());
    server = std::make_unique<MapServer>(dir.string());
    server->quiet = true;
    server->start("127.0.0.1", 0);
  }

  ~Fixture() {
    server->stop();
    fs::remove_all(dir);
  }

  std::string address() const {
    return "127.0.0.1:" + std::to_string(server->port());
  }
};

}  // namespace

TEST_CASE("query at a stored centroid returns that block") {
  Fixture fx;
  MapClient client(fx.address());
  for (const auto& b : fx.lib.blocks) {
    const QueryResult q = client.query(b.centroid);
    CHECK(q.bm_id == b.id);
    CHECK(q.distance == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("queries agree with the in-process nearest_block oracle") {
  Fixture fx;
  MapClient client(fx.address());
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-30, 90);
  for (int i = 0; i < 200; ++i) {
    const Vec3d pos(u(rng), u(rng), u(rng) * 0.05);
    const auto [id, dist] = fx.lib.nearest_block(pos);
    const QueryResult q = client.query(pos);
    CHECK(q.bm_id == id);
    CHECK(q.distance == doctest::Approx(dist).epsilon(1e-9));
  }
}

TEST_CASE("query far outside all blocks still answers") {
  Fixture fx;
  MapClient client(fx.address());
  const QueryResult q = client.query(Vec3d(1e5, -1e5, 50));
  CHECK(q.distance > 1e4);
}

TEST_CASE("fetch returns bit-identical block bytes") {
  Fixture fx;
  MapClient client(fx.address());
  for (const auto& b : fx.lib.blocks) {
    const BlockMap got = client.fetch(b.id);
    CHECK(encode_block_map(got) == encode_block_map(b));
  }
}

TEST_CASE("fetch of an unknown id reports NOT_FOUND") {
  Fixture fx;
  MapClient client(fx.address());
  CHECK_THROWS_AS(client.fetch(12345), NotFound);
  // connection survives the error
  CHECK(client.query(Vec3d::Zero()).bm_id == fx.lib.nearest_block(Vec3d::Zero()).first);
}

TEST_CASE("empty library answers EMPTY_LIBRARY") {
  const auto dir = fs::temp_directory_path() / "blockloc_srv_empty";
  fs::remove_all(dir);
  fs::create_directories(dir);
  { std::ofstream((dir / "library.idx").string()); }
  MapServer server(dir.string());
  server.quiet = true;
  server.start("127.0.0.1", 0);
  MapClient client("127.0.0.1:" + std::to_string(server.port()));
  CHECK_THROWS_AS(client.query(Vec3d::Zero()), EmptyLibrary);
  server.stop();
  fs::remove_all(dir);
}

TEST_CASE("malformed frame gets an error reply and keeps the connection open") {
  Fixture fx;
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(fx.server->port());
  ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
  REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0);

  // QUERY frame with a short payload.
  const uint8_t bad[] = {3, 0, 0, 0, 1, 0xde, 0xad};
  REQUIRE(::write(fd, bad, sizeof(bad)) == static_cast<ssize_t>(sizeof(bad)));
  uint8_t len_buf[4];
  REQUIRE(::read(fd, len_buf, 4) == 4);
  uint32_t len;
  std::memcpy(&len, len_buf, 4);
  std::vector<uint8_t> body(len);
  size_t got = 0;
  while (got < len) {
    const ssize_t r = ::read(fd, body.data() + got, len - got);
    REQUIRE(r > 0);
    got += static_cast<size_t>(r);
  }
  const Message reply = decode_frame_body(body.data(), body.size());
  const auto* err = std::get_if<ErrorMsg>(&reply);
  REQUIRE(err != nullptr);
  CHECK(err->code == WireError::kBadRequest);

  // Same connection, now a valid query.
  const Bytes frame = encode_frame(QueryMsg{Vec3d::Zero()});
  REQUIRE(::write(fd, frame.data(), frame.size()) ==
          static_cast<ssize_t>(frame.size()));
  REQUIRE(::read(fd, len_buf, 4) == 4);
  ::close(fd);
}

TEST_CASE("server timeout raises ServerUnavailable") {
  MapClient client("127.0.0.1:1", 200);  // nothing listens on port 1
  CHECK_THROWS_AS(client.query(Vec3d::Zero()), ServerUnavailable);
}

TEST_CASE("1000 concurrent queries match serial execution") {
  Fixture fx;
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-20, 80);
  std::vector<Vec3d> queries;
  for (int i = 0; i < 1000; ++i) queries.emplace_back(u(rng), u(rng), 0.0);

  // Serial oracle.
  std::vector<uint32_t> expected;
  for (const auto& q : queries) expected.push_back(fx.lib.nearest_block(q).first);

  std::vector<uint32_t> got(queries.size());
  std::vector<std::thread> workers;
  const int n_workers = 8;
  for (int w = 0; w < n_workers; ++w) {
    workers.emplace_back([&, w]() {
      MapClient client(fx.address());
      for (size_t i = w; i < queries.size(); i += n_workers) {
        got[i] = client.query(queries[i]).bm_id;
      }
    });
  }
  for (auto& t : workers) t.join();
  for (size_t i = 0; i < queries.size(); ++i) CHECK(got[i] == expected[i]);
}

TEST_CASE("interleaved query+fetch under concurrency returns matching ids") {
  Fixture fx(8);
  std::vector<std::thread> workers;
  std::atomic<bool> ok{true};
  for (int w = 0; w < 8; ++w) {
    workers.emplace_back([&, w]() {
      MapClient client(fx.address());
      std::mt19937_64 rng(100 + w);
      std::uniform_real_distribution<double> u(-10, 80);
      for (int i = 0; i < 50; ++i) {
        const Vec3d pos(u(rng), u(rng), 0);
        const QueryResult q = client.query(pos);
        const BlockMap bm = client.fetch(q.bm_id);
        if (bm.id != q.bm_id) ok = false;
        if (encode_block_map(bm) != encode_block_map(fx.lib.blocks[q.bm_id])) ok = false;
      }
    });
  }
  for (auto& t : workers) t.join();
  CHECK(ok);
}

TEST_CASE("repeated identical requests yield identical responses") {
  Fixture fx;
  MapClient client(fx.address());
  const Vec3d pos(12.3, 4.5, 0);
  const QueryResult a = client.query(pos);
  for (int i = 0; i < 10; ++i) {
    const QueryResult b = client.query(pos);
    CHECK(b.bm_id == a.bm_id);
    CHECK(b.distance == a.distance);
    CHECK(b.centroid == a.centroid);
  }
}
