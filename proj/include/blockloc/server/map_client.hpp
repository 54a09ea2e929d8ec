#pragma once

#include <blockloc/map/block_map.hpp>
#include <blockloc/server/protocol.hpp>

#include <memory>
#include <mutex>
#include <string>

namespace blockloc {

struct QueryResult {
  uint32_t bm_id = 0;
  Vec3d centroid = Vec3d::Zero();
  double distance = 0.0;
  bool has_second = false;
  uint32_t second_id = 0;
  double second_distance = 0.0;
};

// Abstract retrieval interface so the tracker can run against the TCP
// server or directly against an in-process library.
class MapSource {
 public:
  virtual ~MapSource() = default;
  virtual QueryResult query(const Vec3d& position) = 0;
  virtual BlockMap fetch(uint32_t id) = 0;
};

// TCP client for MapServer. Timeout defaults to 2000 ms, overridable via
// the BLOCKLOC_SERVER_TIMEOUT_MS environment variable or the constructor.
class MapClient : public MapSource {
 public:
  explicit MapClient(const std::string& address, int timeout_ms = -1);
  ~MapClient() override;

  QueryResult query(const Vec3d& position) override;
  BlockMap fetch(uint32_t id) override;

 private:
  void ensure_connected();
  void disconnect();
  Message round_trip(const Message& request);

  std::string host_;
  uint16_t port_ = 0;
  int timeout_ms_ = 2000;
  int fd_ = -1;
  std::mutex mutex_;
};

// In-process source over a loaded MapLibrary; the serial oracle the wire
// path is tested against.
class LocalMapSource : public MapSource {
 public:
  explicit LocalMapSource(const MapLibrary* lib) : lib_(lib) {}
  QueryResult query(const Vec3d& position) override;
  BlockMap fetch(uint32_t id) override;

 private:
  const MapLibrary* lib_;
};

}  // namespace blockloc
