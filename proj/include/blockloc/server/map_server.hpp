#pragma once

#include <blockloc/map/block_map.hpp>
#include <blockloc/map/formats.hpp>

#include <atomic>
#include <list>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

namespace blockloc {

// Serves a block-map library over the wire protocol. The library is
// read-only; block payloads are loaded lazily and kept in a small
// most-recently-fetched cache, mirroring a memory-bounded deployment.
class MapServer {
 public:
  MapServer(std::string library_dir, size_t cache_capacity = 8);
  ~MapServer();

  // Binds and starts the accept loop. port 0 picks an ephemeral port.
  void start(const std::string& host, uint16_t port);
  void stop();

  // Runs until stop() is called from another thread (or a signal handler).
  void serve_forever(const std::string& host, uint16_t port);

  uint16_t port() const { return port_; }
  bool quiet = false;

 private:
  void accept_loop();
  void handle_connection(int fd);
  Bytes block_payload(uint32_t id);

  std::string dir_;
  std::vector<LibraryIndexEntry> index_;
  KdTree3 centroid_tree_;

  size_t cache_capacity_;
  std::mutex cache_mutex_;
  std::list<uint32_t> cache_order_;  // most recent first
  std::unordered_map<uint32_t, Bytes> cache_;

  int listen_fd_ = -1;
  uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;
  std::mutex conn_mutex_;
  std::vector<std::thread> connections_;
};

}  // namespace blockloc
