#include <blockloc/core/error.hpp>
#include <blockloc/server/map_server.hpp>
#include <blockloc/server/protocol.hpp>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstdio>
#include <cstring>
#include <filesystem>

namespace blockloc {
namespace {

bool read_exact(int fd, uint8_t* buf, size_t n) {
  size_t got = 0;
  while (got < n) {
    const ssize_t r = ::read(fd, buf + got, n - got);
    if (r <= 0) return false;
    got += static_cast<size_t>(r);
  }
  return true;
}

bool write_all(int fd, const uint8_t* buf, size_t n) {
  size_t sent = 0;
  while (sent < n) {
    const ssize_t r = ::write(fd, buf + sent, n - sent);
    if (r <= 0) return false;
    sent += static_cast<size_t>(r);
  }
  return true;
}

bool send_message(int fd, const Message& msg) {
  const Bytes frame = encode_frame(msg);
  return write_all(fd, frame.data(), frame.size());
}

}  // namespace

MapServer::MapServer(std::string library_dir, size_t cache_capacity)
    : dir_(std::move(library_dir)), cache_capacity_(cache_capacity) {
  namespace fs = std::filesystem;
  index_ = read_library_index((fs::path(dir_) / "library.idx").string());
  std::vector<Vec3d> centroids;
  centroids.reserve(index_.size());
  for (const auto& e : index_) centroids.push_back(e.centroid);
  centroid_tree_ = KdTree3(std::move(centroids));
}

MapServer::~MapServer() { stop(); }

void MapServer::start(const std::string& host, uint16_t port) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw IoError("socket() failed");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    throw IoError("bad bind address: " + host);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw IoError("bind() failed on " + host + ":" + std::to_string(port));
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  if (::listen(listen_fd_, 64) != 0) throw IoError("listen() failed");

  running_ = true;
  accept_thread_ = std::thread([this] { accept_loop(); });
}

void MapServer::stop() {
  if (!running_.exchange(false)) return;
  if (listen_fd_ >= 0) {
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
  if (accept_thread_.joinable()) accept_thread_.join();
  std::lock_guard<std::mutex> lock(conn_mutex_);
  for (auto& t : connections_) {
    if (t.joinable()) t.join();
  }
  connections_.clear();
}

void MapServer::serve_forever(const std::string& host, uint16_t port) {
  start(host, port);
  while (running_) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  stop();
}

void MapServer::accept_loop() {
  while (running_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (!running_) break;
      continue;
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    std::lock_guard<std::mutex> lock(conn_mutex_);
    connections_.emplace_back([this, fd] { handle_connection(fd); });
  }
}

Bytes MapServer::block_payload(uint32_t id) {
  {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    auto it = cache_.find(id);
    if (it != cache_.end()) {
      cache_order_.remove(id);
      cache_order_.push_front(id);
      return it->second;
    }
  }
  const LibraryIndexEntry* entry = nullptr;
  for (const auto& e : index_) {
    if (e.id == id) {
      entry = &e;
      break;
    }
  }
  if (entry == nullptr) throw NotFound("no block with id " + std::to_string(id));
  Bytes payload = read_file((std::filesystem::path(dir_) / entry->filename).string());

  std::lock_guard<std::mutex> lock(cache_mutex_);
  cache_order_.push_front(id);
  cache_[id] = payload;
  while (cache_order_.size() > cache_capacity_) {
    cache_.erase(cache_order_.back());
    cache_order_.pop_back();
  }
  return payload;
}

void MapServer::handle_connection(int fd) {
  while (running_) {
    uint8_t len_buf[4];
    if (!read_exact(fd, len_buf, 4)) break;
    uint32_t length;
    std::memcpy(&length, len_buf, 4);
    if (length == 0 || length > kMaxFrameLength) {
      send_message(fd, ErrorMsg{WireError::kBadRequest, "bad frame length"});
      break;
    }
    Bytes body(length);
    if (!read_exact(fd, body.data(), length)) break;

    Message request;
    try {
      request = decode_frame_body(body.data(), body.size());
    } catch (const ProtocolError& e) {
      if (!quiet) std::fprintf(stderr, "[map_server] malformed frame: %s\n", e.what());
      if (!send_message(fd, ErrorMsg{WireError::kBadRequest, e.what()})) break;
      continue;  // connection stays open
    }

    bool ok = true;
    if (const auto* q = std::get_if<QueryMsg>(&request)) {
      if (index_.empty()) {
        ok = send_message(fd, ErrorMsg{WireError::kEmptyLibrary, "library is empty"});
      } else {
        const auto nn = centroid_tree_.knn(q->position, 2);
        MetaMsg meta;
        meta.id = index_[nn[0].first].id;
        meta.centroid = index_[nn[0].first].centroid;
        meta.distance = std::sqrt(nn[0].second);
        if (nn.size() > 1) {
          meta.second_id = index_[nn[1].first].id;
          meta.second_distance = std::sqrt(nn[1].second);
        }
        if (!quiet)
          std::fprintf(stderr, "[map_server] QUERY (%.2f %.2f %.2f) -> bm %u d=%.2f\n",
                       q->position.x(), q->position.y(), q->position.z(), meta.id,
                       meta.distance);
        ok = send_message(fd, meta);
      }
    } else if (const auto* f = std::get_if<FetchMsg>(&request)) {
      try {
        Bytes payload = block_payload(f->id);
        if (!quiet)
          std::fprintf(stderr, "[map_server] FETCH %u -> %zu bytes\n", f->id,
                       payload.size());
        ok = send_message(fd, BlobMsg{std::move(payload)});
      } catch (const NotFound& e) {
        if (!quiet) std::fprintf(stderr, "[map_server] FETCH %u -> NOT_FOUND\n", f->id);
        ok = send_message(fd, ErrorMsg{WireError::kNotFound, e.what()});
      }
    } else {
      ok = send_message(fd, ErrorMsg{WireError::kBadRequest, "unexpected message type"});
    }
    if (!ok) break;
  }
  ::close(fd);
}

}  // namespace blockloc
