#include <blockloc/core/error.hpp>
#include <blockloc/server/map_client.hpp>

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>

namespace blockloc {
namespace {

int env_timeout_ms() {
  const char* v = std::getenv("BLOCKLOC_SERVER_TIMEOUT_MS");
  if (v == nullptr) return 2000;
  const int t = std::atoi(v);
  return t > 0 ? t : 2000;
}

bool io_exact(int fd, uint8_t* buf, size_t n, bool reading, int timeout_ms) {
  size_t done = 0;
  while (done < n) {
    pollfd pfd{fd, static_cast<short>(reading ? POLLIN : POLLOUT), 0};
    const int pr = ::poll(&pfd, 1, timeout_ms);
    if (pr <= 0) return false;  // timeout or error
    const ssize_t r = reading ? ::read(fd, buf + done, n - done)
                              : ::write(fd, buf + done, n - done);
    if (r <= 0) return false;
    done += static_cast<size_t>(r);
  }
  return true;
}

}  // namespace

MapClient::MapClient(const std::string& address, int timeout_ms)
    : timeout_ms_(timeout_ms > 0 ? timeout_ms : env_timeout_ms()) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) {
    throw ConfigError("server address must be host:port, got: " + address);
  }
  host_ = address.substr(0, colon);
  port_ = static_cast<uint16_t>(std::atoi(address.c_str() + colon + 1));
}

MapClient::~MapClient() { disconnect(); }

void MapClient::disconnect() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void MapClient::ensure_connected() {
  if (fd_ >= 0) return;
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw ServerUnavailable("socket() failed");

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port_);
  if (::inet_pton(AF_INET, host_.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    throw ServerUnavailable("bad server address: " + host_);
  }

  // Non-blocking connect bounded by the configured timeout.
  const int flags = ::fcntl(fd, F_GETFL, 0);
  ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
  const int rc = ::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
  if (rc != 0 && errno == EINPROGRESS) {
    pollfd pfd{fd, POLLOUT, 0};
    if (::poll(&pfd, 1, timeout_ms_) <= 0) {
      ::close(fd);
      throw ServerUnavailable("connect timeout");
    }
    int err = 0;
    socklen_t len = sizeof(err);
    ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) {
      ::close(fd);
      throw ServerUnavailable("connect failed: " + std::string(std::strerror(err)));
    }
  } else if (rc != 0) {
    ::close(fd);
    throw ServerUnavailable("connect failed: " + std::string(std::strerror(errno)));
  }
  ::fcntl(fd, F_SETFL, flags);
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  fd_ = fd;
}

Message MapClient::round_trip(const Message& request) {
  std::lock_guard<std::mutex> lock(mutex_);
  ensure_connected();
  const Bytes frame = encode_frame(request);
  if (!io_exact(fd_, const_cast<uint8_t*>(frame.data()), frame.size(), false, timeout_ms_)) {
    disconnect();
    throw ServerUnavailable("send timed out");
  }
  uint8_t len_buf[4];
  if (!io_exact(fd_, len_buf, 4, true, timeout_ms_)) {
    disconnect();
    throw ServerUnavailable("receive timed out");
  }
  uint32_t length;
  std::memcpy(&length, len_buf, 4);
  if (length == 0 || length > kMaxFrameLength) {
    disconnect();
    throw ProtocolError("bad response frame length");
  }
  Bytes body(length);
  if (!io_exact(fd_, body.data(), length, true, timeout_ms_)) {
    disconnect();
    throw ServerUnavailable("receive timed out");
  }
  return decode_frame_body(body.data(), body.size());
}

QueryResult MapClient::query(const Vec3d& position) {
  const Message reply = round_trip(QueryMsg{position});
  if (const auto* meta = std::get_if<MetaMsg>(&reply)) {
    QueryResult out;
    out.bm_id = meta->id;
    out.centroid = meta->centroid;
    out.distance = meta->distance;
    if (meta->second_id != MetaMsg::kNoSecond) {
      out.has_second = true;
      out.second_id = meta->second_id;
      out.second_distance = meta->second_distance;
    }
    return out;
  }
  if (const auto* err = std::get_if<ErrorMsg>(&reply)) {
    if (err->code == WireError::kEmptyLibrary) throw EmptyLibrary(err->message);
    throw ProtocolError("server error: " + err->message);
  }
  throw ProtocolError("unexpected reply to QUERY");
}

BlockMap MapClient::fetch(uint32_t id) {
  const Message reply = round_trip(FetchMsg{id});
  if (const auto* blob = std::get_if<BlobMsg>(&reply)) {
    return decode_block_map(blob->payload);
  }
  if (const auto* err = std::get_if<ErrorMsg>(&reply)) {
    if (err->code == WireError::kNotFound) throw NotFound(err->message);
    throw ProtocolError("server error: " + err->message);
  }
  throw ProtocolError("unexpected reply to FETCH");
}

QueryResult LocalMapSource::query(const Vec3d& position) {
  if (lib_->blocks.empty()) throw EmptyLibrary();
  const auto nn = lib_->nearest_blocks(position, 2);
  QueryResult out;
  out.bm_id = nn[0].first;
  out.distance = nn[0].second;
  for (const auto& b : lib_->blocks) {
    if (b.id == out.bm_id) out.centroid = b.centroid;
  }
  if (nn.size() > 1) {
    out.has_second = true;
    out.second_id = nn[1].first;
    out.second_distance = nn[1].second;
  }
  return out;
}

BlockMap LocalMapSource::fetch(uint32_t id) {
  for (const auto& b : lib_->blocks) {
    if (b.id == id) return b;
  }
  throw NotFound("no block with id " + std::to_string(id));
}

}  // namespace blockloc
