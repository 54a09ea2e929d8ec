#include <blockloc/core/error.hpp>
#include <blockloc/server/protocol.hpp>

#include <cstring>

namespace blockloc {
namespace {

template <typename T>
void put(Bytes& out, const T& v) {
  const size_t n = out.size();
  out.resize(n + sizeof(T));
  std::memcpy(out.data() + n, &v, sizeof(T));
}

template <typename T>
T take(const uint8_t*& p, const uint8_t* end) {
  if (p + sizeof(T) > end) throw ProtocolError("truncated frame");
  T v;
  std::memcpy(&v, p, sizeof(T));
  p += sizeof(T);
  return v;
}

}  // namespace

Bytes encode_frame(const Message& msg) {
  Bytes body;
  std::visit(
      [&body](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, QueryMsg>) {
          body.push_back(static_cast<uint8_t>(MsgType::kQuery));
          put<double>(body, m.position.x());
          put<double>(body, m.position.y());
          put<double>(body, m.position.z());
        } else if constexpr (std::is_same_v<T, FetchMsg>) {
          body.push_back(static_cast<uint8_t>(MsgType::kFetch));
          put<uint32_t>(body, m.id);
        } else if constexpr (std::is_same_v<T, MetaMsg>) {
          body.push_back(static_cast<uint8_t>(MsgType::kResponseMeta));
          put<uint32_t>(body, m.id);
          put<double>(body, m.centroid.x());
          put<double>(body, m.centroid.y());
          put<double>(body, m.centroid.z());
          put<double>(body, m.distance);
          put<uint32_t>(body, m.second_id);
          put<double>(body, m.second_distance);
        } else if constexpr (std::is_same_v<T, BlobMsg>) {
          body.push_back(static_cast<uint8_t>(MsgType::kResponseBlob));
          body.insert(body.end(), m.payload.begin(), m.payload.end());
        } else {
          body.push_back(static_cast<uint8_t>(MsgType::kError));
          body.push_back(static_cast<uint8_t>(m.code));
          body.insert(body.end(), m.message.begin(), m.message.end());
        }
      },
      msg);

  Bytes frame;
  frame.reserve(4 + body.size());
  put<uint32_t>(frame, static_cast<uint32_t>(body.size()));
  frame.insert(frame.end(), body.begin(), body.end());
  return frame;
}

Message decode_frame_body(const uint8_t* data, size_t size) {
  const uint8_t* p = data;
  const uint8_t* end = data + size;
  const auto type = take<uint8_t>(p, end);
  switch (static_cast<MsgType>(type)) {
    case MsgType::kQuery: {
      QueryMsg m;
      m.position.x() = take<double>(p, end);
      m.position.y() = take<double>(p, end);
      m.position.z() = take<double>(p, end);
      if (p != end) throw ProtocolError("trailing bytes in QUERY");
      return m;
    }
    case MsgType::kFetch: {
      FetchMsg m;
      m.id = take<uint32_t>(p, end);
      if (p != end) throw ProtocolError("trailing bytes in FETCH");
      return m;
    }
    case MsgType::kResponseMeta: {
      MetaMsg m;
      m.id = take<uint32_t>(p, end);
      m.centroid.x() = take<double>(p, end);
      m.centroid.y() = take<double>(p, end);
      m.centroid.z() = take<double>(p, end);
      m.distance = take<double>(p, end);
      m.second_id = take<uint32_t>(p, end);
      m.second_distance = take<double>(p, end);
      if (p != end) throw ProtocolError("trailing bytes in META");
      return m;
    }
    case MsgType::kResponseBlob: {
      BlobMsg m;
      m.payload.assign(p, end);
      return m;
    }
    case MsgType::kError: {
      ErrorMsg m;
      m.code = static_cast<WireError>(take<uint8_t>(p, end));
      m.message.assign(reinterpret_cast<const char*>(p), static_cast<size_t>(end - p));
      return m;
    }
    default:
      throw ProtocolError("unknown message type " + std::to_string(type));
  }
}

}  // namespace blockloc
