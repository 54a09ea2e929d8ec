#pragma once

#include <blockloc/core/types.hpp>
#include <blockloc/map/formats.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

namespace blockloc {

// Length-prefixed binary frames over a byte stream:
//   u32 length (bytes after this field), u8 msg_type, payload.
// QUERY  payload: 3 * f64 position
// FETCH  payload: u32 block id
// META   payload: u32 id, f64[3] centroid, f64 distance,
//                 u32 second id (0xFFFFFFFF if none), f64 second distance
// BLOB   payload: serialized .bmap bytes
// ERROR  payload: u8 code, UTF-8 message
enum class MsgType : uint8_t {
  kQuery = 1,
  kFetch = 2,
  kResponseMeta = 3,
  kResponseBlob = 4,
  kError = 15,
};

enum class WireError : uint8_t {
  kBadRequest = 1,
  kNotFound = 2,
  kEmptyLibrary = 3,
  kInternal = 4,
};

struct QueryMsg {
  Vec3d position = Vec3d::Zero();
};

struct FetchMsg {
  uint32_t id = 0;
};

struct MetaMsg {
  uint32_t id = 0;
  Vec3d centroid = Vec3d::Zero();
  double distance = 0.0;
  uint32_t second_id = kNoSecond;
  double second_distance = 0.0;

  static constexpr uint32_t kNoSecond = 0xFFFFFFFFu;
};

struct BlobMsg {
  Bytes payload;
};

struct ErrorMsg {
  WireError code = WireError::kInternal;
  std::string message;
};

using Message = std::variant<QueryMsg, FetchMsg, MetaMsg, BlobMsg, ErrorMsg>;

// Full frame including the length prefix.
Bytes encode_frame(const Message& msg);

// Decodes the body of a frame (msg_type + payload, the length prefix already
// consumed). Throws ProtocolError on malformed input.
Message decode_frame_body(const uint8_t* data, size_t size);

inline constexpr uint32_t kMaxFrameLength = 1u << 28;

}  // namespace blockloc
