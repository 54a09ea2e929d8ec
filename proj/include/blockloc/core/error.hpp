#pragma once

#include <stdexcept>
#include <string>

namespace blockloc {

// Base class for every recoverable error the library reports.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define BLOCKLOC_ERROR_TYPE(Name)                       \
  struct Name : Error {                                 \
    Name() : Error(#Name) {}                            \
    explicit Name(const std::string& m) : Error(m) {}   \
  }

// geometry
BLOCKLOC_ERROR_TYPE(NearPiRotation);
BLOCKLOC_ERROR_TYPE(InvalidAlpha);

// map building / library
BLOCKLOC_ERROR_TYPE(NoInput);
BLOCKLOC_ERROR_TYPE(PoseGap);
BLOCKLOC_ERROR_TYPE(NoBlocks);

// server / client
BLOCKLOC_ERROR_TYPE(ServerUnavailable);
BLOCKLOC_ERROR_TYPE(NotFound);
BLOCKLOC_ERROR_TYPE(EmptyLibrary);
BLOCKLOC_ERROR_TYPE(ProtocolError);

// global initialization
BLOCKLOC_ERROR_TYPE(EmptySlice);
BLOCKLOC_ERROR_TYPE(NoInitialPose);

// imu
BLOCKLOC_ERROR_TYPE(BadImuStream);

// tracking / optimization
BLOCKLOC_ERROR_TYPE(Underconstrained);
BLOCKLOC_ERROR_TYPE(DegenerateMarginalization);

// evaluation
BLOCKLOC_ERROR_TYPE(InsufficientOverlap);

// simulation
BLOCKLOC_ERROR_TYPE(OutOfWorld);

// io / config
BLOCKLOC_ERROR_TYPE(IoError);
BLOCKLOC_ERROR_TYPE(ConfigError);

#undef BLOCKLOC_ERROR_TYPE

}  // namespace blockloc
