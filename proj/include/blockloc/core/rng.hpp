#pragma once

#include <cmath>
#include <cstdint>

namespace blockloc {

// Counter-based pseudo-random numbers: every draw is a pure function of
// (seed, counter), so datasets are bit-identical across runs and platforms.

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) {
  return splitmix64(a ^ (splitmix64(b) + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

// Uniform in (0, 1]; never returns 0 so it is safe inside log().
inline double counter_uniform(uint64_t seed, uint64_t counter) {
  const uint64_t bits = splitmix64(hash_combine(seed, counter));
  return (static_cast<double>(bits >> 11) + 1.0) * (1.0 / 9007199254740992.0);
}

// Standard normal via Box-Muller on two decorrelated counters.
inline double counter_gaussian(uint64_t seed, uint64_t counter) {
  const double u1 = counter_uniform(seed, counter * 2 + 0);
  const double u2 = counter_uniform(seed, counter * 2 + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace blockloc
