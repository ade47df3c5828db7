#pragma once

#include <cstdint>
#include <random>

namespace ttde {

/// One step of the splitmix64 mixer; used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for stream `index` of a run seeded with `seed`. Streams for different
/// indices are unrelated, so row i can be generated without rows 0..i-1.
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed, std::uint64_t index = 0) {
  return Engine(stream_seed(seed, index));
}

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double uniform01(Engine& e) {
  return static_cast<double>(e() >> 11) * 0x1.0p-53;
}

}  // namespace ttde
