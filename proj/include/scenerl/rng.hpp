#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace scenerl {

inline constexpr std::uint64_t kFnvOffsetBasis = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t seed = kFnvOffsetBasis) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= static_cast<std::uint64_t>(c);
    h *= kFnvPrime;
  }
  return h;
}

// All randomness in a run flows from one master seed; each consumer draws
// from a named sub-stream so components can be re-seeded independently.
inline std::uint64_t substream_seed(std::uint64_t masterSeed,
                                    std::string_view name) {
  std::uint64_t h = fnv1a64(name);
  h ^= masterSeed + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

inline std::mt19937_64 make_rng(std::uint64_t masterSeed,
                                std::string_view stream) {
  return std::mt19937_64(substream_seed(masterSeed, stream));
}

// Uniform double in [0,1) derived from the top 53 bits of the generator
// output; avoids distribution objects so sequences are platform-stable.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n).
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) %
         n;
}

inline double uniform_range(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

}  // namespace scenerl
