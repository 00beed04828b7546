#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fedcpu {

using Rng = std::mt19937_64;

/// Purpose tags for the hierarchical seed tree (global -> round -> device -> purpose).
enum class Stream : std::uint64_t {
  kDataset = 1,
  kPartition = 2,
  kModelInit = 3,
  kLocalSgd = 4,
  kDither = 5,
  kChannel = 6,
  kNoise = 7,
  kLatticeMoment = 8,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Folds a path of identifiers into one 64-bit seed. Order matters.
inline std::uint64_t derive_seed(std::uint64_t base,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(base);
  for (std::uint64_t p : path) h = splitmix64(h ^ splitmix64(p + 0x632BE59BD9B4E019ULL));
  return h;
}

/// Seed for a (round, device, purpose) leaf. Use device = -1 for server-side draws.
inline std::uint64_t stream_seed(std::uint64_t global, int round, int device,
                                 Stream purpose) {
  return derive_seed(global, {static_cast<std::uint64_t>(static_cast<std::int64_t>(round)),
                              static_cast<std::uint64_t>(static_cast<std::int64_t>(device)),
                              static_cast<std::uint64_t>(purpose)});
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

/// Uniform double in [0, 1) from the top 53 bits of one draw.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace fedcpu
