#pragma once

#include <cstdint>
#include <random>

namespace pixelmpc {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for a named sub-stream of a master seed.
constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream) {
  return mix_seed(master ^ mix_seed(stream + 0x5851f42d4c957f2dULL));
}

/// Per-lap seed: master XOR a hash of the lap index, so lap k of two experiments pairs up.
constexpr std::uint64_t lap_seed(std::uint64_t master, std::uint64_t lap) {
  return master ^ mix_seed(lap);
}

enum class Stream : std::uint64_t {
  Planner = 1,
  Plant = 2,
  Detector = 3,
  Imu = 4,
  Filter = 5,
  PixelSampler = 6,
  Shuffle = 7,
  Dropout = 8,
  Init = 9,
};

/// Uniform double in [0, 1) from the top 53 bits of one draw.
inline double unit_uniform(Rng& rng) { return double(rng() >> 11) * 0x1.0p-53; }

inline Rng make_rng(std::uint64_t master, Stream s) {
  return Rng(stream_seed(master, static_cast<std::uint64_t>(s)));
}

}  // namespace pixelmpc
