#pragma once

#include <cstdint>
#include <random>

namespace linphot {

/// Per-worker random stream. Every consumer owns its own instance.
using RngStream = std::mt19937_64;

/// SplitMix64 finalizer; used to decorrelate (seed, stream) pairs.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Child seed for an independent sub-experiment (an eta point, a gain factor).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_id) noexcept {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream_id + 0x632BE59BD9B4E019ULL));
}

/// Independent stream for worker `stream_id` of a run seeded with `seed`.
inline RngStream make_stream(std::uint64_t seed, std::uint64_t stream_id) {
  const std::uint64_t a = derive_seed(seed, stream_id);
  const std::uint64_t b = splitmix64(a);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return RngStream(seq);
}

/// Uniform double in [0, 1).
inline double uniform01(RngStream& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace linphot
