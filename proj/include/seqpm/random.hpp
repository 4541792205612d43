#pragma once

#include <cstdint>

namespace seqpm {

// Counter-based streams: every draw is a pure function of (seed, stream, counter),
// so sequences never depend on evaluation order or worker count.

constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derive an independent 64-bit key for (seed, stream).
constexpr std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) noexcept {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t counter_bits(std::uint64_t key, std::uint64_t counter) noexcept {
  return splitmix64(key ^ splitmix64(counter));
}

/// Uniform double in [0, 1) with 53 random bits.
constexpr double counter_uniform(std::uint64_t key, std::uint64_t counter) noexcept {
  return static_cast<double>(counter_bits(key, counter) >> 11) * 0x1.0p-53;
}

}  // namespace seqpm
