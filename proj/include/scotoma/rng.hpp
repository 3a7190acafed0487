#pragma once

#include <cstdint>
#include <random>

namespace scotoma {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Counter-based stream splitting: every (seed, stream, substream) triple gets
// an independent generator, so replicate k draws the same numbers whether
// replicates run serially or on a thread pool.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                    std::uint64_t substream = 0) {
  return mix64(mix64(mix64(seed) ^ stream) ^ (substream * 0xD1B54A32D192ED03ULL));
}

inline Rng make_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0) {
  const std::uint64_t s = derive_seed(seed, stream, substream);
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(substream)};
  return Rng(seq);
}

}  // namespace scotoma
