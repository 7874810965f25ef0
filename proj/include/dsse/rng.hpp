#pragma once

#include <cstdint>
#include <random>

namespace dsse {

using Rng = std::mt19937_64;

/// Purpose tags keep the draws of independent pipeline stages apart.
enum class StreamTag : std::uint32_t {
  dispatch = 1,
  noise = 2,
  selection = 3,
};

/// Independent stream keyed by (master seed, index, purpose).
inline Rng make_stream(std::uint64_t master_seed, std::uint64_t index, StreamTag tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    static_cast<std::uint32_t>(tag)};
  return Rng(seq);
}

/// Sub-seed derived from a seed and a counter (used for resampling).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t counter) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(counter), static_cast<std::uint32_t>(counter >> 32)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

/// Uniform double in [lo, hi) from the top 53 bits of one draw.
inline double uniform(Rng& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

/// Index in [0, n). Modulo bias is below n / 2^64.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  return rng() % n;
}

}  // namespace dsse
