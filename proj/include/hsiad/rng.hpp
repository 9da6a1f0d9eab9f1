#ifndef HSIAD_RNG_HPP
#define HSIAD_RNG_HPP

#include <cstdint>
#include <initializer_list>
#include <random>

namespace hsiad {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Independent stream seed for (seed, tag0, tag1, ...), e.g. (seed, epoch, item).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = mix64(seed);
  for (auto t : tags) s = mix64(s ^ mix64(t + 0x632BE59BD9B4E019ull));
  return s;
}

inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags = {}) {
  return Rng(derive_seed(seed, tags));
}

// Stream tags for the top-level seed derivation.
enum class Stream : std::uint64_t {
  Init = 1,
  Shuffle = 2,
  Item = 3,
  Synth = 4,
  Library = 5,
  MaskPreview = 6,
};

constexpr std::uint64_t tag(Stream s) { return static_cast<std::uint64_t>(s); }

}  // namespace hsiad

#endif  // HSIAD_RNG_HPP
