#ifndef TAMED_RNG_HPP
#define TAMED_RNG_HPP

#include <cstdint>
#include <random>

namespace tamed {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based seed splitting: the seed of stream `counter` depends only on
// (master, counter), never on the order in which streams are consumed.
constexpr std::uint64_t split_seed(std::uint64_t master, std::uint64_t counter) noexcept {
  return mix64(mix64(master) ^ mix64(counter + 0x632be59bd9b4e019ULL));
}

// Two-level variant for (rung, replica) ladders.
constexpr std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream,
                                   std::uint64_t counter) noexcept {
  return split_seed(split_seed(master, stream), counter);
}

}  // namespace tamed

#endif  // TAMED_RNG_HPP
