#pragma once

#include <cstdint>
#include <random>

namespace gibbs {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; a bijective 64-bit mix.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream seed for a (stream, index) pair under a master seed.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                    std::uint64_t index = 0) {
  return master ^ mix64(mix64(stream) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

enum class LabelCondition : std::uint64_t { True = 0, Random = 1 };

/// Seed of one chain: master ^ hash(rung, condition).
constexpr std::uint64_t chain_seed(std::uint64_t master, std::size_t rung,
                                   LabelCondition condition) {
  return derive_seed(master, 0x636861696eULL + static_cast<std::uint64_t>(condition),
                     rung);
}

}  // namespace gibbs
