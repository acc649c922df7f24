#pragma once

#include <cstdint>
#include <random>

#include "fastkm/vec.hpp"

namespace fastkm {

/// splitmix64 finalizer; used to fold stream tags and counters into a seed.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derive an independent stream seed from a master seed, a stream tag and
/// up to two counters. Adding or removing consumers of one stream never
/// perturbs another.
inline std::uint64_t split_seed(std::uint64_t master, std::uint64_t tag,
                                std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = mix64(master);
  h = mix64(h ^ tag);
  h = mix64(h ^ a);
  h = mix64(h ^ b);
  return h;
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline Vector sample_standard_normal(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector out(dim);
  for (auto& v : out) v = normal(rng);
  return out;
}

}  // namespace fastkm
