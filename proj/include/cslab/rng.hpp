#pragma once

#include <cstdint>
#include <random>

namespace cslab {

// splitmix64 finalizer; used to derive independent RNG streams from
// (seed, nonce) pairs so every defended query gets fresh but
// reproducible noise.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  return mix64(mix64(a) ^ b);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix64(mix64(a, b) ^ c);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
  return std::mt19937_64(mix64(seed));
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t nonce) {
  return std::mt19937_64(mix64(seed, nonce));
}

}  // namespace cslab
