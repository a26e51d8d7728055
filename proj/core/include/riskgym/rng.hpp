#ifndef RISKGYM_RNG_HPP_
#define RISKGYM_RNG_HPP_

#include <cstdint>
#include <random>

namespace riskgym {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent per-index seeds so that
/// parallel generation is independent of the worker count.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline Rng derived_rng(std::uint64_t seed, std::uint64_t index) {
  return Rng(splitmix64(seed ^ splitmix64(index)));
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double gaussian(Rng& rng, double mean, double sd) {
  return std::normal_distribution<double>(mean, sd)(rng);
}

}  // namespace riskgym

#endif  // RISKGYM_RNG_HPP_
