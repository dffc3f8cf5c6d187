#pragma once

#include <cmath>
#include <cstdint>

#include "nrc/common.hpp"

// Counter-based random number generation: every value is a pure function
// of (seed, index), so states can be generated in any order on any thread
// with identical results.
//
// Bit-exact layout: word(seed, i) = splitmix64(splitmix64(seed) ^ mix(i)),
// uniform doubles take the top 53 bits, and site j of a Gaussian state
// consumes words 2j and 2j+1 through the Box-Muller transform.

namespace nrc {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Order-sensitive combination of two 64-bit keys.
inline std::uint64_t seed_combine(std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(a) ^ (b + 0x9E3779B97F4A7C15ULL));
}

inline std::uint64_t counter_word(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index));
}

// Uniform in (0, 1]: never returns 0, so it is safe inside log().
inline double uniform_open(std::uint64_t word) {
  return (static_cast<double>(word >> 11) + 1.0) * 0x1.0p-53;
}

// Standard complex normal: Re and Im are independent N(0, 1).
inline complexd standard_complex_normal(std::uint64_t seed, std::uint64_t index) {
  double u1 = uniform_open(counter_word(seed, 2 * index));
  double u2 = uniform_open(counter_word(seed, 2 * index + 1));
  double r = std::sqrt(-2.0 * std::log(u1));
  return {r * std::cos(kTwoPi * u2), r * std::sin(kTwoPi * u2)};
}

} // namespace nrc
