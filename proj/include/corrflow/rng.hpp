#pragma once

// Counter-based randomness: every variate is a pure function of
// (seed, stream, counter), so results do not depend on how work is
// split across loops or batches.

#include <cmath>
#include <cstdint>

namespace corrflow {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform in (0, 1]; never returns 0 so it is safe under log().
inline double counter_uniform(std::uint64_t seed, std::uint64_t stream,
                              std::uint64_t counter) {
  std::uint64_t h = splitmix64(seed ^ splitmix64(stream ^ splitmix64(counter)));
  double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  return u > 0.0 ? u : 0x1.0p-53;
}

// Standard normal via Box-Muller on two decorrelated uniforms.
inline double counter_normal(std::uint64_t seed, std::uint64_t stream,
                             std::uint64_t counter) {
  double u1 = counter_uniform(seed, stream, 2 * counter);
  double u2 = counter_uniform(seed, stream, 2 * counter + 1);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace corrflow
