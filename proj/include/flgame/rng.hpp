#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

// Counter-based randomness: every draw is a pure function of a key sequence
// (seed, stream, indices...). Draws therefore never depend on call order or
// on how work is split across threads.

namespace flgame::rng {

// Stream tags keep independent uses of the same seed from colliding.
enum class Stream : std::uint64_t {
  contribution = 0x101,
  action = 0x202,
  episode = 0x303,
  eval_episode = 0x404,
  shuffle = 0x505,
  price = 0x606,
  init = 0x707,
  scenario = 0x808,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix(std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k));
  return h;
}

// Uniform in the open interval (0, 1).
inline double to_unit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

inline double uniform(std::initializer_list<std::uint64_t> keys) {
  return to_unit(mix(keys));
}

inline double uniform_range(double lo, double hi, std::initializer_list<std::uint64_t> keys) {
  return lo + (hi - lo) * uniform(keys);
}

// Standard normal via Box-Muller on two derived uniforms.
inline double normal(std::initializer_list<std::uint64_t> keys) {
  const std::uint64_t h = mix(keys);
  const double u1 = to_unit(h);
  const double u2 = to_unit(splitmix64(h ^ 0xd1b54a32d192ed03ULL));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline double normal(double mean, double stddev, std::initializer_list<std::uint64_t> keys) {
  return mean + stddev * normal(keys);
}

}  // namespace flgame::rng
