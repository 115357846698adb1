#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace smclimits {

/// All randomness flows through explicitly passed engines of this type.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30U)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27U)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31U);
}

/// Seed for the stream identified by (master, ids...). Order of ids matters.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> ids) noexcept {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t id : ids) {
    h = splitmix64(h ^ splitmix64(id + 0x632be59bd9b4e019ULL));
  }
  return h;
}

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> ids = {}) {
  return Rng{derive_seed(master, ids)};
}

/// Uniform on [0, 1) with 53 random bits. Stable across standard libraries.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11U) * 0x1.0p-53;
}

/// Standard normal draw (Box-Muller on uniform01, so the mapping is library independent).
inline double standard_normal(Rng& rng) {
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  double u1 = uniform01(rng);
  while (u1 <= 0.0) {
    u1 = uniform01(rng);
  }
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

}  // namespace smclimits
