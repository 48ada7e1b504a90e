#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "rfim/lattice.hpp"

namespace rfim {

namespace detail {

/// 64-bit finalizer with full avalanche (splitmix64 style).
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

inline std::uint64_t pack_xy(std::int32_t x, std::int32_t y) {
  return (std::uint64_t(std::uint32_t(x)) << 32) | std::uint64_t(std::uint32_t(y));
}

}  // namespace detail

/// Counter-based keyed generator: one 64-bit word per (seed, stream, x, y, lane)
/// key, with no sequential state. Equal keys give equal words, always.
inline std::uint64_t keyed_bits(std::uint64_t master_seed, std::uint64_t stream, std::int32_t x,
                                std::int32_t y, std::uint64_t lane) {
  std::uint64_t h = detail::mix64(master_seed ^ 0x9e3779b97f4a7c15ULL);
  h = detail::mix64(h ^ stream);
  h = detail::mix64(h ^ detail::pack_xy(x, y));
  h = detail::mix64(h ^ (lane * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
  return h;
}

/// Uniform double in the half-open interval [0,1).
inline double keyed_unit(std::uint64_t master_seed, std::uint64_t stream, std::int32_t x,
                         std::int32_t y, std::uint64_t lane) {
  return double(keyed_bits(master_seed, stream, x, y, lane) >> 11) * 0x1.0p-53;
}

/// Uniform double in (0,1]; safe as a log() argument.
inline double keyed_unit_positive(std::uint64_t master_seed, std::uint64_t stream, std::int32_t x,
                                  std::int32_t y, std::uint64_t lane) {
  return double((keyed_bits(master_seed, stream, x, y, lane) >> 11) + 1) * 0x1.0p-53;
}

/// Standard normal keyed by (seed, stream, vertex). Box-Muller on two keyed
/// uniforms; the companion sine variate is discarded so each vertex consumes
/// a fixed two words regardless of context.
inline double keyed_gaussian(std::uint64_t master_seed, std::uint64_t stream, const Vertex& v) {
  const double u1 = keyed_unit_positive(master_seed, stream, v.x, v.y, 0);
  const double u2 = keyed_unit(master_seed, stream, v.x, v.y, 1);
  const double r = std::sqrt(-2.0 * std::log(u1));
  return r * std::cos(2.0 * std::numbers::pi * u2);
}

/// Lanes >= 2 are reserved for auxiliary per-vertex draws (nonnegative shift
/// maps, bootstrap resampling) so they never collide with the field stream.
inline constexpr std::uint64_t kAuxLaneShift = 2;
inline constexpr std::uint64_t kAuxLaneBootstrap = 3;

}  // namespace rfim
