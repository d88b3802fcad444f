#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace freqchoice::philox {

// Philox-4x32 with 10 rounds: a counter-based generator, so any draw is
// addressable as (seed, stream, index) without sequential state. Streams
// and indices never collide, runs are reproducible across platforms, and
// rows can be evaluated in any order or in parallel without changing draws.

namespace detail {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void round(std::array<std::uint32_t, 4>& x, std::uint32_t k0,
                  std::uint32_t k1) {
  const std::uint64_t p0 = std::uint64_t{kMul0} * x[0];
  const std::uint64_t p1 = std::uint64_t{kMul1} * x[2];
  const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const auto lo0 = static_cast<std::uint32_t>(p0);
  const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const auto lo1 = static_cast<std::uint32_t>(p1);
  x = {hi1 ^ x[1] ^ k0, lo1, hi0 ^ x[3] ^ k1, lo0};
}

}  // namespace detail

// One 128-bit block for counter (stream, index) under the given seed.
inline std::array<std::uint32_t, 4> block(std::uint64_t seed,
                                          std::uint64_t stream,
                                          std::uint64_t index) {
  std::array<std::uint32_t, 4> x = {
      static_cast<std::uint32_t>(stream),
      static_cast<std::uint32_t>(stream >> 32),
      static_cast<std::uint32_t>(index),
      static_cast<std::uint32_t>(index >> 32),
  };
  std::uint32_t k0 = static_cast<std::uint32_t>(seed);
  std::uint32_t k1 = static_cast<std::uint32_t>(seed >> 32);
  for (int r = 0; r < 10; ++r) {
    detail::round(x, k0, k1);
    k0 += detail::kWeyl0;
    k1 += detail::kWeyl1;
  }
  return x;
}

// Two independent 64-bit words from one block.
inline std::pair<std::uint64_t, std::uint64_t> words(std::uint64_t seed,
                                                     std::uint64_t stream,
                                                     std::uint64_t index) {
  const auto b = block(seed, stream, index);
  return {(std::uint64_t{b[0]} << 32) | b[1],
          (std::uint64_t{b[2]} << 32) | b[3]};
}

// Uniform on [0, 1) with 53 random bits.
inline double to_unit(std::uint64_t w) {
  return static_cast<double>(w >> 11) * 0x1.0p-53;
}

inline double uniform(std::uint64_t seed, std::uint64_t stream,
                      std::uint64_t index) {
  return to_unit(words(seed, stream, index).first);
}

// Standard normal via Box-Muller; one draw per block, u1 shifted into
// (0, 1] so the log never sees zero.
inline double normal(std::uint64_t seed, std::uint64_t stream,
                     std::uint64_t index) {
  const auto [w1, w2] = words(seed, stream, index);
  const double u1 = static_cast<double>((w1 >> 11) + 1) * 0x1.0p-53;
  const double u2 = to_unit(w2);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace freqchoice::philox
