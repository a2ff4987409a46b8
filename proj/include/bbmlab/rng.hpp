// Copyright 2026 The bbmlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

#include "bbmlab/errors.hpp"

namespace bbmlab {

/// Philox4x32-10 block function (Salmon et al., SC'11).
/// Maps a 128-bit counter and a 64-bit key to 128 pseudo-random bits.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter apply(Counter c, Key k) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        k[0] += kW0;
        k[1] += kW1;
      }
      const std::uint64_t p0 = std::uint64_t{kM0} * c[0];
      const std::uint64_t p1 = std::uint64_t{kM1} * c[2];
      c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0],
           static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1],
           static_cast<std::uint32_t>(p0)};
    }
    return c;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;
};

/// SplitMix64 finalizer; used to derive stream identifiers.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Counter-addressed random stream.
///
/// Draw k of stream (seed, stream_id) is the 64-bit word k of the Philox
/// sequence keyed by `seed` with the stream id in the upper counter half. It
/// depends on nothing else, so replaying a stream, or reading it from another
/// thread, gives identical values.
class RngStream {
 public:
  constexpr RngStream() noexcept = default;
  constexpr RngStream(std::uint64_t seed, std::uint64_t stream_id,
                      std::uint64_t counter = 0) noexcept
      : seed_(seed), stream_id_(stream_id), counter_(counter) {}

  [[nodiscard]] constexpr std::uint64_t seed() const noexcept { return seed_; }
  [[nodiscard]] constexpr std::uint64_t stream_id() const noexcept { return stream_id_; }
  [[nodiscard]] constexpr std::uint64_t counter() const noexcept { return counter_; }

  /// Independent child stream. Children with different tags, and the parent,
  /// never share draws.
  [[nodiscard]] constexpr RngStream substream(std::uint64_t tag) const noexcept {
    return RngStream(seed_, mix64(stream_id_ ^ mix64(tag ^ 0x5851F42D4C957F2Dull)));
  }

  constexpr void seek(std::uint64_t draw_index) noexcept {
    counter_ = draw_index;
    cached_valid_ = false;
  }

  /// Pure lookup of draw k; does not move the stream.
  [[nodiscard]] constexpr std::uint64_t draw_at(std::uint64_t k) const noexcept {
    const auto block = block_at(k >> 1);
    return (k & 1u) ? block[1] : block[0];
  }

  constexpr std::uint64_t next_u64() noexcept {
    const std::uint64_t k = counter_++;
    if (k & 1u) {
      if (cached_valid_ && cached_index_ == k) return cached_;
      return block_at(k >> 1)[1];
    }
    const auto block = block_at(k >> 1);
    cached_ = block[1];
    cached_index_ = k + 1;
    cached_valid_ = true;
    return block[0];
  }

  /// Uniform on the open interval (0, 1).
  double uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double exponential(double rate) {
    if (!(rate > 0.0)) throw ParameterError("exponential: rate must be positive");
    return -std::log(uniform()) / rate;
  }

  /// Standard normal pair by Box-Muller (two draws).
  std::array<double, 2> normal_pair() noexcept {
    const double u1 = uniform();
    const double u2 = uniform();
    const double rho = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    return {rho * std::cos(theta), rho * std::sin(theta)};
  }

  double normal() noexcept { return normal_pair()[0]; }

  /// Fills `out` with i.i.d. N(0, variance) values, two per Box-Muller pair.
  void normals(std::span<double> out, double variance) noexcept {
    const double sd = std::sqrt(variance);
    std::size_t i = 0;
    for (; i + 1 < out.size(); i += 2) {
      const auto z = normal_pair();
      out[i] = sd * z[0];
      out[i + 1] = sd * z[1];
    }
    if (i < out.size()) out[i] = sd * normal_pair()[0];
  }

  std::uint64_t poisson(double mean);

 private:
  [[nodiscard]] constexpr std::array<std::uint64_t, 2> block_at(std::uint64_t b) const noexcept {
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                                  static_cast<std::uint32_t>(stream_id_),
                                  static_cast<std::uint32_t>(stream_id_ >> 32)};
    const Philox4x32::Key key{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)};
    const auto out = Philox4x32::apply(ctr, key);
    return {(std::uint64_t{out[1]} << 32) | out[0], (std::uint64_t{out[3]} << 32) | out[2]};
  }

  std::uint64_t seed_ = 0;
  std::uint64_t stream_id_ = 0;
  std::uint64_t counter_ = 0;
  std::uint64_t cached_ = 0;
  std::uint64_t cached_index_ = 0;
  bool cached_valid_ = false;
};

/// Poisson sampling: multiplication method below mean 10, Hormann's PTRS
/// transformed rejection above.
inline std::uint64_t RngStream::poisson(double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw ParameterError("poisson: mean must be finite and >= 0");
  if (mean == 0.0) return 0;
  if (mean < 10.0) {
    const double limit = std::exp(-mean);
    std::uint64_t k = 0;
    double prod = uniform();
    while (prod > limit) {
      ++k;
      prod *= uniform();
    }
    return k;
  }
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = uniform() - 0.5;
    const double v = uniform();
    const double us = 0.5 - std::fabs(u);
    const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
        -mean + k * loglam - std::lgamma(k + 1.0)) {
      return static_cast<std::uint64_t>(k);
    }
  }
}

}  // namespace bbmlab
