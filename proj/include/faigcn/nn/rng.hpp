// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace faigcn::nn {

/// Counter-based generator: draw i is SplitMix64's finalizer applied to
/// seed + (i + 1) * 0x9E3779B97F4A7C15. Identical on every platform, and the
/// stream position is just a counter, so streams can be forked by key.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0) noexcept : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept;
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, bound); bound > 0. Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t bound) noexcept;
  /// Standard normal via Box-Muller (one value per two uniforms; no caching).
  double normal() noexcept;
  double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

  /// Fisher-Yates shuffle of indices.
  void shuffle(std::span<std::size_t> items) noexcept;

  /// Independent child stream keyed by `key`.
  RngStream fork(std::uint64_t key) const noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

/// Mixes a seed and a key into a new seed (used for per-fold seeds).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key) noexcept;

}  // namespace faigcn::nn
