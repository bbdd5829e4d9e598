// Copyright (c) 2026 gicd authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Core>

namespace gicd {

/// SplitMix64 finalizer; full-period bijection on uint64.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Counter-based generator: every draw is a pure function of
/// (seed, stream, index), so any draw can be reproduced or evaluated in
/// parallel without shared state. Streams separate independent purposes
/// (init noise, per-step noise, test vectors).
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform(std::uint64_t stream, std::uint64_t index) const {
    return static_cast<double>(word(stream, index, 0) >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; one value per (stream, index).
  double normal(std::uint64_t stream, std::uint64_t index) const {
    // u1 in (0,1] so log() stays finite.
    const double u1 =
        (static_cast<double>(word(stream, index, 0) >> 11) + 1.0) * 0x1.0p-53;
    const double u2 =
        static_cast<double>(word(stream, index, 1) >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  Eigen::ArrayXd normals(std::uint64_t stream, Eigen::Index n) const {
    Eigen::ArrayXd out(n);
    for (Eigen::Index i = 0; i < n; ++i)
      out[i] = normal(stream, static_cast<std::uint64_t>(i));
    return out;
  }

  Eigen::ArrayXd uniforms(std::uint64_t stream, Eigen::Index n) const {
    Eigen::ArrayXd out(n);
    for (Eigen::Index i = 0; i < n; ++i)
      out[i] = uniform(stream, static_cast<std::uint64_t>(i));
    return out;
  }

 private:
  std::uint64_t word(std::uint64_t stream, std::uint64_t index,
                     std::uint64_t lane) const {
    return mix64(mix64(mix64(mix64(seed_) ^ stream) ^ index) ^ lane);
  }

  std::uint64_t seed_;
};

}  // namespace gicd
