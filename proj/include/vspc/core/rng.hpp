// Copyright Contributors to the vspc project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "vspc/core/types.hpp"

namespace vspc {

/// SplitMix64; fully specified so generated values are identical on every
/// platform (std distributions are not).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) from the top 24 bits.
  float uniform01() { return static_cast<float>(next() >> 40) * (1.0f / 16777216.0f); }

  /// Uniform in [-a, a).
  float symmetric(float a) { return (2.0f * uniform01() - 1.0f) * a; }

 private:
  std::uint64_t state_;
};

/// Stream seed for (seed, stream) pairs, e.g. one stream per layer.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  SplitMix64 g(seed ^ (stream * 0xD1B54A32D192ED03ull));
  return g.next();
}

/// Uniform in [-1, 1) features, same generator protocol as random_weights.
inline FeatureMatrix random_features(std::size_t rows, std::size_t channels, std::uint64_t seed,
                                     std::uint64_t stream = 0) {
  FeatureMatrix f(rows, channels);
  SplitMix64 g(stream_seed(seed, stream));
  for (auto& v : f.data) v = g.symmetric(1.0f);
  return f;
}

}  // namespace vspc
