// Copyright Contributors to the vspc project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <span>

#include "vspc/core/types.hpp"

namespace vspc {

inline constexpr std::size_t kGemmRowBlock = 64;
inline constexpr std::size_t kGemmDepthBlock = 128;

/// c (n x m) = a (n x k) * b (k x m), all row-major. Each c element
/// accumulates its k products in ascending order from zero, independent of
/// the blocking.
inline void gemm(std::span<const float> a, std::span<const float> b, std::span<float> c,
                 std::size_t n, std::size_t k, std::size_t m) {
  if (a.size() < n * k || b.size() < k * m || c.size() < n * m) {
    detail::fail("gemm: buffers too small for ", n, "x", k, " * ", k, "x", m);
  }
  std::fill(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(n * m), 0.0f);
  for (std::size_t i0 = 0; i0 < n; i0 += kGemmRowBlock) {
    const std::size_t i1 = std::min(n, i0 + kGemmRowBlock);
    for (std::size_t p0 = 0; p0 < k; p0 += kGemmDepthBlock) {
      const std::size_t p1 = std::min(k, p0 + kGemmDepthBlock);
      for (std::size_t i = i0; i < i1; ++i) {
        float* crow = c.data() + i * m;
        const float* arow = a.data() + i * k;
        for (std::size_t p = p0; p < p1; ++p) {
          const float av = arow[p];
          const float* brow = b.data() + p * m;
          for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
      }
    }
  }
}

inline FeatureMatrix gemm(const FeatureMatrix& a, const FeatureMatrix& b) {
  if (a.channels != b.rows) {
    detail::fail("gemm: shape mismatch ", a.rows, "x", a.channels, " * ", b.rows, "x",
                 b.channels);
  }
  FeatureMatrix c(a.rows, b.channels);
  gemm(a.data, b.data, c.data, a.rows, a.channels, b.channels);
  return c;
}

}  // namespace vspc
