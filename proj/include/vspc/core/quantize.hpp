// Copyright Contributors to the vspc project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "vspc/core/packing.hpp"
#include "vspc/core/types.hpp"

namespace vspc {

using Point3 = std::array<double, 3>;

/// Voxel size and scene extent, both in meters.
struct GridSpec {
  std::array<double, 3> grid_size{1.0, 1.0, 1.0};
  std::array<double, 3> range{4095.0, 4095.0, 255.0};

  void validate() const {
    for (std::size_t a = 0; a < 3; ++a) {
      if (!(grid_size[a] > 0.0) || !std::isfinite(grid_size[a]))
        detail::fail("grid spec: grid_size[", a, "] must be positive, got ", grid_size[a]);
      if (!(range[a] > 0.0) || !std::isfinite(range[a]))
        detail::fail("grid spec: range[", a, "] must be positive, got ", range[a]);
    }
  }

  /// floor(R_i / g_i) per axis.
  std::array<std::uint64_t, 3> axis_extent() const {
    std::array<std::uint64_t, 3> e{};
    for (std::size_t a = 0; a < 3; ++a)
      e[a] = static_cast<std::uint64_t>(std::floor(range[a] / grid_size[a]));
    return e;
  }

  /// Bit allocation that covers axis_extent(); 400x400x20 m at 0.1 m gives 12/12/8.
  std::array<int, 3> derived_bits() const {
    const auto e = axis_extent();
    return {bits_for_extent(e[0]), bits_for_extent(e[1]), bits_for_extent(e[2])};
  }

  /// Checks that `spec` can hold this grid's extents.
  void check_fits(const PackSpec& spec) const {
    const auto need = derived_bits();
    for (std::size_t a = 0; a < 3; ++a) {
      if (need[a] > spec.bits[a]) {
        detail::fail("grid spec: axis ", "xyz"[a], " needs ", need[a], " bits but pack spec has ",
                     spec.bits[a]);
      }
    }
  }
};

struct QuantizedCloud {
  /// Unique voxels in lexicographic order.
  std::vector<VoxelCoord> voxels;
  /// voxel_of[i] is the index into `voxels` of raw point i.
  std::vector<std::size_t> voxel_of;
};

/// v = floor(p / g) per axis, merging points that land in the same voxel.
inline QuantizedCloud quantize(std::span<const Point3> points, const GridSpec& grid) {
  grid.validate();
  std::vector<VoxelCoord> raw(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    VoxelCoord v;
    for (std::size_t a = 0; a < 3; ++a) {
      const double p = points[i][a];
      if (!std::isfinite(p)) {
        detail::fail("quantize: point ", i, " has a non-finite coordinate");
      }
      const double q = std::floor(p / grid.grid_size[a]);
      if (q < std::numeric_limits<std::int32_t>::min() ||
          q > std::numeric_limits<std::int32_t>::max()) {
        detail::fail("quantize: point ", i, " quantizes outside the 32-bit index range");
      }
      v[a] = static_cast<std::int32_t>(q);
    }
    raw[i] = v;
  }

  std::vector<std::size_t> order(raw.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return raw[a] < raw[b]; });

  QuantizedCloud out;
  out.voxel_of.resize(raw.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    const std::size_t i = order[r];
    if (out.voxels.empty() || out.voxels.back() != raw[i]) out.voxels.push_back(raw[i]);
    out.voxel_of[i] = out.voxels.size() - 1;
  }
  return out;
}

/// Mean of the raw point features that fall in each voxel.
inline FeatureMatrix average_features(const QuantizedCloud& q, const FeatureMatrix& raw) {
  if (raw.rows != q.voxel_of.size()) {
    detail::fail("average_features: ", raw.rows, " feature rows for ", q.voxel_of.size(),
                 " points");
  }
  FeatureMatrix out(q.voxels.size(), raw.channels);
  std::vector<std::size_t> hits(q.voxels.size(), 0);
  for (std::size_t i = 0; i < raw.rows; ++i) {
    const std::size_t v = q.voxel_of[i];
    ++hits[v];
    auto dst = out.row(v);
    auto src = raw.row(i);
    for (std::size_t c = 0; c < raw.channels; ++c) dst[c] += src[c];
  }
  for (std::size_t v = 0; v < out.rows; ++v) {
    const float inv = 1.0f / static_cast<float>(hits[v]);
    for (auto& x : out.row(v)) x *= inv;
  }
  return out;
}

}  // namespace vspc
