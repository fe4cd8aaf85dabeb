// Copyright Contributors to the vspc project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdlib>
#include <vector>

#include "vspc/core/types.hpp"

namespace vspc {

struct WeightOffset {
  VoxelCoord delta;
  int l1 = 0;
  int index = 0;
};

/// K offsets sharing (dx, dy); members ascend in dz by the offset step.
struct OffsetGroup {
  int id = 0;
  WeightOffset anchor;
  std::vector<WeightOffset> members;
};

inline int kernel_volume(int kernel_size) { return kernel_size * kernel_size * kernel_size; }

/// 3 (K - 1) / 2 * step.
inline int l1_norm_max(int kernel_size, int step) { return 3 * (kernel_size - 1) / 2 * step; }

inline int center_offset_index(int kernel_size) { return (kernel_volume(kernel_size) - 1) / 2; }

/// Index of -delta_k in canonical order.
inline int mirror_offset_index(int kernel_size, int k) { return kernel_volume(kernel_size) - 1 - k; }

inline void check_kernel_size(int kernel_size, int step) {
  if (kernel_size < 1 || kernel_size % 2 == 0)
    detail::fail("kernel size must be odd and positive, got ", kernel_size);
  if (step < 1) detail::fail("offset step must be positive, got ", step);
}

/// All K^3 offsets of {-(K-1)/2 s, ..., (K-1)/2 s}^3 in lexicographic
/// (dx, dy, dz) order; `index` equals the position.
inline std::vector<WeightOffset> enumerate_offsets(int kernel_size, int step) {
  check_kernel_size(kernel_size, step);
  const int r = (kernel_size - 1) / 2;
  std::vector<WeightOffset> out;
  out.reserve(static_cast<std::size_t>(kernel_volume(kernel_size)));
  for (int x = -r; x <= r; ++x)
    for (int y = -r; y <= r; ++y)
      for (int z = -r; z <= r; ++z) {
        WeightOffset w;
        w.delta = {x * step, y * step, z * step};
        w.l1 = (std::abs(x) + std::abs(y) + std::abs(z)) * step;
        w.index = static_cast<int>(out.size());
        out.push_back(w);
      }
  return out;
}

inline std::vector<OffsetGroup> group_offsets(const std::vector<WeightOffset>& offsets) {
  std::vector<OffsetGroup> groups;
  for (const auto& w : offsets) {
    if (groups.empty() || groups.back().anchor.delta.x != w.delta.x ||
        groups.back().anchor.delta.y != w.delta.y) {
      OffsetGroup g;
      g.id = static_cast<int>(groups.size());
      g.anchor = w;
      groups.push_back(std::move(g));
    }
    auto& g = groups.back();
    if (w.delta.z < g.anchor.delta.z) g.anchor = w;
    g.members.push_back(w);
  }
  return groups;
}

}  // namespace vspc
