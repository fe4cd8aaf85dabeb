// Copyright Contributors to the vspc project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <tbb/parallel_sort.h>

#include "vspc/core/packing.hpp"

namespace vspc {

template <PackWord Word>
struct SortedPacked {
  PackedCloud<Word> coords;
  /// permutation[i] is the original position of sorted element i.
  std::vector<std::size_t> permutation;
};

inline constexpr std::size_t kParallelSortThreshold = 1 << 14;

/// Ascending unsigned order; stable for equal keys.
template <PackWord Word>
SortedPacked<Word> sort_packed(std::span<const PackedCoord<Word>> coords) {
  std::vector<std::pair<Word, std::size_t>> keyed(coords.size());
  for (std::size_t i = 0; i < coords.size(); ++i) keyed[i] = {coords[i].value, i};
  // The index tiebreak makes the unstable sort stable.
  if (keyed.size() >= kParallelSortThreshold) {
    tbb::parallel_sort(keyed.begin(), keyed.end());
  } else {
    std::sort(keyed.begin(), keyed.end());
  }
  SortedPacked<Word> out;
  out.coords.resize(keyed.size());
  out.permutation.resize(keyed.size());
  for (std::size_t i = 0; i < keyed.size(); ++i) {
    out.coords[i] = {keyed[i].first};
    out.permutation[i] = keyed[i].second;
  }
  return out;
}

template <PackWord Word>
bool is_strictly_sorted(std::span<const PackedCoord<Word>> coords) {
  return std::adjacent_find(coords.begin(), coords.end(),
                            [](auto a, auto b) { return !(a < b); }) == coords.end();
}

/// Rounds every coordinate down to a multiple of 2^m with one AND, then
/// sorts and removes duplicates. Never unpacks.
template <PackWord Word>
PackedCloud<Word> downsample(std::span<const PackedCoord<Word>> coords, const PackSpec& spec,
                             int m) {
  const Word mask = downsample_mask<Word>(spec, m);
  PackedCloud<Word> out(coords.size());
  for (std::size_t i = 0; i < coords.size(); ++i) out[i] = {static_cast<Word>(coords[i].value & mask)};
  // Rounding keeps x-major order only across different rounded x; y and z
  // can fall out of order inside one x slab, so a sort is required.
  if (out.size() >= kParallelSortThreshold) {
    tbb::parallel_sort(out.begin(), out.end());
  } else {
    std::sort(out.begin(), out.end());
  }
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace vspc
