// Copyright Contributors to the vspc project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include "vspc/kmap/dataflow_plan.hpp"
#include "vspc/kmap/kernel_map.hpp"

namespace vspc {

struct PostProcessStats {
  std::size_t transposed_entries = 0;
  std::size_t filtered_entries = 0;  ///< staged entries scanned by the filter
};

/// Finalizes a freshly built map for its plan.
///   output-stationary: nothing to do, the builder wrote the final table;
///   weight-stationary: filter each staged row into its valid-pair list;
///   hybrid: transpose only the dense rows, filter only the sparse rows.
/// List sizes come from the builder's per-offset counters, so each list is
/// filled in a single pass.
inline KernelMap post_process(KernelMap map, const DataflowPlan& plan,
                              PostProcessStats* stats = nullptr) {
  if (!map.matches(plan)) {
    detail::fail("post_process: plan (t=", plan.threshold, ") does not match the map's layout");
  }
  PostProcessStats local;
  if (map.finalized) {
    if (stats) *stats = local;
    return map;
  }

  const std::size_t n = map.n_out;
  const std::size_t kd = map.k_dense();
  if (kd > 0) {
    map.os_table.assign(n * kd, kNoMatch);
    tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n, 1024),
                      [&](const tbb::blocked_range<std::size_t>& r) {
                        for (std::size_t d = 0; d < kd; ++d) {
                          const std::int32_t* src = map.staged_dense.data() + d * n;
                          for (std::size_t i = r.begin(); i != r.end(); ++i)
                            map.os_table[i * kd + d] = src[i];
                        }
                      });
    local.transposed_entries = n * kd;
  }

  const std::size_t ks = map.k_sparse();
  map.ws_begin.assign(ks + 1, 0);
  for (std::size_t s = 0; s < ks; ++s)
    map.ws_begin[s + 1] = map.ws_begin[s] + map.counts[static_cast<std::size_t>(map.sparse[s])];
  map.ws_pairs.resize(map.ws_begin[ks]);
  tbb::parallel_for(std::size_t{0}, ks, [&](std::size_t s) {
    const std::int32_t* src = map.staged_sparse.data() + s * n;
    std::size_t w = map.ws_begin[s];
    const std::size_t end = map.ws_begin[s + 1];
    for (std::size_t i = 0; i < n; ++i) {
      if (src[i] != kNoMatch) {
        if (w == end) detail::fail("post_process: offset counter below its valid entries");
        map.ws_pairs[w++] = {src[i], static_cast<std::int32_t>(i)};
      }
    }
    if (w != end) detail::fail("post_process: offset counter above its valid entries");
  });
  local.filtered_entries = ks * n;

  map.staged_dense = {};
  map.staged_sparse = {};
  map.finalized = true;
  if (stats) *stats = local;
  return map;
}

/// Keeps only the sparse lists of offsets k <= center. For a submanifold
/// layer M[i, l] = j implies M[j, K^3 - 1 - l] = i, so the dropped lists are
/// the kept ones with input and output roles swapped.
inline KernelMap halve_symmetric(const KernelMap& map, bool submanifold) {
  if (!submanifold) detail::fail("halve_symmetric: only valid for submanifold layers");
  if (!map.finalized) detail::fail("halve_symmetric: map is not post-processed");
  if (map.symmetric_half) return map;
  const int center = center_offset_index(map.kernel_size);
  KernelMap half = map;
  half.sparse.clear();
  half.ws_pairs.clear();
  half.ws_begin.assign(1, 0);
  for (std::size_t s = 0; s < map.k_sparse(); ++s) {
    if (map.sparse[s] > center) continue;
    half.sparse.push_back(map.sparse[s]);
    const auto p = map.pairs(s);
    half.ws_pairs.insert(half.ws_pairs.end(), p.begin(), p.end());
    half.ws_begin.push_back(half.ws_pairs.size());
  }
  half.symmetric_half = true;
  return half;
}

/// Inverse of halve_symmetric.
inline KernelMap reconstruct_symmetric(const KernelMap& half) {
  if (!half.symmetric_half) return half;
  const int center = center_offset_index(half.kernel_size);
  std::vector<std::vector<ValidPair>> lists(static_cast<std::size_t>(half.k_total()));
  std::vector<char> present(static_cast<std::size_t>(half.k_total()), 0);
  for (std::size_t s = 0; s < half.k_sparse(); ++s) {
    const int k = half.sparse[s];
    const auto p = half.pairs(s);
    lists[static_cast<std::size_t>(k)].assign(p.begin(), p.end());
    present[static_cast<std::size_t>(k)] = 1;
    if (k == center) continue;
    const int mirror = mirror_offset_index(half.kernel_size, k);
    auto& ml = lists[static_cast<std::size_t>(mirror)];
    ml.reserve(p.size());
    for (const auto& e : p) ml.push_back({e.out, e.in});
    std::sort(ml.begin(), ml.end(), [](const auto& a, const auto& b) { return a.out < b.out; });
    present[static_cast<std::size_t>(mirror)] = 1;
  }
  KernelMap full = half;
  full.symmetric_half = false;
  full.sparse.clear();
  full.ws_pairs.clear();
  full.ws_begin.assign(1, 0);
  for (int k = 0; k < half.k_total(); ++k) {
    if (!present[static_cast<std::size_t>(k)]) continue;
    full.sparse.push_back(k);
    const auto& l = lists[static_cast<std::size_t>(k)];
    full.ws_pairs.insert(full.ws_pairs.end(), l.begin(), l.end());
    full.ws_begin.push_back(full.ws_pairs.size());
  }
  return full;
}

/// Number of (offset, pair) entries physically stored in the sparse lists.
inline std::size_t stored_pair_count(const KernelMap& m) { return m.ws_pairs.size(); }

}  // namespace vspc
