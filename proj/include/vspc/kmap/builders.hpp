// Copyright Contributors to the vspc project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include <tbb/blocked_range.h>
#include <tbb/enumerable_thread_specific.h>
#include <tbb/parallel_for.h>

#include "vspc/core/packing.hpp"
#include "vspc/kmap/dataflow_plan.hpp"
#include "vspc/kmap/kernel_map.hpp"
#include "vspc/kmap/offsets.hpp"
#include "vspc/kmap/sort.hpp"

namespace vspc {

#ifdef NDEBUG
inline constexpr bool kDebugChecks = false;
#else
inline constexpr bool kDebugChecks = true;
#endif

struct SearchStats {
  std::uint64_t binary_search_count = 0;
  /// Key comparisons made by localized scans.
  std::uint64_t probe_count = 0;
  /// Key comparisons made inside binary searches.
  std::uint64_t global_comparison_count = 0;
  /// Largest probe count of a single (output, group) unit.
  std::uint64_t max_unit_probes = 0;

  SearchStats& operator+=(const SearchStats& o) {
    binary_search_count += o.binary_search_count;
    probe_count += o.probe_count;
    global_comparison_count += o.global_comparison_count;
    max_unit_probes = std::max(max_unit_probes, o.max_unit_probes);
    return *this;
  }
};

struct BuildOptions {
  /// Check sortedness, uniqueness, margins and the localized-scan invariant.
  bool validate = kDebugChecks;
  /// Output rows per parallel task.
  std::size_t grain = 256;
};

struct BuildResult {
  KernelMap map;
  SearchStats stats;
};

namespace detail {

/// Leftmost position whose key is >= `key`.
template <PackWord Word>
inline std::size_t lower_bound_counted(std::span<const PackedCoord<Word>> keys, Word key,
                                       std::uint64_t& comparisons) {
  std::size_t lo = 0, len = keys.size();
  while (len > 0) {
    const std::size_t half = len / 2;
    ++comparisons;
    if (keys[lo + half].value < key) {
      lo += half + 1;
      len -= half + 1;
    } else {
      len = half;
    }
  }
  return lo;
}

template <PackWord Word>
void check_coords(std::span<const PackedCoord<Word>> coords, const PackSpec& spec,
                  const char* what) {
  if (!is_strictly_sorted(coords)) {
    fail("kernel map: ", what, " coordinates are not sorted and unique");
  }
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const VoxelCoord v = unpack(coords[i], spec);
    for (std::size_t a = 0; a < 3; ++a) {
      if (v[a] < spec.margin || v[a] > spec.capacity(a) - 1 - spec.margin) {
        fail("kernel map: ", what, " coordinate ", i, " lies inside the pack margin on axis ",
             "xyz"[a]);
      }
    }
  }
}

struct LocalCounters {
  SearchStats stats;
  std::vector<std::size_t> counts;
};

/// Where entry (output i, offset k) is written.
struct EntrySink {
  KernelMap& map;
  std::vector<int> slot_of;    // k -> slot in dense or sparse list
  std::vector<char> is_dense;  // k -> 1 if dense
  std::size_t kt;

  explicit EntrySink(KernelMap& m)
      : map(m),
        slot_of(static_cast<std::size_t>(m.k_total()), -1),
        is_dense(static_cast<std::size_t>(m.k_total()), 0),
        kt(static_cast<std::size_t>(m.k_total())) {
    for (std::size_t d = 0; d < m.dense.size(); ++d) {
      slot_of[static_cast<std::size_t>(m.dense[d])] = static_cast<int>(d);
      is_dense[static_cast<std::size_t>(m.dense[d])] = 1;
    }
    for (std::size_t s = 0; s < m.sparse.size(); ++s)
      slot_of[static_cast<std::size_t>(m.sparse[s])] = static_cast<int>(s);
  }

  void write(std::size_t i, int k, std::int32_t j) {
    const auto kk = static_cast<std::size_t>(k);
    const auto slot = static_cast<std::size_t>(slot_of[kk]);
    if (map.layout == Layout::OutputStationary) {
      map.os_table[i * map.k_dense() + slot] = j;
    } else if (is_dense[kk]) {
      map.staged_dense[slot * map.n_out + i] = j;
    } else {
      map.staged_sparse[slot * map.n_out + i] = j;
    }
  }
};

template <PackWord Word>
struct GroupQueries {
  PackedOffset<Word> anchor;
  std::vector<int> member_index;  // offset k of member r, ascending dz
};

template <PackWord Word>
std::vector<GroupQueries<Word>> prepare_groups(const std::vector<OffsetGroup>& groups,
                                               const PackSpec& spec) {
  std::vector<GroupQueries<Word>> out;
  out.reserve(groups.size());
  for (const auto& g : groups) {
    GroupQueries<Word> q;
    q.anchor = pack_offset<Word>(g.anchor.delta, spec);
    auto members = g.members;
    std::sort(members.begin(), members.end(),
              [](const auto& a, const auto& b) { return a.delta.z < b.delta.z; });
    for (const auto& m : members) q.member_index.push_back(m.index);
    out.push_back(std::move(q));
  }
  return out;
}

/// Runs `unit(i, group, local)` over every (output, group) pair, writing
/// output-major for output-stationary maps and group-major within each
/// output chunk otherwise, so each task's writes stay contiguous.
template <typename Unit>
void for_each_unit(KernelMap& map, std::size_t n_groups, const BuildOptions& opts,
                   tbb::enumerable_thread_specific<LocalCounters>& locals, Unit&& unit) {
  const bool output_major = map.layout == Layout::OutputStationary;
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, map.n_out, std::max<std::size_t>(1, opts.grain)),
                    [&](const tbb::blocked_range<std::size_t>& r) {
                      auto& local = locals.local();
                      if (output_major) {
                        for (std::size_t i = r.begin(); i != r.end(); ++i)
                          for (std::size_t g = 0; g < n_groups; ++g) unit(i, g, local);
                      } else {
                        for (std::size_t g = 0; g < n_groups; ++g)
                          for (std::size_t i = r.begin(); i != r.end(); ++i) unit(i, g, local);
                      }
                    });
}

inline BuildResult merge_locals(KernelMap map,
                                tbb::enumerable_thread_specific<LocalCounters>& locals) {
  BuildResult res{std::move(map), {}};
  for (auto& l : locals) {
    res.stats += l.stats;
    for (std::size_t k = 0; k < l.counts.size(); ++k) res.map.counts[k] += l.counts[k];
  }
  return res;
}

inline void check_plan(const std::vector<WeightOffset>& offsets, const DataflowPlan& plan) {
  if (static_cast<int>(offsets.size()) != kernel_volume(plan.kernel_size)) {
    fail("kernel map: ", offsets.size(), " offsets for a K=", plan.kernel_size, " plan");
  }
}

}  // namespace detail

/// One binary search per (output, offset group) for the group's anchor
/// query, then a forward scan resolving the other K - 1 queries. Inputs and
/// outputs must be sorted, unique, and margin-interior. Inputs with equal
/// (x, y) must differ in z by multiples of the offset step, so no key can
/// fall strictly between two consecutive queries of a group: the scan
/// compares each remaining query against exactly one key.
template <PackWord Word>
BuildResult build_kmap_zdelta(std::span<const PackedCoord<Word>> inputs,
                              std::span<const PackedCoord<Word>> outputs,
                              const std::vector<WeightOffset>& offsets,
                              const std::vector<OffsetGroup>& groups, const PackSpec& spec,
                              const DataflowPlan& plan, const BuildOptions& opts = {}) {
  detail::check_plan(offsets, plan);
  if (opts.validate) {
    detail::check_coords(inputs, spec, "input");
    detail::check_coords(outputs, spec, "output");
  }
  const auto prepared = detail::prepare_groups<Word>(groups, spec);
  const Word z_step = static_cast<Word>(plan.step);
  const std::size_t kt = offsets.size();

  KernelMap map = KernelMap::allocate(outputs.size(), inputs.size(), plan);
  detail::EntrySink sink(map);
  tbb::enumerable_thread_specific<detail::LocalCounters> locals(
      [kt] { return detail::LocalCounters{{}, std::vector<std::size_t>(kt, 0)}; });

  const std::size_t n = inputs.size();
  detail::for_each_unit(map, prepared.size(), opts, locals,
                        [&](std::size_t i, std::size_t g, detail::LocalCounters& local) {
    const auto& gq = prepared[g];
    const PackedCoord<Word> anchor_query = outputs[i] + gq.anchor;
    ++local.stats.binary_search_count;
    std::size_t cur = detail::lower_bound_counted(inputs, anchor_query.value,
                                                  local.stats.global_comparison_count);
    Word query = anchor_query.value;
    std::uint64_t probes = 0;
    const std::size_t members = gq.member_index.size();
    for (std::size_t r = 0; r < members; ++r) {
      if (r > 0) {
        query = static_cast<Word>(query + z_step);
        if (cur >= n) {
          for (; r < members; ++r) sink.write(i, gq.member_index[r], kNoMatch);
          break;
        }
        ++probes;
      }
      std::int32_t hit = kNoMatch;
      if (cur < n) {
        if (inputs[cur].value == query) {
          hit = static_cast<std::int32_t>(cur);
          ++cur;
        } else if (opts.validate && inputs[cur].value < query) {
          detail::fail("z-delta: an input key lies between consecutive queries; input z "
                       "values are not multiples of the offset step ",
                       plan.step);
        }
      }
      sink.write(i, gq.member_index[r], hit);
      if (hit != kNoMatch) ++local.counts[static_cast<std::size_t>(gq.member_index[r])];
    }
    local.stats.probe_count += probes;
    local.stats.max_unit_probes = std::max(local.stats.max_unit_probes, probes);
  });
  return detail::merge_locals(std::move(map), locals);
}

/// One independent binary search per query: K^3 per output.
template <PackWord Word>
BuildResult build_kmap_bsearch(std::span<const PackedCoord<Word>> inputs,
                               std::span<const PackedCoord<Word>> outputs,
                               const std::vector<WeightOffset>& offsets, const PackSpec& spec,
                               const DataflowPlan& plan, const BuildOptions& opts = {}) {
  detail::check_plan(offsets, plan);
  if (opts.validate) {
    detail::check_coords(inputs, spec, "input");
    detail::check_coords(outputs, spec, "output");
  }
  std::vector<PackedOffset<Word>> packed;
  for (const auto& w : offsets) packed.push_back(pack_offset<Word>(w.delta, spec));
  const std::size_t kt = offsets.size();

  KernelMap map = KernelMap::allocate(outputs.size(), inputs.size(), plan);
  detail::EntrySink sink(map);
  tbb::enumerable_thread_specific<detail::LocalCounters> locals(
      [kt] { return detail::LocalCounters{{}, std::vector<std::size_t>(kt, 0)}; });

  // K units of one offset each stand in for the groups here.
  detail::for_each_unit(map, kt, opts, locals,
                        [&](std::size_t i, std::size_t k, detail::LocalCounters& local) {
    const Word query = (outputs[i] + packed[k]).value;
    ++local.stats.binary_search_count;
    const std::size_t pos =
        detail::lower_bound_counted(inputs, query, local.stats.global_comparison_count);
    std::int32_t hit = kNoMatch;
    if (pos < inputs.size() && inputs[pos].value == query) {
      hit = static_cast<std::int32_t>(pos);
      ++local.counts[k];
    }
    sink.write(i, static_cast<int>(k), hit);
  });
  return detail::merge_locals(std::move(map), locals);
}

/// Ground truth by hash lookup on unpacked triples. Single-threaded,
/// output-stationary layout.
inline KernelMap build_kmap_bruteforce(std::span<const VoxelCoord> inputs,
                                       std::span<const VoxelCoord> outputs,
                                       const std::vector<WeightOffset>& offsets) {
  if (offsets.empty()) detail::fail("kernel map: empty offset list");
  int kernel_size = 1;
  while (kernel_volume(kernel_size) < static_cast<int>(offsets.size())) kernel_size += 2;
  const int step = kernel_size == 1 ? 1 : std::abs(offsets[0].delta.x) / ((kernel_size - 1) / 2);
  const auto plan = DataflowPlan::output_stationary(kernel_size, step);
  KernelMap map = KernelMap::allocate(outputs.size(), inputs.size(), plan);

  std::unordered_map<VoxelCoord, std::int32_t, VoxelCoordHash> where;
  where.reserve(inputs.size() * 2);
  for (std::size_t j = 0; j < inputs.size(); ++j) where.emplace(inputs[j], static_cast<std::int32_t>(j));

  const std::size_t kt = offsets.size();
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    for (std::size_t k = 0; k < kt; ++k) {
      auto it = where.find(outputs[i] + offsets[k].delta);
      if (it != where.end()) {
        map.os_table[i * kt + k] = it->second;
        ++map.counts[k];
      }
    }
  }
  return map;
}

template <PackWord Word>
KernelMap build_kmap_bruteforce(std::span<const PackedCoord<Word>> inputs,
                                std::span<const PackedCoord<Word>> outputs,
                                const std::vector<WeightOffset>& offsets, const PackSpec& spec) {
  std::vector<VoxelCoord> in(inputs.size()), out(outputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) in[i] = unpack(inputs[i], spec);
  for (std::size_t i = 0; i < outputs.size(); ++i) out[i] = unpack(outputs[i], spec);
  return build_kmap_bruteforce(std::span<const VoxelCoord>(in), std::span<const VoxelCoord>(out),
                               offsets);
}

}  // namespace vspc
