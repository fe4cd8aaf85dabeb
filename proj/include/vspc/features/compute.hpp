// Copyright Contributors to the vspc project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <vector>

#include <tbb/blocked_range.h>
#include <tbb/enumerable_thread_specific.h>
#include <tbb/parallel_for.h>

#include "vspc/core/types.hpp"
#include "vspc/features/gemm.hpp"
#include "vspc/features/weights.hpp"
#include "vspc/kmap/dataflow_plan.hpp"
#include "vspc/kmap/kernel_map.hpp"

namespace vspc {

enum class Accumulation {
  /// Weight-stationary offsets run one after another; within an offset every
  /// output row receives at most one partial sum, so workers never collide
  /// and results are reproducible.
  Deterministic,
  /// All (offset, pair chunk) tasks run at once and merge partial sums with
  /// atomic adds; summation order varies from run to run.
  Atomic,
};

struct FeatureOptions {
  Accumulation accumulation = Accumulation::Deterministic;
  /// Output-stationary sentinels are skipped by default; set to multiply
  /// zero rows for them instead, as a GPU kernel would.
  bool multiply_sentinels = false;
  /// Rows gathered per GEMM call.
  std::size_t chunk = 128;
};

struct FeatureStats {
  std::size_t os_offsets = 0;  ///< offsets processed output-stationary
  std::size_t ws_offsets = 0;  ///< offset lists processed weight-stationary
  std::size_t gemm_rows = 0;   ///< gathered rows, sentinel rows included
};

namespace detail {

inline void check_shapes(const KernelMap& map, const FeatureMatrix& in, const WeightTensor& w) {
  if (!map.finalized) fail("feature computation: kernel map is not post-processed");
  if (w.volume != static_cast<std::size_t>(map.k_total()))
    fail("feature computation: ", w.volume, " weight matrices for K^3=", map.k_total());
  if (in.channels != w.c_in)
    fail("feature computation: input has ", in.channels, " channels, weights expect ", w.c_in);
  if (in.rows != map.n_in)
    fail("feature computation: ", in.rows, " input rows for a map over ", map.n_in, " inputs");
}

struct GatherBuffers {
  std::vector<float> a, c;
  std::vector<std::int32_t> rows;
};

inline void add_row(float* dst, const float* src, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) dst[j] += src[j];
}

inline void atomic_add_row(float* dst, const float* src, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) std::atomic_ref<float>(dst[j]).fetch_add(src[j], std::memory_order_relaxed);
}

inline void os_pass(const KernelMap& map, const FeatureMatrix& in, const WeightTensor& w,
                    FeatureMatrix& out, const FeatureOptions& opts, FeatureStats& stats) {
  const std::size_t kd = map.k_dense();
  if (kd == 0 || map.n_out == 0) return;
  const std::size_t cin = w.c_in, cout = w.c_out, chunk = std::max<std::size_t>(1, opts.chunk);
  tbb::enumerable_thread_specific<GatherBuffers> buffers;
  tbb::enumerable_thread_specific<std::size_t> gathered(0);
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, map.n_out, chunk),
                    [&](const tbb::blocked_range<std::size_t>& r) {
    auto& buf = buffers.local();
    buf.a.resize(r.size() * cin);
    buf.c.resize(r.size() * cout);
    buf.rows.resize(r.size());
    for (std::size_t d = 0; d < kd; ++d) {
      std::size_t filled = 0;
      for (std::size_t i = r.begin(); i != r.end(); ++i) {
        const std::int32_t j = map.os_table[i * kd + d];
        if (j == kNoMatch && !opts.multiply_sentinels) continue;
        float* dst = buf.a.data() + filled * cin;
        if (j == kNoMatch) {
          std::fill(dst, dst + cin, 0.0f);
        } else {
          const auto src = in.row(static_cast<std::size_t>(j));
          std::copy(src.begin(), src.end(), dst);
        }
        buf.rows[filled++] = static_cast<std::int32_t>(i);
      }
      if (filled == 0) continue;
      gemm(buf.a, w.matrix(static_cast<std::size_t>(map.dense[d])), buf.c, filled, cin, cout);
      for (std::size_t r2 = 0; r2 < filled; ++r2)
        add_row(out.row(static_cast<std::size_t>(buf.rows[r2])).data(), buf.c.data() + r2 * cout, cout);
      gathered.local() += filled;
    }
  });
  stats.os_offsets += kd;
  for (auto g : gathered) stats.gemm_rows += g;
}

/// One weight-stationary work list: pairs of one stored offset, optionally
/// with input/output roles swapped (the implied mirror of a halved map).
struct WsList {
  std::size_t slot;
  int offset;
  bool mirrored;
};

inline std::vector<WsList> ws_lists(const KernelMap& map) {
  std::vector<WsList> lists;
  const int center = center_offset_index(map.kernel_size);
  for (std::size_t s = 0; s < map.k_sparse(); ++s) {
    lists.push_back({s, map.sparse[s], false});
    if (map.symmetric_half && map.sparse[s] != center)
      lists.push_back({s, mirror_offset_index(map.kernel_size, map.sparse[s]), true});
  }
  return lists;
}

template <bool Atomic>
void ws_chunk(const KernelMap& map, const WsList& list, std::size_t begin, std::size_t end,
              const FeatureMatrix& in, const WeightTensor& w, FeatureMatrix& out,
              GatherBuffers& buf) {
  const std::size_t cin = w.c_in, cout = w.c_out, n = end - begin;
  const auto pairs = map.pairs(list.slot);
  buf.a.resize(n * cin);
  buf.c.resize(n * cout);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& p = pairs[begin + r];
    const auto src = in.row(static_cast<std::size_t>(list.mirrored ? p.out : p.in));
    std::copy(src.begin(), src.end(), buf.a.data() + r * cin);
  }
  gemm(buf.a, w.matrix(static_cast<std::size_t>(list.offset)), buf.c, n, cin, cout);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& p = pairs[begin + r];
    float* dst = out.row(static_cast<std::size_t>(list.mirrored ? p.in : p.out)).data();
    if constexpr (Atomic) {
      atomic_add_row(dst, buf.c.data() + r * cout, cout);
    } else {
      add_row(dst, buf.c.data() + r * cout, cout);
    }
  }
}

inline void ws_pass(const KernelMap& map, const FeatureMatrix& in, const WeightTensor& w,
                    FeatureMatrix& out, const FeatureOptions& opts, FeatureStats& stats) {
  const auto lists = ws_lists(map);
  if (lists.empty()) return;
  const std::size_t chunk = std::max<std::size_t>(1, opts.chunk);
  tbb::enumerable_thread_specific<GatherBuffers> buffers;
  if (opts.accumulation == Accumulation::Deterministic) {
    for (const auto& list : lists) {
      const std::size_t n = map.pairs(list.slot).size();
      tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n, chunk),
                        [&](const tbb::blocked_range<std::size_t>& r) {
                          ws_chunk<false>(map, list, r.begin(), r.end(), in, w, out, buffers.local());
                        });
      stats.gemm_rows += n;
    }
  } else {
    struct Task {
      std::size_t list, begin, end;
    };
    std::vector<Task> tasks;
    for (std::size_t l = 0; l < lists.size(); ++l) {
      const std::size_t n = map.pairs(lists[l].slot).size();
      for (std::size_t b = 0; b < n; b += chunk) tasks.push_back({l, b, std::min(n, b + chunk)});
      stats.gemm_rows += n;
    }
    tbb::parallel_for(std::size_t{0}, tasks.size(), [&](std::size_t t) {
      const auto& task = tasks[t];
      ws_chunk<true>(map, lists[task.list], task.begin, task.end, in, w, out, buffers.local());
    });
  }
  stats.ws_offsets += lists.size();
}

}  // namespace detail

/// F_out[i] = sum over dense offsets k of F_in[M[i, k]] W_k; each output row
/// is produced by one worker.
inline FeatureMatrix compute_output_stationary(const KernelMap& map, const FeatureMatrix& in,
                                               const WeightTensor& w, const FeatureOptions& opts = {},
                                               FeatureStats* stats = nullptr) {
  detail::check_shapes(map, in, w);
  if (map.k_sparse() != 0) detail::fail("compute_output_stationary: map has sparse offsets");
  FeatureStats local;
  FeatureMatrix out(map.n_out, w.c_out);
  detail::os_pass(map, in, w, out, opts, local);
  if (stats) *stats = local;
  return out;
}

/// F_out[i] += F_in[j] W_k for every valid pair (j, i) of every sparse offset.
inline FeatureMatrix compute_weight_stationary(const KernelMap& map, const FeatureMatrix& in,
                                               const WeightTensor& w, const FeatureOptions& opts = {},
                                               FeatureStats* stats = nullptr) {
  detail::check_shapes(map, in, w);
  if (map.k_dense() != 0) detail::fail("compute_weight_stationary: map has dense offsets");
  FeatureStats local;
  FeatureMatrix out(map.n_out, w.c_out);
  detail::ws_pass(map, in, w, out, opts, local);
  if (stats) *stats = local;
  return out;
}

/// Output-stationary pass over the dense offsets, then a weight-stationary
/// pass over the sparse ones, into one buffer.
inline FeatureMatrix compute_hybrid(const KernelMap& map, const DataflowPlan& plan,
                                    const FeatureMatrix& in, const WeightTensor& w,
                                    const FeatureOptions& opts = {}, FeatureStats* stats = nullptr) {
  detail::check_shapes(map, in, w);
  if (plan.dense != map.dense || plan.kernel_size != map.kernel_size ||
      plan.layout() != map.layout) {
    detail::fail("compute_hybrid: plan (t=", plan.threshold, ") does not match the map");
  }
  FeatureStats local;
  FeatureMatrix out(map.n_out, w.c_out);
  detail::os_pass(map, in, w, out, opts, local);
  detail::ws_pass(map, in, w, out, opts, local);
  if (stats) *stats = local;
  return out;
}

/// Dispatches on the map's layout.
inline FeatureMatrix compute_features(const KernelMap& map, const FeatureMatrix& in,
                                      const WeightTensor& w, const FeatureOptions& opts = {},
                                      FeatureStats* stats = nullptr) {
  detail::check_shapes(map, in, w);
  FeatureStats local;
  FeatureMatrix out(map.n_out, w.c_out);
  detail::os_pass(map, in, w, out, opts, local);
  detail::ws_pass(map, in, w, out, opts, local);
  if (stats) *stats = local;
  return out;
}

}  // namespace vspc
