// Copyright Contributors to the vspc project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "vspc/kmap/dataflow_plan.hpp"
#include "vspc/kmap/offsets.hpp"

namespace vspc {

inline constexpr std::int32_t kNoMatch = -1;

/// One valid (input row, output row) entry of a weight-stationary list.
struct ValidPair {
  std::int32_t in = 0;
  std::int32_t out = 0;
  friend bool operator==(const ValidPair&, const ValidPair&) = default;
};

/// Kernel map M[i, k] = j (input row j matches output i at offset k) or -1.
///
/// Dense offsets live in `os_table`, an n_out x k_dense row-major table with
/// -1 sentinels. Sparse offsets live as per-offset lists of valid pairs in
/// `ws_pairs`, list s spanning [ws_begin[s], ws_begin[s + 1]) and ordered by
/// output row.
///
/// Builders for weight-stationary and hybrid plans emit offset-major staging
/// rows (`staged_dense`, `staged_sparse`, each row n_out long); post_process
/// transposes the dense rows and filters the sparse rows, then sets
/// `finalized`. Output-stationary builds are final straight away.
///
/// With `symmetric_half` set the sparse lists hold only offsets k <= center;
/// offset K^3 - 1 - k is implied by swapping pair roles (submanifold only).
struct KernelMap {
  Layout layout = Layout::OutputStationary;
  std::size_t n_out = 0;
  std::size_t n_in = 0;
  int kernel_size = 1;
  int step = 1;
  std::vector<int> l1;
  std::vector<int> dense;
  std::vector<int> sparse;

  std::vector<std::int32_t> os_table;
  std::vector<std::int32_t> staged_dense;
  std::vector<std::int32_t> staged_sparse;
  std::vector<std::size_t> ws_begin;
  std::vector<ValidPair> ws_pairs;

  /// Valid entries per offset, indexed by k.
  std::vector<std::size_t> counts;
  bool finalized = false;
  bool symmetric_half = false;

  int k_total() const { return kernel_volume(kernel_size); }
  std::size_t k_dense() const { return dense.size(); }
  std::size_t k_sparse() const { return sparse.size(); }

  std::span<const ValidPair> pairs(std::size_t sparse_slot) const {
    return {ws_pairs.data() + ws_begin[sparse_slot],
            ws_begin[sparse_slot + 1] - ws_begin[sparse_slot]};
  }

  std::size_t memory_bytes() const {
    return os_table.size() * sizeof(std::int32_t) +
           (staged_dense.size() + staged_sparse.size()) * sizeof(std::int32_t) +
           ws_pairs.size() * sizeof(ValidPair) + ws_begin.size() * sizeof(std::size_t) +
           counts.size() * sizeof(std::size_t);
  }

  /// Allocates storage for `plan`. Staging rows are requested for
  /// weight-stationary and hybrid plans.
  static KernelMap allocate(std::size_t n_out, std::size_t n_in, const DataflowPlan& plan) {
    KernelMap m;
    m.layout = plan.layout();
    m.n_out = n_out;
    m.n_in = n_in;
    m.kernel_size = plan.kernel_size;
    m.step = plan.step;
    for (const auto& w : enumerate_offsets(plan.kernel_size, plan.step)) m.l1.push_back(w.l1);
    m.dense = plan.dense;
    m.sparse = plan.sparse;
    m.counts.assign(static_cast<std::size_t>(m.k_total()), 0);
    if (m.layout == Layout::OutputStationary) {
      m.os_table.assign(n_out * m.k_dense(), kNoMatch);
      m.ws_begin.assign(1, 0);
      m.finalized = true;
    } else {
      m.staged_dense.assign(m.k_dense() * n_out, kNoMatch);
      m.staged_sparse.assign(m.k_sparse() * n_out, kNoMatch);
    }
    return m;
  }

  bool matches(const DataflowPlan& plan) const {
    return plan.kernel_size == kernel_size && plan.step == step && plan.dense == dense &&
           plan.sparse == sparse && plan.layout() == layout;
  }
};

/// Full n_out x K^3 table in canonical offset order, whatever the storage
/// layout or stage. Used to compare maps.
inline std::vector<std::int32_t> canonical_table(const KernelMap& m) {
  const std::size_t kt = static_cast<std::size_t>(m.k_total());
  std::vector<std::int32_t> t(m.n_out * kt, kNoMatch);
  const std::size_t kd = m.k_dense();
  if (m.finalized) {
    for (std::size_t i = 0; i < m.n_out; ++i)
      for (std::size_t d = 0; d < kd; ++d)
        t[i * kt + static_cast<std::size_t>(m.dense[d])] = m.os_table[i * kd + d];
    for (std::size_t s = 0; s < m.k_sparse(); ++s) {
      const auto k = static_cast<std::size_t>(m.sparse[s]);
      for (const auto& p : m.pairs(s)) {
        t[static_cast<std::size_t>(p.out) * kt + k] = p.in;
        if (m.symmetric_half && static_cast<int>(k) != center_offset_index(m.kernel_size)) {
          const auto mirror = static_cast<std::size_t>(mirror_offset_index(m.kernel_size, static_cast<int>(k)));
          t[static_cast<std::size_t>(p.in) * kt + mirror] = p.out;
        }
      }
    }
  } else {
    for (std::size_t d = 0; d < kd; ++d)
      for (std::size_t i = 0; i < m.n_out; ++i)
        t[i * kt + static_cast<std::size_t>(m.dense[d])] = m.staged_dense[d * m.n_out + i];
    for (std::size_t s = 0; s < m.k_sparse(); ++s)
      for (std::size_t i = 0; i < m.n_out; ++i)
        t[i * kt + static_cast<std::size_t>(m.sparse[s])] = m.staged_sparse[s * m.n_out + i];
  }
  return t;
}

inline bool same_mapping(const KernelMap& a, const KernelMap& b) {
  return a.n_out == b.n_out && a.kernel_size == b.kernel_size &&
         canonical_table(a) == canonical_table(b);
}

/// FNV-1a over the canonical table and shape.
inline std::uint64_t map_checksum(const KernelMap& m) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xff;
      h *= 0x100000001b3ull;
    }
  };
  mix(m.n_out);
  mix(static_cast<std::uint64_t>(m.kernel_size));
  mix(static_cast<std::uint64_t>(m.step));
  for (auto e : canonical_table(m)) mix(static_cast<std::uint64_t>(static_cast<std::uint32_t>(e)));
  return h;
}

/// Text dump:
///   kmap v1 n_out=<n> K=<k> layout=<os|ws|hybrid>
///   k=<idx> l1=<n> count=<c>
///   <in> <out>          (one line per valid pair, ascending output row)
inline void dump_kernel_map(std::ostream& out, const KernelMap& m) {
  out << "kmap v1 n_out=" << m.n_out << " K=" << m.kernel_size << " layout=" << layout_tag(m.layout)
      << '\n';
  const auto t = canonical_table(m);
  const std::size_t kt = static_cast<std::size_t>(m.k_total());
  for (std::size_t k = 0; k < kt; ++k) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < m.n_out; ++i) count += t[i * kt + k] != kNoMatch;
    out << "k=" << k << " l1=" << m.l1[k] << " count=" << count << '\n';
    for (std::size_t i = 0; i < m.n_out; ++i)
      if (t[i * kt + k] != kNoMatch) out << t[i * kt + k] << ' ' << i << '\n';
  }
}

}  // namespace vspc
