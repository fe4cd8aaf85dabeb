// Copyright Contributors to the vspc project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <span>
#include <vector>

#include "vspc/vspc.hpp"

namespace vspc::test {

using W32 = std::uint32_t;

inline constexpr double kRelTol = 1e-4;

/// max |a - b| / max(|b|, 1) over all elements. Shapes must match.
inline double max_rel_err(const FeatureMatrix& a, const FeatureMatrix& b) {
  if (a.rows != b.rows || a.channels != b.channels) return INFINITY;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = std::abs(double{a.data[i]} - double{b.data[i]});
    worst = std::max(worst, d / std::max(std::abs(double{b.data[i]}), 1.0));
  }
  return worst;
}

/// n distinct voxels drawn uniformly from [lo, lo + extent)^3, sorted.
inline std::vector<VoxelCoord> random_voxels(std::size_t n, int extent, int lo,
                                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> d(lo, lo + extent - 1);
  std::set<VoxelCoord> s;
  while (s.size() < n) s.insert({d(rng), d(rng), d(rng)});
  return {s.begin(), s.end()};
}

/// Connected blob grown by random walk: neighbourhoods are dense, unlike
/// uniform samples.
inline std::vector<VoxelCoord> random_blob(std::size_t n, VoxelCoord start, int extent,
                                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> step(-1, 1);
  std::set<VoxelCoord> s{start};
  VoxelCoord cur = start;
  while (s.size() < n) {
    VoxelCoord next{cur.x + step(rng), cur.y + step(rng), cur.z + step(rng)};
    bool inside = true;
    for (std::size_t a = 0; a < 3; ++a)
      inside = inside && next[a] >= start[a] - extent / 2 && next[a] < start[a] + extent / 2;
    if (!inside) continue;
    cur = next;
    s.insert(cur);
  }
  return {s.begin(), s.end()};
}

template <PackWord Word = W32>
PackedCloud<Word> pack_all(std::span<const VoxelCoord> v, const PackSpec& spec) {
  PackedCloud<Word> out;
  out.reserve(v.size());
  for (const auto& c : v) out.push_back(pack<Word>(c, spec));
  return out;
}

template <PackWord Word = W32>
std::vector<VoxelCoord> unpack_all(std::span<const PackedCoord<Word>> p, const PackSpec& spec) {
  std::vector<VoxelCoord> out;
  out.reserve(p.size());
  for (const auto& c : p) out.push_back(unpack<Word>(c, spec));
  return out;
}

/// Unpacked-arithmetic oracle for strided output sites: round each triple
/// down to a multiple of s, deduplicate, sort.
inline std::vector<VoxelCoord> round_down_oracle(std::span<const VoxelCoord> v, int s) {
  std::set<VoxelCoord> out;
  for (const auto& c : v)
    out.insert({static_cast<std::int32_t>(detail::floor_div(c.x, s) * s),
                static_cast<std::int32_t>(detail::floor_div(c.y, s) * s),
                static_cast<std::int32_t>(detail::floor_div(c.z, s) * s)});
  return {out.begin(), out.end()};
}

}  // namespace vspc::test
