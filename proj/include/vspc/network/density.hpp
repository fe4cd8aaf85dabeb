// Copyright Contributors to the vspc project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <span>
#include <vector>

#include "vspc/kmap/kernel_map.hpp"
#include "vspc/kmap/offsets.hpp"

namespace vspc {

/// Mean kernel-map column density per offset L1 norm.
struct DensityProfile {
  std::vector<int> l1_values;   ///< 0, step, ..., L1NormMax
  std::vector<double> density;  ///< mean over the offsets of each l1 value
  std::vector<std::size_t> counts;  ///< per offset k
  std::size_t n_out = 0;

  double at_l1(int l1) const {
    for (std::size_t i = 0; i < l1_values.size(); ++i)
      if (l1_values[i] == l1) return density[i];
    detail::fail("density profile has no l1 = ", l1);
  }

  bool non_increasing() const {
    for (std::size_t i = 1; i < density.size(); ++i)
      if (density[i] > density[i - 1]) return false;
    return true;
  }
};

/// density(l1) = mean over offsets with that l1 of count_k / n_out; an empty
/// map has density 0 everywhere.
inline DensityProfile analyze_density(std::span<const std::size_t> counts,
                                      const std::vector<WeightOffset>& offsets, std::size_t n_out) {
  if (counts.size() != offsets.size())
    detail::fail("analyze_density: ", counts.size(), " counters for ", offsets.size(), " offsets");
  std::map<int, std::pair<double, std::size_t>> acc;
  for (std::size_t k = 0; k < offsets.size(); ++k) {
    auto& [sum, n] = acc[offsets[k].l1];
    sum += n_out == 0 ? 0.0 : static_cast<double>(counts[k]) / static_cast<double>(n_out);
    ++n;
  }
  DensityProfile p;
  p.counts.assign(counts.begin(), counts.end());
  p.n_out = n_out;
  for (const auto& [l1, sn] : acc) {
    p.l1_values.push_back(l1);
    p.density.push_back(sn.first / static_cast<double>(sn.second));
  }
  return p;
}

inline DensityProfile analyze_density(const KernelMap& map) {
  return analyze_density(map.counts, enumerate_offsets(map.kernel_size, map.step), map.n_out);
}

}  // namespace vspc
