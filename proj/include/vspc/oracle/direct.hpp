// Copyright Contributors to the vspc project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <unordered_map>
#include <vector>

#include "vspc/core/types.hpp"
#include "vspc/features/weights.hpp"
#include "vspc/kmap/offsets.hpp"

namespace vspc::oracle {

/// Literal double sum: for every output q_i and offset d_k, add f_j W_k when
/// some input p_j equals q_i + d_k. Offsets are visited in the given order
/// (weights are looked up by offset index), and each product row is summed
/// from zero before it is added to f_i.
inline FeatureMatrix eval_eq2_direct(std::span<const VoxelCoord> inputs,
                                     std::span<const VoxelCoord> outputs,
                                     const std::vector<WeightOffset>& offsets,
                                     const FeatureMatrix& f_in, const WeightTensor& w) {
  if (f_in.rows != inputs.size()) detail::fail("eval_eq2_direct: feature rows != input count");
  if (f_in.channels != w.c_in) detail::fail("eval_eq2_direct: channel mismatch");
  if (w.volume != offsets.size()) detail::fail("eval_eq2_direct: weight count != offset count");

  std::unordered_map<VoxelCoord, std::size_t, VoxelCoordHash> index;
  index.reserve(inputs.size() * 2);
  for (std::size_t j = 0; j < inputs.size(); ++j) index.emplace(inputs[j], j);

  const std::size_t cin = w.c_in, cout = w.c_out;
  FeatureMatrix out(outputs.size(), cout);
  std::vector<float> term(cout);
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < offsets.size(); ++k) {
      const auto it = index.find(outputs[i] + offsets[k].delta);
      if (it == index.end()) continue;
      const auto f = f_in.row(it->second);
      const auto wk = w.matrix(static_cast<std::size_t>(offsets[k].index));
      std::fill(term.begin(), term.end(), 0.0f);
      for (std::size_t c = 0; c < cin; ++c)
        for (std::size_t o = 0; o < cout; ++o) term[o] += f[c] * wk[c * cout + o];
      for (std::size_t o = 0; o < cout; ++o) dst[o] += term[o];
    }
  }
  return out;
}

}  // namespace vspc::oracle
