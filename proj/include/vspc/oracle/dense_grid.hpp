// Copyright Contributors to the vspc project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "vspc/core/types.hpp"
#include "vspc/features/weights.hpp"
#include "vspc/kmap/offsets.hpp"

namespace vspc::oracle {

inline constexpr std::size_t kDefaultDenseGridCap = std::size_t{1} << 30;

/// A sparse tensor scattered onto a zero-filled box of voxels.
class DenseGrid {
 public:
  DenseGrid(VoxelCoord lo, VoxelCoord hi, std::size_t channels, std::size_t cap_bytes)
      : lo_(lo), channels_(channels) {
    std::size_t cells = 1;
    for (std::size_t a = 0; a < 3; ++a) {
      extent_[a] = static_cast<std::size_t>(std::int64_t{hi[a]} - lo[a] + 1);
      cells *= extent_[a];
    }
    const std::size_t bytes = cells * (channels * sizeof(float) + 1);
    if (bytes > cap_bytes) {
      detail::fail_capacity("dense grid oracle: ", extent_[0], "x", extent_[1], "x", extent_[2],
                            " grid with ", channels, " channels needs ", bytes,
                            " bytes, over the ", cap_bytes,
                            "-byte cap; use a smaller instance");
    }
    values_.assign(cells * channels, 0.0f);
    occupied_.assign(cells, 0);
  }

  bool contains(VoxelCoord v) const {
    for (std::size_t a = 0; a < 3; ++a)
      if (v[a] < lo_[a] || static_cast<std::size_t>(v[a] - lo_[a]) >= extent_[a]) return false;
    return true;
  }

  std::size_t cell(VoxelCoord v) const {
    return (static_cast<std::size_t>(v.x - lo_.x) * extent_[1] + static_cast<std::size_t>(v.y - lo_.y)) *
               extent_[2] +
           static_cast<std::size_t>(v.z - lo_.z);
  }

  void set(VoxelCoord v, std::span<const float> f) {
    const std::size_t c = cell(v);
    std::copy(f.begin(), f.end(), values_.begin() + static_cast<std::ptrdiff_t>(c * channels_));
    occupied_[c] = 1;
  }

  bool occupied(VoxelCoord v) const { return contains(v) && occupied_[cell(v)]; }

  std::span<const float> at(VoxelCoord v) const {
    return {values_.data() + cell(v) * channels_, channels_};
  }

 private:
  VoxelCoord lo_;
  std::array<std::size_t, 3> extent_{};
  std::size_t channels_;
  std::vector<float> values_;
  std::vector<std::uint8_t> occupied_;
};

struct DenseResult {
  std::vector<VoxelCoord> outputs;  ///< lexicographic order
  FeatureMatrix features;
};

/// Strided 3D cross-correlation on the densified input. Output sites follow
/// sparse-convolution rules rather than dense ones: with layer stride 1 the
/// sites are exactly the input sites; otherwise they are the distinct
/// floor(p / s_q) * s_q of the inputs, s_q = s_p * s_l. Empty cells hold the
/// zero vector and contribute nothing, so they are skipped.
inline DenseResult eval_dense_grid(std::span<const VoxelCoord> inputs, const FeatureMatrix& f_in,
                                   const WeightTensor& w, int kernel_size, int input_stride,
                                   int layer_stride,
                                   std::size_t cap_bytes = kDefaultDenseGridCap) {
  check_kernel_size(kernel_size, input_stride);
  if (layer_stride < 1) detail::fail("eval_dense_grid: layer stride must be positive");
  if (f_in.rows != inputs.size() || f_in.channels != w.c_in)
    detail::fail("eval_dense_grid: feature shape mismatch");
  const auto offsets = enumerate_offsets(kernel_size, input_stride);
  DenseResult res;
  res.features = FeatureMatrix(0, w.c_out);
  if (inputs.empty()) return res;

  VoxelCoord lo = inputs[0], hi = inputs[0];
  for (const auto& v : inputs)
    for (std::size_t a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], v[a]);
      hi[a] = std::max(hi[a], v[a]);
    }
  DenseGrid grid(lo, hi, w.c_in, cap_bytes);
  for (std::size_t j = 0; j < inputs.size(); ++j) grid.set(inputs[j], f_in.row(j));

  if (layer_stride == 1) {
    res.outputs.assign(inputs.begin(), inputs.end());
    std::sort(res.outputs.begin(), res.outputs.end());
  } else {
    const std::int64_t s = std::int64_t{input_stride} * layer_stride;
    auto site = [s](VoxelCoord v) {
      return VoxelCoord{static_cast<std::int32_t>(detail::floor_div(v.x, s) * s),
                        static_cast<std::int32_t>(detail::floor_div(v.y, s) * s),
                        static_cast<std::int32_t>(detail::floor_div(v.z, s) * s)};
    };
    // Occupancy of the coarse lattice, walked in lexicographic order.
    const VoxelCoord clo = site(lo), chi = site(hi);
    std::array<std::size_t, 3> ext{};
    for (std::size_t a = 0; a < 3; ++a) ext[a] = static_cast<std::size_t>((chi[a] - clo[a]) / s + 1);
    std::vector<std::uint8_t> coarse(ext[0] * ext[1] * ext[2], 0);
    for (const auto& v : inputs) {
      const VoxelCoord c = site(v);
      coarse[(static_cast<std::size_t>((c.x - clo.x) / s) * ext[1] +
              static_cast<std::size_t>((c.y - clo.y) / s)) * ext[2] +
             static_cast<std::size_t>((c.z - clo.z) / s)] = 1;
    }
    for (std::size_t x = 0; x < ext[0]; ++x)
      for (std::size_t y = 0; y < ext[1]; ++y)
        for (std::size_t z = 0; z < ext[2]; ++z)
          if (coarse[(x * ext[1] + y) * ext[2] + z])
            res.outputs.push_back({static_cast<std::int32_t>(clo.x + static_cast<std::int64_t>(x) * s),
                                   static_cast<std::int32_t>(clo.y + static_cast<std::int64_t>(y) * s),
                                   static_cast<std::int32_t>(clo.z + static_cast<std::int64_t>(z) * s)});
  }

  const std::size_t cin = w.c_in, cout = w.c_out;
  res.features = FeatureMatrix(res.outputs.size(), cout);
  std::vector<float> term(cout);
  for (std::size_t i = 0; i < res.outputs.size(); ++i) {
    auto dst = res.features.row(i);
    for (std::size_t k = 0; k < offsets.size(); ++k) {
      const VoxelCoord p = res.outputs[i] + offsets[k].delta;
      if (!grid.occupied(p)) continue;
      const auto f = grid.at(p);
      const auto wk = w.matrix(k);
      std::fill(term.begin(), term.end(), 0.0f);
      for (std::size_t c = 0; c < cin; ++c)
        for (std::size_t o = 0; o < cout; ++o) term[o] += f[c] * wk[c * cout + o];
      for (std::size_t o = 0; o < cout; ++o) dst[o] += term[o];
    }
  }
  return res;
}

}  // namespace vspc::oracle
