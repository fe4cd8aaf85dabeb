// Copyright Contributors to the vspc project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vspc/core/io.hpp"
#include "vspc/core/rng.hpp"
#include "vspc/core/types.hpp"
#include "vspc/kmap/offsets.hpp"

namespace vspc {

/// K^3 matrices of c_in x c_out, stored back to back in offset order.
struct WeightTensor {
  std::size_t volume = 0;
  std::size_t c_in = 0;
  std::size_t c_out = 0;
  std::vector<float> data;

  WeightTensor() = default;
  WeightTensor(std::size_t k_volume, std::size_t cin, std::size_t cout)
      : volume(k_volume), c_in(cin), c_out(cout), data(k_volume * cin * cout, 0.0f) {}

  std::span<float> matrix(std::size_t k) { return {data.data() + k * c_in * c_out, c_in * c_out}; }
  std::span<const float> matrix(std::size_t k) const {
    return {data.data() + k * c_in * c_out, c_in * c_out};
  }
};

/// Uniform in [-a, a) with a = 1 / sqrt(c_in * K^3), drawn in storage order
/// from SplitMix64(stream_seed(seed, stream)).
inline WeightTensor random_weights(int kernel_size, std::size_t c_in, std::size_t c_out,
                                   std::uint64_t seed, std::uint64_t stream = 0) {
  WeightTensor w(static_cast<std::size_t>(kernel_volume(kernel_size)), c_in, c_out);
  SplitMix64 g(stream_seed(seed, stream));
  const float a = 1.0f / std::sqrt(static_cast<float>(c_in * w.volume));
  for (auto& v : w.data) v = g.symmetric(a);
  return w;
}

/// Weights in the binary point-cloud format: one record per matrix row,
/// coordinates (k, row, 0), features the c_out row values.
inline void save_weights(const std::string& path, const WeightTensor& w) {
  PointCloud c;
  c.features = FeatureMatrix(w.volume * w.c_in, w.c_out, w.data);
  c.points.resize(w.volume * w.c_in);
  for (std::size_t k = 0; k < w.volume; ++k)
    for (std::size_t r = 0; r < w.c_in; ++r)
      c.points[k * w.c_in + r] = {static_cast<double>(k), static_cast<double>(r), 0.0};
  write_point_cloud(path, c, true);
}

inline WeightTensor load_weights(const std::string& path, int kernel_size, std::size_t c_in,
                                 std::size_t c_out) {
  const PointCloud c = read_point_cloud(path);
  const auto volume = static_cast<std::size_t>(kernel_volume(kernel_size));
  if (c.points.size() != volume * c_in || c.features.channels != c_out) {
    detail::fail(path, ": weight shape ", c.points.size(), "x", c.features.channels,
                 " does not match K=", kernel_size, " C_in=", c_in, " C_out=", c_out);
  }
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    if (c.points[i][0] != static_cast<double>(i / c_in) ||
        c.points[i][1] != static_cast<double>(i % c_in)) {
      detail::fail(path, ": record ", i, " has an unexpected (k, row) header");
    }
  }
  WeightTensor w(volume, c_in, c_out);
  w.data = c.features.data;
  return w;
}

}  // namespace vspc
