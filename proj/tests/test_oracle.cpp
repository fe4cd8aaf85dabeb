// Copyright Contributors to the vspc project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "support.hpp"

namespace vspc {
namespace {

using test::W32;

TEST(Direct, IdentityCase) {
  const auto v = test::random_voxels(50, 10, 0, 1);
  const auto f = random_features(v.size(), 3, 1);
  WeightTensor w(1, 3, 3);
  for (std::size_t i = 0; i < 3; ++i) w.matrix(0)[i * 3 + i] = 1.0f;
  EXPECT_EQ(oracle::eval_eq2_direct(v, v, enumerate_offsets(1, 1), f, w), f);
}

TEST(Direct, TwoVoxelExpansion) {
  const std::vector<VoxelCoord> in{{0, 0, 0}, {0, 0, 1}}, out{{0, 0, 0}};
  const auto f = random_features(2, 2, 2);
  const auto w = random_weights(3, 2, 3, 2);
  const auto got = oracle::eval_eq2_direct(in, out, enumerate_offsets(3, 1), f, w);
  for (std::size_t o = 0; o < 3; ++o) {
    float a = 0, b = 0;
    for (std::size_t c = 0; c < 2; ++c) {
      a += f.at(0, c) * w.matrix(13)[c * 3 + o];
      b += f.at(1, c) * w.matrix(14)[c * 3 + o];
    }
    EXPECT_EQ(got.at(0, o), 0.0f + a + b);
  }
}

TEST(Direct, ShapeErrors) {
  const std::vector<VoxelCoord> v{{0, 0, 0}};
  EXPECT_THROW((void)oracle::eval_eq2_direct(v, v, enumerate_offsets(3, 1), random_features(2, 2, 0),
                                             random_weights(3, 2, 2, 0)),
               Error);
  EXPECT_THROW((void)oracle::eval_eq2_direct(v, v, enumerate_offsets(1, 1), random_features(1, 2, 0),
                                             random_weights(3, 2, 2, 0)),
               Error);
}

TEST(DenseGrid, FullyDenseSubmanifoldIsStandardConvolution) {
  std::vector<VoxelCoord> v;
  for (int x = 0; x < 6; ++x)
    for (int y = 0; y < 5; ++y)
      for (int z = 0; z < 4; ++z) v.push_back({x, y, z});
  const std::size_t cin = 2, cout = 3;
  const auto f = random_features(v.size(), cin, 3);
  const auto w = random_weights(3, cin, cout, 3);
  const auto r = oracle::eval_dense_grid(v, f, w, 3, 1, 1);
  ASSERT_EQ(r.outputs, v);
  // Textbook zero-padded cross-correlation written out independently.
  auto idx = [](int x, int y, int z) { return static_cast<std::size_t>((x * 5 + y) * 4 + z); };
  for (int x = 0; x < 6; ++x)
    for (int y = 0; y < 5; ++y)
      for (int z = 0; z < 4; ++z)
        for (std::size_t o = 0; o < cout; ++o) {
          double s = 0;
          std::size_t k = 0;
          for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy)
              for (int dz = -1; dz <= 1; ++dz, ++k) {
                const int px = x + dx, py = y + dy, pz = z + dz;
                if (px < 0 || px >= 6 || py < 0 || py >= 5 || pz < 0 || pz >= 4) continue;
                for (std::size_t c = 0; c < cin; ++c)
                  s += double{f.at(idx(px, py, pz), c)} * double{w.matrix(k)[c * cout + o]};
              }
          EXPECT_NEAR(r.features.at(idx(x, y, z), o), s, 1e-5);
        }
}

TEST(DenseGrid, SingleVoxelOwnSiteOnly) {
  const std::vector<VoxelCoord> v{{7, -3, 2}};
  const auto f = random_features(1, 4, 4);
  const auto w = random_weights(3, 4, 2, 4);
  const auto r = oracle::eval_dense_grid(v, f, w, 3, 1, 1);
  ASSERT_EQ(r.outputs, v);
  FeatureMatrix wc(4, 2, std::vector<float>(w.matrix(13).begin(), w.matrix(13).end()));
  EXPECT_EQ(r.features, gemm(f, wc));
}

TEST(DenseGrid, MemoryCapRefuses) {
  const std::vector<VoxelCoord> v{{0, 0, 0}, {1000, 1000, 1000}};
  try {
    (void)oracle::eval_dense_grid(v, random_features(2, 4, 0), random_weights(3, 4, 4, 0), 3, 1, 1);
    FAIL() << "expected a capacity error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Capacity);
    EXPECT_NE(std::string(e.what()).find("smaller instance"), std::string::npos);
  }
}

TEST(DenseGrid, AgreesWithDirectAndEngine) {
  PackSpec spec;
  spec.margin = 4;
  std::uint64_t seed = 20;
  for (int ls : {1, 2}) {
    for (int rep = 0; rep < 4; ++rep) {
      auto v = test::random_voxels(1500, 32, 10, seed++);
      const auto f = random_features(v.size(), 4, seed);
      const auto w = random_weights(3, 4, 6, seed);
      const auto dense = oracle::eval_dense_grid(v, f, w, 3, 1, ls);
      const auto sites = ls == 1 ? v : test::round_down_oracle(v, ls);
      EXPECT_EQ(dense.outputs, sites);
      const auto offs = enumerate_offsets(3, 1);
      const auto direct = oracle::eval_eq2_direct(v, sites, offs, f, w);
      EXPECT_EQ(dense.features, direct);

      const auto in = test::pack_all(v, spec);
      const auto out = ls == 1 ? in : downsample(std::span<const PackedCoord<W32>>(in), spec, 1);
      EXPECT_EQ(test::unpack_all<W32>(out, spec), dense.outputs);
      const auto plan = DataflowPlan::output_stationary(3, 1);
      auto r = build_kmap_zdelta<W32>(in, out, offs, group_offsets(offs), spec, plan);
      EXPECT_EQ(compute_features(r.map, f, w), dense.features);
    }
  }
}

TEST(DenseGrid, StridedInputs) {
  // Inputs on the stride-2 lattice, K=3 with offset step 2, stride-2 layer.
  auto base = test::random_voxels(800, 40, 0, 31);
  const auto v = test::round_down_oracle(base, 2);
  const auto f = random_features(v.size(), 3, 31);
  const auto w = random_weights(3, 3, 3, 31);
  const auto dense = oracle::eval_dense_grid(v, f, w, 3, 2, 2);
  const auto sites = test::round_down_oracle(v, 4);
  EXPECT_EQ(dense.outputs, sites);
  EXPECT_EQ(dense.features, oracle::eval_eq2_direct(v, sites, enumerate_offsets(3, 2), f, w));
}

}  // namespace
}  // namespace vspc
