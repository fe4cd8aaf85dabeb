// Copyright Contributors to the vspc project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "support.hpp"

namespace vspc {
namespace {

using test::W32;

PackSpec margin_spec(int margin) {
  PackSpec s;
  s.margin = margin;
  return s;
}

BuildOptions checked() {
  BuildOptions o;
  o.validate = true;
  o.grain = 7;  // odd chunking exercises chunk edges
  return o;
}

// offsets

TEST(Offsets, DeltaFiveTwo) {
  const auto o = enumerate_offsets(5, 2);
  ASSERT_EQ(o.size(), 125u);
  std::set<int> comps;
  for (const auto& w : o)
    for (std::size_t a = 0; a < 3; ++a) comps.insert(w.delta[a]);
  EXPECT_EQ(comps, (std::set<int>{-4, -2, 0, 2, 4}));
  EXPECT_EQ(l1_norm_max(5, 2), 12);
}

TEST(Offsets, KernelOneAndThree) {
  const auto one = enumerate_offsets(1, 1);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].delta, (VoxelCoord{0, 0, 0}));
  const auto three = enumerate_offsets(3, 1);
  EXPECT_EQ(three.size(), 27u);
  EXPECT_EQ(l1_norm_max(3, 1), 3);
}

TEST(Offsets, CanonicalOrderAndIndices) {
  const auto o = enumerate_offsets(3, 2);
  for (std::size_t k = 0; k < o.size(); ++k) {
    EXPECT_EQ(o[k].index, static_cast<int>(k));
    EXPECT_EQ(o[k].l1, std::abs(o[k].delta.x) + std::abs(o[k].delta.y) + std::abs(o[k].delta.z));
    if (k > 0) { EXPECT_LT(o[k - 1].delta, o[k].delta); }
  }
  EXPECT_EQ(o[static_cast<std::size_t>(center_offset_index(3))].delta, (VoxelCoord{0, 0, 0}));
  for (std::size_t k = 0; k < o.size(); ++k)
    EXPECT_EQ(o[static_cast<std::size_t>(mirror_offset_index(3, static_cast<int>(k)))].delta,
              (VoxelCoord{0, 0, 0}) - o[k].delta);
}

TEST(Offsets, EvenOrNonPositiveKernelRejected) {
  EXPECT_THROW((void)enumerate_offsets(4, 1), Error);
  EXPECT_THROW((void)enumerate_offsets(0, 1), Error);
  EXPECT_THROW((void)enumerate_offsets(-3, 1), Error);
  EXPECT_THROW((void)enumerate_offsets(3, 0), Error);
}

TEST(Groups, GroupZeroForKThree) {
  const auto g = group_offsets(enumerate_offsets(3, 1));
  ASSERT_EQ(g.size(), 9u);
  ASSERT_EQ(g[0].members.size(), 3u);
  EXPECT_EQ(g[0].members[0].delta, (VoxelCoord{-1, -1, -1}));
  EXPECT_EQ(g[0].members[1].delta, (VoxelCoord{-1, -1, 0}));
  EXPECT_EQ(g[0].members[2].delta, (VoxelCoord{-1, -1, 1}));
  EXPECT_EQ(g[0].anchor.delta, (VoxelCoord{-1, -1, -1}));
}

TEST(Groups, PartitionProperty) {
  for (int k : {1, 3, 5, 7}) {
    for (int s : {1, 2, 4}) {
      const auto offs = enumerate_offsets(k, s);
      const auto g = group_offsets(offs);
      ASSERT_EQ(g.size(), static_cast<std::size_t>(k * k));
      std::set<int> seen;
      for (const auto& grp : g) {
        ASSERT_EQ(grp.members.size(), static_cast<std::size_t>(k));
        for (std::size_t m = 0; m < grp.members.size(); ++m) {
          EXPECT_TRUE(seen.insert(grp.members[m].index).second);
          EXPECT_EQ(grp.members[m].delta.x, grp.anchor.delta.x);
          EXPECT_EQ(grp.members[m].delta.y, grp.anchor.delta.y);
          if (m > 0) { EXPECT_EQ(grp.members[m].delta.z - grp.members[m - 1].delta.z, s); }
        }
        EXPECT_EQ(grp.anchor.delta, grp.members[0].delta);
      }
      EXPECT_EQ(seen.size(), offs.size());
    }
  }
}

TEST(Groups, CenterGroupOfFiveTwo) {
  const auto g = group_offsets(enumerate_offsets(5, 2));
  ASSERT_EQ(g.size(), 25u);
  const auto it = std::find_if(g.begin(), g.end(), [](const OffsetGroup& x) {
    return x.anchor.delta.x == 0 && x.anchor.delta.y == 0;
  });
  ASSERT_NE(it, g.end());
  std::vector<int> z;
  for (const auto& m : it->members) z.push_back(m.delta.z);
  EXPECT_EQ(z, (std::vector<int>{-4, -2, 0, 2, 4}));
}

// sort / downsample

TEST(SortPacked, IdentityReverseAndRandom) {
  const PackSpec s;
  PackedCloud<W32> sorted{{1}, {5}, {9}};
  auto r = sort_packed(std::span<const PackedCoord<W32>>(sorted));
  EXPECT_EQ(r.permutation, (std::vector<std::size_t>{0, 1, 2}));
  PackedCloud<W32> rev{{9}, {5}, {1}};
  r = sort_packed(std::span<const PackedCoord<W32>>(rev));
  EXPECT_EQ(r.permutation, (std::vector<std::size_t>{2, 1, 0}));

  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> d(0, 255);
  std::vector<VoxelCoord> v(20000);
  for (auto& c : v) c = {d(rng), d(rng), d(rng)};
  const auto packed = test::pack_all(v, s);
  r = sort_packed(std::span<const PackedCoord<W32>>(packed));
  auto lex = v;
  std::stable_sort(lex.begin(), lex.end());
  EXPECT_EQ(test::unpack_all<W32>(r.coords, s), lex);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(packed[r.permutation[i]], r.coords[i]);
  // Stability: equal keys keep their original relative order.
  for (std::size_t i = 1; i < v.size(); ++i)
    if (r.coords[i] == r.coords[i - 1]) { EXPECT_LT(r.permutation[i - 1], r.permutation[i]); }
}

TEST(Downsample, IdentityAndCollapse) {
  const PackSpec s;
  PackedCloud<W32> u{{3}, {7}, {100}};
  EXPECT_EQ(downsample(std::span<const PackedCoord<W32>>(u), s, 0), u);
  const std::vector<VoxelCoord> two{{2, 2, 2}, {3, 3, 3}};
  const auto p = test::pack_all(two, s);
  const auto d = downsample(std::span<const PackedCoord<W32>>(p), s, 2);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(unpack(d[0], s), (VoxelCoord{0, 0, 0}));
}

TEST(Downsample, MatchesSetOracle) {
  const PackSpec s;
  for (int m = 1; m <= 3; ++m) {
    const auto v = test::random_voxels(10000, 200, 0, 100 + static_cast<std::uint64_t>(m));
    const auto p = test::pack_all(v, s);
    const auto d = downsample(std::span<const PackedCoord<W32>>(p), s, m);
    EXPECT_TRUE(is_strictly_sorted(std::span<const PackedCoord<W32>>(d)));
    EXPECT_EQ(test::unpack_all<W32>(d, s), test::round_down_oracle(v, 1 << m));
  }
}

// plans

TEST(Plan, HybridPartitionKFiveTThree) {
  const auto p = DataflowPlan::from_threshold(5, 1, 3);
  EXPECT_EQ(p.k_dense(), 25u);
  EXPECT_EQ(p.k_sparse(), 100u);
  EXPECT_EQ(p.layout(), Layout::Hybrid);
}

TEST(Plan, Degenerate) {
  const auto ws = DataflowPlan::from_threshold(5, 1, 0);
  EXPECT_EQ(ws.k_dense(), 0u);
  EXPECT_EQ(ws.layout(), Layout::WeightStationary);
  const auto os = DataflowPlan::from_threshold(5, 1, 7);
  EXPECT_EQ(os.k_sparse(), 0u);
  EXPECT_EQ(os.k_dense(), 125u);
  EXPECT_EQ(os.layout(), Layout::OutputStationary);
  EXPECT_THROW((void)DataflowPlan::from_threshold(5, 1, 8), Error);
  EXPECT_THROW((void)DataflowPlan::from_threshold(5, 2, 3), Error);  // not a multiple of 2
}

TEST(Plan, CandidateCounts) {
  auto hybrid = [](int k, int s) {
    auto c = DataflowPlan::candidate_thresholds(k, s);
    return c.size() - 2;
  };
  EXPECT_EQ(hybrid(3, 1), 3u);
  EXPECT_EQ(hybrid(5, 1), 6u);
  EXPECT_EQ(DataflowPlan::candidate_thresholds(1, 1), (std::vector<int>{0, 1}));
  for (int k : {3, 5})
    for (int s : {1, 2})
      for (int t : DataflowPlan::candidate_thresholds(k, s)) {
        const auto p = DataflowPlan::from_threshold(k, s, t);
        EXPECT_EQ(p.k_dense() + p.k_sparse(), static_cast<std::size_t>(kernel_volume(k)));
        for (int d : p.dense) EXPECT_LT(enumerate_offsets(k, s)[static_cast<std::size_t>(d)].l1, t);
      }
}

// builders

struct Instance {
  std::vector<VoxelCoord> in_v, out_v;
  PackedCloud<W32> in, out;
  PackSpec spec;
};

Instance make_instance(std::size_t n, int kernel, int in_depth, int layer_stride,
                       std::uint64_t seed, bool blob = true) {
  Instance x;
  const int step = 1 << in_depth;
  x.spec = margin_spec(std::max(8, (kernel - 1) / 2 * step * 2));
  auto base = blob ? test::random_blob(n, {500, 500, 120}, 160, seed)
                   : test::random_voxels(n, 40, 100, seed);
  if (in_depth > 0) base = test::round_down_oracle(base, step);
  x.in_v = base;
  x.out_v = layer_stride == 1 ? base : test::round_down_oracle(base, step * layer_stride);
  x.in = test::pack_all(x.in_v, x.spec);
  x.out = test::pack_all(x.out_v, x.spec);
  return x;
}

TEST(Builders, ZDeltaWorkedExample) {
  const auto spec = margin_spec(2);
  const auto offs = enumerate_offsets(3, 1);
  const auto groups = group_offsets(offs);
  const PackedCloud<W32> out{pack<W32>({50, 4, 5}, spec)};
  const PackedCloud<W32> in{pack<W32>({49, 3, 4}, spec), pack<W32>({49, 3, 6}, spec),
                            pack<W32>({50, 4, 5}, spec)};
  const auto plan = DataflowPlan::output_stationary(3, 1);
  const auto r = build_kmap_zdelta<W32>(in, out, offs, groups, spec, plan, checked());
  EXPECT_EQ(r.stats.binary_search_count, 9u);
  const auto t = canonical_table(r.map);
  EXPECT_EQ(t[0], 0);          // (-1,-1,-1) -> (49,3,4)
  EXPECT_EQ(t[1], kNoMatch);   // (-1,-1,0)  -> (49,3,5)
  EXPECT_EQ(t[2], 1);          // (-1,-1,1)  -> (49,3,6)
  EXPECT_EQ(t[13], 2);
  EXPECT_EQ(r.map.counts[0] + r.map.counts[1] + r.map.counts[2], 2u);
}

TEST(Builders, TwoVoxelBruteForceCase) {
  const std::vector<VoxelCoord> in{{0, 0, 0}, {0, 0, 1}}, out{{0, 0, 0}};
  const auto offs = enumerate_offsets(3, 1);
  const auto m = build_kmap_bruteforce(in, out, offs);
  std::vector<int> matched;
  for (std::size_t k = 0; k < 27; ++k)
    if (m.os_table[k] != kNoMatch) matched.push_back(static_cast<int>(k));
  EXPECT_EQ(matched, (std::vector<int>{13, 14}));
  const std::vector<VoxelCoord> single{{0, 0, 0}};
  const auto m1 = build_kmap_bruteforce(single, single, offs);
  EXPECT_EQ(std::count_if(m1.os_table.begin(), m1.os_table.end(), [](auto e) { return e != kNoMatch; }), 1);
  EXPECT_EQ(m1.os_table[13], 0);
}

TEST(Builders, EmptyOutputs) {
  const auto spec = margin_spec(2);
  const auto offs = enumerate_offsets(3, 1);
  const PackedCloud<W32> in{pack<W32>({5, 5, 5}, spec)}, out;
  for (int t : {0, 2, 4}) {
    const auto plan = DataflowPlan::from_threshold(3, 1, t);
    const auto z = build_kmap_zdelta<W32>(in, out, offs, group_offsets(offs), spec, plan, checked());
    const auto b = build_kmap_bsearch<W32>(in, out, offs, spec, plan, checked());
    EXPECT_EQ(z.stats.binary_search_count, 0u);
    EXPECT_EQ(b.stats.binary_search_count, 0u);
    EXPECT_EQ(post_process(z.map, plan).n_out, 0u);
  }
}

TEST(Builders, EquivalenceAndCountLaws) {
  std::uint64_t seed = 1;
  for (std::size_t n : {1000u, 10000u}) {
    for (int k : {3, 5}) {
      for (int depth : {0, 1}) {
        for (int ls : {1, 2}) {
          const auto x = make_instance(n, k, depth, ls, seed++);
          const int step = 1 << depth;
          const auto offs = enumerate_offsets(k, step);
          const auto truth = build_kmap_bruteforce(x.in_v, x.out_v, offs);
          for (int t : {0, step, l1_norm_max(k, step) + 1}) {
            const auto plan = DataflowPlan::from_threshold(k, step, t);
            auto z = build_kmap_zdelta<W32>(x.in, x.out, offs, group_offsets(offs), x.spec, plan,
                                            checked());
            auto b = build_kmap_bsearch<W32>(x.in, x.out, offs, x.spec, plan, checked());
            const std::uint64_t nq = x.out.size();
            EXPECT_EQ(z.stats.binary_search_count, nq * static_cast<std::uint64_t>(k * k));
            EXPECT_EQ(b.stats.binary_search_count, nq * static_cast<std::uint64_t>(k * k * k));
            EXPECT_LE(z.stats.max_unit_probes, static_cast<std::uint64_t>(k - 1));
            EXPECT_TRUE(same_mapping(z.map, truth)) << "n=" << n << " K=" << k << " t=" << t;
            EXPECT_TRUE(same_mapping(b.map, truth));
            EXPECT_EQ(z.map.counts, truth.counts);
            const auto zf = post_process(std::move(z.map), plan);
            EXPECT_TRUE(zf.finalized);
            EXPECT_TRUE(same_mapping(zf, truth));
            EXPECT_EQ(map_checksum(zf), map_checksum(truth));
          }
        }
      }
    }
  }
}

TEST(Builders, SubmanifoldCenterColumnIsIdentity) {
  const auto x = make_instance(2000, 3, 0, 1, 42);
  const auto offs = enumerate_offsets(3, 1);
  const auto plan = DataflowPlan::output_stationary(3, 1);
  const auto r = build_kmap_zdelta<W32>(x.in, x.out, offs, group_offsets(offs), x.spec, plan, checked());
  for (std::size_t i = 0; i < x.out.size(); ++i)
    EXPECT_EQ(r.map.os_table[i * 27 + 13], static_cast<std::int32_t>(i));
  EXPECT_EQ(r.map.counts[13], x.out.size());
}

TEST(Builders, CountersMatchNonSentinelEntries) {
  const auto x = make_instance(3000, 5, 0, 2, 9);
  const auto offs = enumerate_offsets(5, 1);
  const auto plan = DataflowPlan::from_threshold(5, 1, 3);
  auto r = build_kmap_zdelta<W32>(x.in, x.out, offs, group_offsets(offs), x.spec, plan, checked());
  const auto m = post_process(std::move(r.map), plan);
  const auto t = canonical_table(m);
  for (std::size_t k = 0; k < 125; ++k) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < m.n_out; ++i) {
      const auto e = t[i * 125 + k];
      c += e != kNoMatch;
      if (e != kNoMatch) {
        EXPECT_GE(e, 0);
        EXPECT_LT(static_cast<std::size_t>(e), m.n_in);
      }
    }
    EXPECT_EQ(c, m.counts[k]);
  }
  for (const auto& p : m.ws_pairs) EXPECT_NE(p.in, kNoMatch);
}

TEST(Builders, ValidationRejectsBadInputs) {
  const auto spec = margin_spec(2);
  const auto offs = enumerate_offsets(3, 1);
  const auto groups = group_offsets(offs);
  const auto plan = DataflowPlan::output_stationary(3, 1);
  const PackedCloud<W32> unsorted{pack<W32>({5, 5, 6}, spec), pack<W32>({5, 5, 5}, spec)};
  const PackedCloud<W32> dup{pack<W32>({5, 5, 5}, spec), pack<W32>({5, 5, 5}, spec)};
  const PackedCloud<W32> edge{pack<W32>({1, 5, 5}, spec)};
  const PackedCloud<W32> ok{pack<W32>({5, 5, 5}, spec)};
  EXPECT_THROW((void)build_kmap_zdelta<W32>(unsorted, ok, offs, groups, spec, plan, checked()), Error);
  EXPECT_THROW((void)build_kmap_zdelta<W32>(dup, ok, offs, groups, spec, plan, checked()), Error);
  EXPECT_THROW((void)build_kmap_bsearch<W32>(ok, edge, offs, spec, plan, checked()), Error);
  // Step-2 offsets over inputs at odd z: a key lies between two queries.
  const auto spec4 = margin_spec(4);
  const auto offs2 = enumerate_offsets(3, 2);
  const PackedCloud<W32> odd{pack<W32>({8, 8, 8}, spec4), pack<W32>({8, 8, 9}, spec4)};
  const PackedCloud<W32> q{pack<W32>({8, 8, 8}, spec4)};
  EXPECT_THROW((void)build_kmap_zdelta<W32>(odd, q, offs2, group_offsets(offs2), spec4,
                                            DataflowPlan::output_stationary(3, 2), checked()),
               Error);
}

TEST(Builders, PlanMismatchRejected) {
  const auto spec = margin_spec(2);
  const auto offs = enumerate_offsets(3, 1);
  const PackedCloud<W32> ok{pack<W32>({5, 5, 5}, spec)};
  EXPECT_THROW((void)build_kmap_bsearch<W32>(ok, ok, offs, spec, DataflowPlan::output_stationary(5, 1)),
               Error);
}

TEST(Builders, SixtyFourBitMatchesThirtyTwo) {
  const auto x = make_instance(3000, 3, 0, 1, 77);
  PackSpec s64 = x.spec;
  s64.word_width = 64;
  s64.bits = {20, 20, 20};
  const auto in64 = test::pack_all<std::uint64_t>(x.in_v, s64);
  const auto offs = enumerate_offsets(3, 1);
  const auto plan = DataflowPlan::from_threshold(3, 1, 2);
  auto a = build_kmap_zdelta<std::uint64_t>(in64, in64, offs, group_offsets(offs), s64, plan, checked());
  auto b = build_kmap_zdelta<W32>(x.in, x.in, offs, group_offsets(offs), x.spec, plan, checked());
  EXPECT_EQ(map_checksum(post_process(std::move(a.map), plan)),
            map_checksum(post_process(std::move(b.map), plan)));
}

// post_process

TEST(PostProcess, StagesPerPlan) {
  const auto x = make_instance(1500, 5, 0, 1, 5);
  const auto offs = enumerate_offsets(5, 1);
  const auto truth = build_kmap_bruteforce(x.in_v, x.out_v, offs);
  for (int t : {0, 3, 7}) {
    const auto plan = DataflowPlan::from_threshold(5, 1, t);
    auto r = build_kmap_bsearch<W32>(x.in, x.out, offs, x.spec, plan, checked());
    EXPECT_EQ(r.map.finalized, t == 7);
    PostProcessStats ps;
    const auto m = post_process(std::move(r.map), plan, &ps);
    EXPECT_TRUE(m.finalized);
    EXPECT_EQ(m.k_dense(), plan.k_dense());
    EXPECT_EQ(m.k_sparse(), plan.k_sparse());
    EXPECT_TRUE(m.staged_dense.empty());
    EXPECT_TRUE(m.staged_sparse.empty());
    EXPECT_EQ(m.os_table.size(), m.n_out * m.k_dense());
    if (t == 7) {
      EXPECT_EQ(ps.transposed_entries + ps.filtered_entries, 0u);
    } else {
      EXPECT_EQ(ps.transposed_entries, m.n_out * plan.k_dense());
      EXPECT_EQ(ps.filtered_entries, m.n_out * plan.k_sparse());
    }
    EXPECT_TRUE(same_mapping(m, truth));
    for (std::size_t s = 0; s < m.k_sparse(); ++s) {
      const auto p = m.pairs(s);
      EXPECT_EQ(p.size(), m.counts[static_cast<std::size_t>(m.sparse[s])]);
      for (std::size_t e = 1; e < p.size(); ++e) EXPECT_LT(p[e - 1].out, p[e].out);
    }
  }
}

TEST(PostProcess, PlanMismatchRejected) {
  const auto x = make_instance(200, 3, 0, 1, 6);
  const auto offs = enumerate_offsets(3, 1);
  const auto plan = DataflowPlan::from_threshold(3, 1, 2);
  auto r = build_kmap_bsearch<W32>(x.in, x.out, offs, x.spec, plan);
  EXPECT_THROW((void)post_process(r.map, DataflowPlan::from_threshold(3, 1, 1)), Error);
}

// symmetry halving

TEST(Halving, RoundTripAndStoredCount) {
  for (int k : {3, 5}) {
    const auto x = make_instance(3000, k, 0, 1, 50 + static_cast<std::uint64_t>(k));
    const auto offs = enumerate_offsets(k, 1);
    const auto plan = DataflowPlan::weight_stationary(k, 1);
    auto r = build_kmap_zdelta<W32>(x.in, x.out, offs, group_offsets(offs), x.spec, plan, checked());
    const auto full = post_process(std::move(r.map), plan);
    const auto half = halve_symmetric(full, true);
    const auto kv = static_cast<std::size_t>(kernel_volume(k));
    EXPECT_EQ(half.k_sparse(), (kv + 1) / 2);
    std::size_t expect_pairs = 0;
    for (std::size_t kk = 0; kk <= kv / 2; ++kk) expect_pairs += full.counts[kk];
    EXPECT_EQ(stored_pair_count(half), expect_pairs);
    EXPECT_LT(stored_pair_count(half), stored_pair_count(full));
    const auto back = reconstruct_symmetric(half);
    EXPECT_EQ(back.sparse, full.sparse);
    EXPECT_EQ(back.ws_begin, full.ws_begin);
    EXPECT_EQ(back.ws_pairs, full.ws_pairs);
    EXPECT_TRUE(same_mapping(half, full));
  }
}

TEST(Halving, KThreeStoresThirteenPlusCenter) {
  const auto x = make_instance(500, 3, 0, 1, 61);
  const auto offs = enumerate_offsets(3, 1);
  const auto plan = DataflowPlan::weight_stationary(3, 1);
  auto r = build_kmap_bsearch<W32>(x.in, x.out, offs, x.spec, plan);
  const auto half = halve_symmetric(post_process(std::move(r.map), plan), true);
  ASSERT_EQ(half.k_sparse(), 14u);
  EXPECT_EQ(half.sparse.back(), 13);
}

TEST(Halving, NonSubmanifoldRejected) {
  const auto x = make_instance(500, 3, 0, 2, 62);
  const auto offs = enumerate_offsets(3, 1);
  const auto plan = DataflowPlan::weight_stationary(3, 1);
  auto r = build_kmap_bsearch<W32>(x.in, x.out, offs, x.spec, plan);
  EXPECT_THROW((void)halve_symmetric(post_process(std::move(r.map), plan), false), Error);
}

// dump

TEST(Dump, GoldenFormat) {
  const std::vector<VoxelCoord> in{{0, 0, 0}, {0, 0, 1}}, out{{0, 0, 0}};
  const auto m = build_kmap_bruteforce(in, out, enumerate_offsets(1, 1));
  std::ostringstream s;
  dump_kernel_map(s, m);
  EXPECT_EQ(s.str(), "kmap v1 n_out=1 K=1 layout=os\nk=0 l1=0 count=1\n0 0\n");
}

}  // namespace
}  // namespace vspc
