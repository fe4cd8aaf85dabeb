// Copyright Contributors to the vspc project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vspc/core/io.hpp"
#include "vspc/core/quantize.hpp"
#include "vspc/features/compute.hpp"
#include "vspc/features/weights.hpp"
#include "vspc/kmap/sort.hpp"
#include "vspc/network/indexing.hpp"
#include "vspc/network/tuner.hpp"

namespace vspc {

/// A voxelized cloud ready for the engine: sorted packed coordinates with
/// their feature rows.
template <PackWord Word>
struct PreparedCloud {
  PackedCloud<Word> coords;
  FeatureMatrix features;
  VoxelCoord origin;  ///< original voxel = unpacked + origin
};

/// Quantize, average duplicate-point features, normalize into the margin
/// window, pack and sort. Clouds without features get `channels` seeded
/// random ones.
template <PackWord Word>
PreparedCloud<Word> prepare_cloud(const PointCloud& cloud, const GridSpec& grid,
                                  const PackSpec& spec, std::size_t channels,
                                  std::uint64_t seed = 0) {
  spec.validate_for<Word>();
  const auto q = quantize(cloud.points, grid);
  FeatureMatrix f;
  if (cloud.features.channels > 0) {
    if (channels != 0 && cloud.features.channels != channels)
      detail::fail("input cloud has ", cloud.features.channels, " feature channels, layer needs ",
                   channels);
    f = average_features(q, cloud.features);
  } else {
    f = random_features(q.voxels.size(), channels, seed, 0);
  }
  const auto norm = normalize_coords(q.voxels, spec);
  PackedCloud<Word> packed(norm.coords.size());
  for (std::size_t i = 0; i < packed.size(); ++i) packed[i] = pack<Word>(norm.coords[i], spec);
  auto sorted = sort_packed(std::span<const PackedCoord<Word>>(packed));

  PreparedCloud<Word> out;
  out.coords = std::move(sorted.coords);
  out.origin = norm.origin;
  out.features = FeatureMatrix(f.rows, f.channels);
  for (std::size_t i = 0; i < f.rows; ++i) {
    const auto src = f.row(sorted.permutation[i]);
    std::copy(src.begin(), src.end(), out.features.row(i).begin());
  }
  return out;
}

/// Seeded weights for every layer, one RNG stream per layer.
inline std::vector<WeightTensor> network_weights(const NetworkSpec& net, std::uint64_t seed) {
  std::vector<WeightTensor> w;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    w.push_back(random_weights(l.kernel_size, l.c_in, l.c_out, seed, i + 1));
  }
  return w;
}

/// Plans for every layer: fixed policies directly, `auto` from the cache.
inline std::vector<DataflowPlan> network_plans(const NetworkSpec& net,
                                               const ThresholdCache* tuned = nullptr) {
  std::vector<DataflowPlan> plans;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    if (auto p = l.fixed_plan()) {
      plans.push_back(*p);
    } else if (tuned && tuned->contains(i)) {
      plans.push_back(DataflowPlan::from_threshold(l.kernel_size, l.offset_step(), tuned->at(i)));
    } else {
      detail::fail("layer ", i, " has policy=auto but no tuned threshold");
    }
  }
  return plans;
}

/// Tunes every `auto` layer once on the cloud's own coordinate sets.
template <PackWord Word>
void tune_network(const NetworkSpec& net, const PreparedCloud<Word>& cloud, const PackSpec& spec,
                  const std::vector<WeightTensor>& weights, ThresholdCache& cache,
                  const TimingProtocol& protocol = {}, const IndexOptions& opts = {}) {
  check_network_packing(net, spec);
  std::map<int, PackedCloud<Word>> coords;
  auto at_depth = [&](int d) -> const PackedCloud<Word>& {
    auto it = coords.find(d);
    if (it == coords.end())
      it = coords.emplace(d, closed_form_coords<Word>(cloud.coords, spec, d)).first;
    return it->second;
  };
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    if (l.policy.kind != DataflowPolicy::Kind::Auto) continue;
    cache.get_or_tune(i, [&] {
      TuneSample<Word> s{at_depth(l.in_depth), at_depth(l.out_depth),
                         random_features(at_depth(l.in_depth).size(), l.c_in, 0, i)};
      return tune_threshold<Word>(l, std::span<const TuneSample<Word>>(&s, 1), spec, weights[i],
                                  protocol, opts)
          .threshold;
    });
  }
}

struct LayerReport {
  std::size_t layer_id = 0;
  std::size_t n_in = 0;
  std::size_t n_out = 0;
  std::int64_t map_build_ns = 0;
  std::int64_t post_ns = 0;
  std::int64_t feature_ns = 0;
  std::uint64_t bsearch_count = 0;
  std::uint64_t probe_count = 0;
  int t_selected = 0;
  std::size_t kdense = 0;
  std::size_t ksparse = 0;
  std::size_t map_bytes = 0;
  std::uint64_t checksum = 0;
};

struct NetworkReport {
  IndexingMode mode = IndexingMode::Sequential;
  std::vector<LayerReport> layers;
  std::int64_t downsample_ns = 0;
  std::int64_t mapping_ns = 0;
  std::int64_t feature_ns = 0;
  std::int64_t total_ns = 0;
  std::size_t total_map_bytes = 0;
  /// Largest sum of simultaneously live map bytes.
  std::size_t peak_map_bytes = 0;

  std::int64_t indexing_ns() const { return downsample_ns + mapping_ns; }
};

struct RunOptions {
  IndexOptions index;
  FeatureOptions features;
};

struct NetworkResult {
  FeatureMatrix features;
  NetworkReport report;
};

/// Indexing per `mode`, then feature computation layer by layer, releasing
/// each map after use. Non-SpC operators between layers are identity.
template <PackWord Word>
NetworkResult run_network(const NetworkSpec& net, std::span<const PackedCoord<Word>> v0,
                          const FeatureMatrix& f0, const std::vector<WeightTensor>& weights,
                          const PackSpec& spec, const std::vector<DataflowPlan>& plans,
                          IndexingMode mode, const RunOptions& opts = {}) {
  check_network_packing(net, spec);
  if (weights.size() != net.layers.size())
    detail::fail("run_network: ", weights.size(), " weight tensors for ", net.layers.size(),
                 " layers");
  if (plans.size() != net.layers.size())
    detail::fail("run_network: ", plans.size(), " plans for ", net.layers.size(), " layers");
  if (f0.rows != v0.size()) detail::fail("run_network: feature rows != voxel count");

  NetworkResult res;
  res.report.mode = mode;
  const auto start = Clock::now();

  NetworkIndex<Word> idx;
  if (mode == IndexingMode::NetworkWide) {
    idx = index_network<Word>(net, v0, spec, plans, mode, opts.index);
  } else {
    idx.layers.resize(net.layers.size());
    idx.coords[0].assign(v0.begin(), v0.end());
  }

  std::size_t live = idx.total_map_bytes();
  res.report.peak_map_bytes = live;
  FeatureMatrix cur = f0;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (mode == IndexingMode::Sequential) {
      index_next_layer(idx, net, i, spec, plans[i], opts.index);
      live += idx.layers[i].map_bytes;
      res.report.peak_map_bytes = std::max(res.report.peak_map_bytes, live);
    }
    const auto& li = idx.layers[i];
    LayerReport lr;
    lr.layer_id = i;
    lr.n_in = li.map->n_in;
    lr.n_out = li.map->n_out;
    lr.map_build_ns = li.build_ns;
    lr.post_ns = li.post_ns;
    lr.bsearch_count = li.stats.binary_search_count;
    lr.probe_count = li.stats.probe_count;
    lr.t_selected = plans[i].threshold;
    lr.kdense = plans[i].k_dense();
    lr.ksparse = plans[i].k_sparse();
    lr.map_bytes = li.map_bytes;
    lr.checksum = li.checksum;

    const auto t0 = Clock::now();
    cur = compute_features(*li.map, cur, weights[i], opts.features);
    lr.feature_ns = elapsed_ns(t0);
    res.report.feature_ns += lr.feature_ns;
    live -= li.map_bytes;
    idx.release(i);
    res.report.layers.push_back(lr);
  }
  res.report.downsample_ns = idx.downsample_ns;
  res.report.mapping_ns = idx.mapping_ns;
  res.report.total_map_bytes = idx.total_map_bytes();
  res.report.total_ns = elapsed_ns(start);
  res.features = std::move(cur);
  return res;
}

}  // namespace vspc
