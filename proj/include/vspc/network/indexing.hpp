// Copyright Contributors to the vspc project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include <tbb/task_group.h>

#include "vspc/core/packing.hpp"
#include "vspc/kmap/builders.hpp"
#include "vspc/kmap/dataflow_plan.hpp"
#include "vspc/kmap/offsets.hpp"
#include "vspc/kmap/post_process.hpp"
#include "vspc/kmap/sort.hpp"
#include "vspc/network/spec.hpp"

namespace vspc {

using Clock = std::chrono::steady_clock;

inline std::int64_t elapsed_ns(Clock::time_point since) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - since).count();
}

/// V_i = floor(V_0 / 2^i) 2^i straight from the initial coordinates: one
/// mask-and-dedup pass.
template <PackWord Word>
PackedCloud<Word> closed_form_coords(std::span<const PackedCoord<Word>> v0, const PackSpec& spec,
                                     int depth) {
  if (depth == 0) return {v0.begin(), v0.end()};
  return downsample(v0, spec, depth);
}

/// V_i from V_{i-1}, one depth at a time.
template <PackWord Word>
PackedCloud<Word> recursive_coords(std::span<const PackedCoord<Word>> v0, const PackSpec& spec,
                                   int depth) {
  PackedCloud<Word> v(v0.begin(), v0.end());
  for (int d = 1; d <= depth; ++d) v = downsample(std::span<const PackedCoord<Word>>(v), spec, d);
  return v;
}

enum class IndexingMode { Sequential, NetworkWide };
enum class BuilderKind { ZDelta, BSearch };

struct IndexOptions {
  BuilderKind builder = BuilderKind::ZDelta;
  BuildOptions build;
  /// Store only half of each submanifold layer's weight-stationary lists.
  bool halve_submanifold = false;
};

struct LayerIndex {
  std::optional<KernelMap> map;
  SearchStats stats;
  std::int64_t build_ns = 0;
  std::int64_t post_ns = 0;
  std::size_t map_bytes = 0;
  std::uint64_t checksum = 0;
};

/// Builds and post-processes one layer's kernel map.
template <PackWord Word>
LayerIndex index_layer(const LayerSpec& layer, std::span<const PackedCoord<Word>> inputs,
                       std::span<const PackedCoord<Word>> outputs, const PackSpec& spec,
                       const DataflowPlan& plan, const IndexOptions& opts) {
  if (plan.kernel_size != layer.kernel_size || plan.step != layer.offset_step())
    detail::fail("index_layer: plan does not belong to this layer");
  const auto offsets = enumerate_offsets(layer.kernel_size, layer.offset_step());
  LayerIndex out;
  auto t0 = Clock::now();
  BuildResult built =
      opts.builder == BuilderKind::ZDelta
          ? build_kmap_zdelta<Word>(inputs, outputs, offsets, group_offsets(offsets), spec, plan, opts.build)
          : build_kmap_bsearch<Word>(inputs, outputs, offsets, spec, plan, opts.build);
  out.build_ns = elapsed_ns(t0);
  out.stats = built.stats;
  t0 = Clock::now();
  KernelMap map = post_process(std::move(built.map), plan);
  if (opts.halve_submanifold && layer.submanifold() && map.k_sparse() > 0)
    map = halve_symmetric(map, true);
  out.post_ns = elapsed_ns(t0);
  out.map_bytes = map.memory_bytes();
  out.checksum = map_checksum(map);
  out.map = std::move(map);
  return out;
}

/// Which coordinate sets each indexing task consumes and produces. Phase-1
/// tasks derive one depth from V_0; phase-2 tasks read only phase-1 products.
struct IndexingSchedule {
  std::vector<int> phase1_depths;
  struct MapTask {
    std::size_t layer;
    int reads_inputs;
    int reads_outputs;
  };
  std::vector<MapTask> phase2;
};

inline IndexingSchedule schedule_indexing(const NetworkSpec& net) {
  IndexingSchedule s;
  std::set<int> depths;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    depths.insert(l.in_depth);
    depths.insert(l.out_depth);
    s.phase2.push_back({i, l.in_depth, l.out_depth});
  }
  s.phase1_depths.assign(depths.begin(), depths.end());
  return s;
}

/// Checks, before any work starts, that one pack spec serves every layer.
inline void check_network_packing(const NetworkSpec& net, const PackSpec& spec) {
  spec.validate();
  if (spec.margin < net.required_margin()) {
    detail::fail_capacity("network needs a pack margin of ", net.required_margin(),
                          " (largest kernel radius rounded to the coarsest stride 2^",
                          net.max_depth(), "), spec has ", spec.margin);
  }
  const int min_bits = std::min({spec.bits[0], spec.bits[1], spec.bits[2]});
  if (net.max_depth() >= min_bits)
    detail::fail_capacity("network downsamples to depth ", net.max_depth(), " but the ", min_bits,
                          "-bit field cannot be masked that far");
}

template <PackWord Word>
struct NetworkIndex {
  std::map<int, PackedCloud<Word>> coords;  ///< by depth
  std::vector<LayerIndex> layers;
  std::int64_t downsample_ns = 0;
  std::int64_t mapping_ns = 0;

  std::size_t total_map_bytes() const {
    std::size_t b = 0;
    for (const auto& l : layers) b += l.map_bytes;
    return b;
  }

  /// Frees one layer's map once its feature step has consumed it.
  void release(std::size_t layer) { layers[layer].map.reset(); }
};

/// Sequential step: derives the layer's coordinates recursively from the
/// previous depth if they are missing, then builds its map.
template <PackWord Word>
void index_next_layer(NetworkIndex<Word>& idx, const NetworkSpec& net, std::size_t i,
                      const PackSpec& spec, const DataflowPlan& plan, const IndexOptions& opts) {
  const auto& l = net.layers[i];
  auto t0 = Clock::now();
  for (int d = 1; d <= l.out_depth; ++d) {
    if (!idx.coords.count(d))
      idx.coords[d] = downsample(std::span<const PackedCoord<Word>>(idx.coords.at(d - 1)), spec, d);
  }
  idx.downsample_ns += elapsed_ns(t0);
  t0 = Clock::now();
  idx.layers[i] = index_layer<Word>(l, idx.coords.at(l.in_depth), idx.coords.at(l.out_depth), spec,
                                    plan, opts);
  idx.mapping_ns += elapsed_ns(t0);
}

/// NetworkWide: phase 1 derives every needed coordinate set from V_0
/// concurrently, phase 2 builds every layer's map concurrently.
/// Sequential: layer by layer in network order, downsampling recursively.
template <PackWord Word>
NetworkIndex<Word> index_network(const NetworkSpec& net, std::span<const PackedCoord<Word>> v0,
                                 const PackSpec& spec, const std::vector<DataflowPlan>& plans,
                                 IndexingMode mode, const IndexOptions& opts = {}) {
  check_network_packing(net, spec);
  if (plans.size() != net.layers.size())
    detail::fail("index_network: ", plans.size(), " plans for ", net.layers.size(), " layers");

  NetworkIndex<Word> idx;
  idx.layers.resize(net.layers.size());
  const auto sched = schedule_indexing(net);

  if (mode == IndexingMode::NetworkWide) {
    for (int d : sched.phase1_depths) idx.coords[d];  // slots exist before tasks start
    auto t0 = Clock::now();
    {
      tbb::task_group tg;
      for (int d : sched.phase1_depths) {
        auto& slot = idx.coords.at(d);
        tg.run([&slot, v0, &spec, d] { slot = closed_form_coords<Word>(v0, spec, d); });
      }
      tg.wait();
    }
    idx.downsample_ns = elapsed_ns(t0);
    t0 = Clock::now();
    {
      const auto& published = idx.coords;
      tbb::task_group tg;
      for (const auto& task : sched.phase2) {
        tg.run([&, task] {
          const auto& in = published.at(task.reads_inputs);
          const auto& out = published.at(task.reads_outputs);
          idx.layers[task.layer] = index_layer<Word>(net.layers[task.layer], in, out, spec,
                                                     plans[task.layer], opts);
        });
      }
      tg.wait();
    }
    idx.mapping_ns = elapsed_ns(t0);
  } else {
    idx.coords[0].assign(v0.begin(), v0.end());
    for (std::size_t i = 0; i < net.layers.size(); ++i)
      index_next_layer(idx, net, i, spec, plans[i], opts);
  }
  return idx;
}

}  // namespace vspc
