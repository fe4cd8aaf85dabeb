// Copyright Contributors to the vspc project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include "vspc/features/compute.hpp"
#include "vspc/network/indexing.hpp"

namespace vspc {

/// Warm-up runs are discarded; the result is the median of `runs` timed
/// runs on the steady clock.
struct TimingProtocol {
  int warmup = 1;
  int runs = 5;
};

template <typename F>
std::int64_t median_ns(F&& body, const TimingProtocol& p = {}) {
  if (p.runs < 1) detail::fail("timing protocol needs at least one run");
  for (int i = 0; i < p.warmup; ++i) body();
  std::vector<std::int64_t> t(static_cast<std::size_t>(p.runs));
  for (auto& v : t) {
    const auto t0 = Clock::now();
    body();
    v = elapsed_ns(t0);
  }
  std::nth_element(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(t.size() / 2), t.end());
  return t[t.size() / 2];
}

/// One tuning sample: a layer's coordinates and input features.
template <PackWord Word>
struct TuneSample {
  PackedCloud<Word> inputs;
  PackedCloud<Word> outputs;
  FeatureMatrix features;
};

struct TuneResult {
  int threshold = 0;
  std::vector<int> candidates;
  std::vector<std::int64_t> cost_ns;  ///< per candidate
};

/// Cost of one candidate threshold.
using MeasureFn = std::function<std::int64_t(int threshold)>;

/// Argmin over the candidates; ties go to the larger t.
inline TuneResult select_threshold(const std::vector<int>& candidates, const MeasureFn& measure) {
  if (candidates.empty()) detail::fail("tune_threshold: no candidates");
  TuneResult r;
  r.candidates = candidates;
  std::int64_t best = std::numeric_limits<std::int64_t>::max();
  for (int t : candidates) {
    const std::int64_t c = measure(t);
    r.cost_ns.push_back(c);
    if (c < best || (c == best && t > r.threshold)) {
      best = c;
      r.threshold = t;
    }
  }
  return r;
}

/// Wall time of map build + post-processing + feature computation for every
/// candidate threshold, summed over the samples.
template <PackWord Word>
TuneResult tune_threshold(const LayerSpec& layer, std::span<const TuneSample<Word>> samples,
                          const PackSpec& spec, const WeightTensor& w,
                          const TimingProtocol& protocol = {}, const IndexOptions& opts = {},
                          const FeatureOptions& fopts = {}) {
  if (samples.empty()) detail::fail("tune_threshold: empty sample set");
  const auto candidates =
      DataflowPlan::candidate_thresholds(layer.kernel_size, layer.offset_step());
  return select_threshold(candidates, [&](int t) {
    const auto plan = DataflowPlan::from_threshold(layer.kernel_size, layer.offset_step(), t);
    std::int64_t total = 0;
    for (const auto& s : samples) {
      total += median_ns(
          [&] {
            const auto idx = index_layer<Word>(layer, s.inputs, s.outputs, spec, plan, opts);
            const auto out = compute_features(*idx.map, s.features, w, fopts);
            (void)out;
          },
          protocol);
    }
    return total;
  });
}

/// Tuned thresholds keyed by layer id; each layer is tuned at most once.
class ThresholdCache {
 public:
  bool contains(std::size_t layer) const { return t_.count(layer) != 0; }
  int at(std::size_t layer) const { return t_.at(layer); }
  void put(std::size_t layer, int t) { t_[layer] = t; }

  template <typename Tune>
  int get_or_tune(std::size_t layer, Tune&& tune) {
    if (auto it = t_.find(layer); it != t_.end()) return it->second;
    const int t = tune();
    t_[layer] = t;
    return t;
  }

  std::size_t size() const { return t_.size(); }

 private:
  std::map<std::size_t, int> t_;
};

}  // namespace vspc
