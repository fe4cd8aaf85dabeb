// Copyright Contributors to the vspc project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "vspc/kmap/offsets.hpp"

namespace vspc {

enum class Layout { OutputStationary, WeightStationary, Hybrid };

inline std::string_view layout_tag(Layout l) {
  switch (l) {
    case Layout::OutputStationary: return "os";
    case Layout::WeightStationary: return "ws";
    default: return "hybrid";
  }
}

/// Per-offset dataflow choice from an L1-norm threshold t: offsets with
/// l1 < t are dense (output-stationary), the rest sparse (weight-stationary).
/// t = 0 is pure weight-stationary; t = L1NormMax + 1 is pure output-stationary.
struct DataflowPlan {
  int threshold = 0;
  int kernel_size = 1;
  int step = 1;
  std::vector<int> dense;   ///< offset indices, ascending
  std::vector<int> sparse;  ///< offset indices, ascending

  int l1_max() const { return l1_norm_max(kernel_size, step); }

  Layout layout() const {
    if (threshold == 0) return Layout::WeightStationary;
    if (threshold == l1_max() + 1) return Layout::OutputStationary;
    return Layout::Hybrid;
  }

  std::size_t k_dense() const { return dense.size(); }
  std::size_t k_sparse() const { return sparse.size(); }

  static bool valid_threshold(int kernel_size, int step, int t) {
    const int top = l1_norm_max(kernel_size, step);
    return t == 0 || t == top + 1 || (t > 0 && t <= top && t % step == 0);
  }

  static DataflowPlan from_threshold(int kernel_size, int step, int t) {
    check_kernel_size(kernel_size, step);
    if (!valid_threshold(kernel_size, step, t)) {
      detail::fail("dataflow threshold ", t, " is not 0, a multiple of ", step, " up to ",
                   l1_norm_max(kernel_size, step), ", or ", l1_norm_max(kernel_size, step) + 1);
    }
    DataflowPlan plan;
    plan.threshold = t;
    plan.kernel_size = kernel_size;
    plan.step = step;
    for (const auto& w : enumerate_offsets(kernel_size, step)) {
      (w.l1 < t ? plan.dense : plan.sparse).push_back(w.index);
    }
    return plan;
  }

  static DataflowPlan output_stationary(int kernel_size, int step) {
    return from_threshold(kernel_size, step, l1_norm_max(kernel_size, step) + 1);
  }

  static DataflowPlan weight_stationary(int kernel_size, int step) {
    return from_threshold(kernel_size, step, 0);
  }

  /// {0} u {step, 2 step, ..., L1NormMax} u {L1NormMax + 1}
  static std::vector<int> candidate_thresholds(int kernel_size, int step) {
    check_kernel_size(kernel_size, step);
    std::vector<int> out{0};
    const int top = l1_norm_max(kernel_size, step);
    for (int t = step; t <= top; t += step) out.push_back(t);
    out.push_back(top + 1);
    return out;
  }

  friend bool operator==(const DataflowPlan&, const DataflowPlan&) = default;
};

}  // namespace vspc
