// Copyright Contributors to the vspc project
// SPDX-License-Identifier: Apache-2.0

// Network spec file: one layer per line, whitespace-separated key=value
// tokens, '#' starts a comment.
//
//   K=<odd> s_l=<power of two> C_in=<n> C_out=<n> policy=<auto|os|ws|t> [up=1]
//
// `policy` is a fixed L1 threshold t (an integer), `os` (t = L1NormMax + 1),
// `ws` (t = 0) or `auto` (tuned once before inference). `up=1` marks a
// transposed (upsampling) layer whose outputs are the coordinates s_l times
// finer than its inputs.

#pragma once

#include <algorithm>
#include <bit>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vspc/core/types.hpp"
#include "vspc/kmap/dataflow_plan.hpp"
#include "vspc/kmap/offsets.hpp"

namespace vspc {

struct DataflowPolicy {
  enum class Kind { Auto, Fixed, OutputStationary, WeightStationary };
  Kind kind = Kind::Auto;
  int threshold = 0;  // Kind::Fixed only

  static DataflowPolicy automatic() { return {}; }
  static DataflowPolicy fixed(int t) { return {Kind::Fixed, t}; }
  static DataflowPolicy output_stationary() { return {Kind::OutputStationary, 0}; }
  static DataflowPolicy weight_stationary() { return {Kind::WeightStationary, 0}; }

  friend bool operator==(const DataflowPolicy&, const DataflowPolicy&) = default;
};

struct LayerSpec {
  int kernel_size = 3;
  int layer_stride = 1;
  std::size_t c_in = 1;
  std::size_t c_out = 1;
  DataflowPolicy policy;
  bool transposed = false;

  // Filled in by NetworkSpec::build.
  int in_depth = 0;   ///< input stride s_p = 2^in_depth
  int out_depth = 0;  ///< output stride s_q = 2^out_depth

  int input_stride() const { return 1 << in_depth; }
  int output_stride() const { return 1 << out_depth; }
  bool submanifold() const { return layer_stride == 1; }
  /// Offset lattice spacing: the input stride, or for a transposed layer the
  /// finer output stride.
  int offset_step() const { return transposed ? output_stride() : input_stride(); }
  int l1_max() const { return l1_norm_max(kernel_size, offset_step()); }
  int radius() const { return (kernel_size - 1) / 2 * offset_step(); }

  /// Plan for a fixed policy; nullopt for Auto.
  std::optional<DataflowPlan> fixed_plan() const {
    switch (policy.kind) {
      case DataflowPolicy::Kind::Auto: return std::nullopt;
      case DataflowPolicy::Kind::OutputStationary:
        return DataflowPlan::output_stationary(kernel_size, offset_step());
      case DataflowPolicy::Kind::WeightStationary:
        return DataflowPlan::weight_stationary(kernel_size, offset_step());
      default: return DataflowPlan::from_threshold(kernel_size, offset_step(), policy.threshold);
    }
  }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct NetworkSpec {
  std::vector<LayerSpec> layers;

  int max_depth() const {
    int d = 0;
    for (const auto& l : layers) d = std::max({d, l.in_depth, l.out_depth});
    return d;
  }

  /// Smallest pack margin that keeps every query of every layer inside its
  /// bit fields: the largest kernel radius rounded up to a multiple of the
  /// coarsest stride, so rounding down by any layer's stride never pushes a
  /// coordinate below the margin.
  int required_margin() const {
    int r = 0;
    for (const auto& l : layers) r = std::max(r, l.radius());
    const int align = 1 << max_depth();
    return (r + align - 1) / align * align;
  }

  /// Derives strides along the chain and validates it.
  static NetworkSpec build(std::vector<LayerSpec> layers) {
    NetworkSpec net;
    int depth = 0;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      auto& l = layers[i];
      check_kernel_size(l.kernel_size, 1);
      if (l.layer_stride < 1 || !std::has_single_bit(static_cast<unsigned>(l.layer_stride)))
        detail::fail("layer ", i, ": stride ", l.layer_stride, " is not a power of two");
      if (l.transposed && l.layer_stride == 1)
        detail::fail("layer ", i, ": a transposed layer needs stride > 1");
      if (l.c_in == 0 || l.c_out == 0) detail::fail("layer ", i, ": zero channels");
      if (i > 0 && layers[i - 1].c_out != l.c_in)
        detail::fail("layer ", i, ": C_in=", l.c_in, " but the previous layer emits ",
                     layers[i - 1].c_out);
      const int hop = std::countr_zero(static_cast<unsigned>(l.layer_stride));
      l.in_depth = depth;
      if (l.transposed) {
        if (hop > depth) detail::fail("layer ", i, ": upsamples above the input resolution");
        l.out_depth = depth - hop;
      } else {
        l.out_depth = depth + hop;
      }
      depth = l.out_depth;
      (void)l.fixed_plan();  // rejects invalid fixed thresholds
    }
    net.layers = std::move(layers);
    return net;
  }
};

inline LayerSpec parse_layer_line(const std::string& line, const std::string& where) {
  LayerSpec l;
  std::istringstream ls(line);
  std::string tok;
  bool have_k = false, have_in = false, have_out = false;
  while (ls >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) detail::fail(where, ": expected key=value, got '", tok, "'");
    const std::string key = tok.substr(0, eq), value = tok.substr(eq + 1);
    auto integer = [&]() -> long {
      try {
        std::size_t used = 0;
        const long v = std::stol(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
      } catch (const std::exception&) {
        detail::fail(where, ": '", key, "' needs an integer, got '", value, "'");
      }
    };
    if (key == "K") {
      l.kernel_size = static_cast<int>(integer());
      have_k = true;
    } else if (key == "s_l") {
      l.layer_stride = static_cast<int>(integer());
    } else if (key == "C_in") {
      l.c_in = static_cast<std::size_t>(integer());
      have_in = true;
    } else if (key == "C_out") {
      l.c_out = static_cast<std::size_t>(integer());
      have_out = true;
    } else if (key == "policy") {
      if (value == "auto") l.policy = DataflowPolicy::automatic();
      else if (value == "os") l.policy = DataflowPolicy::output_stationary();
      else if (value == "ws") l.policy = DataflowPolicy::weight_stationary();
      else l.policy = DataflowPolicy::fixed(static_cast<int>(integer()));
    } else if (key == "up") {
      l.transposed = integer() != 0;
    } else {
      detail::fail(where, ": unknown key '", key, "'");
    }
  }
  if (!have_k || !have_in || !have_out) detail::fail(where, ": K, C_in and C_out are required");
  return l;
}

inline NetworkSpec parse_network(std::istream& in, const std::string& name = "<network>") {
  std::vector<LayerSpec> layers;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    layers.push_back(parse_layer_line(line, detail::concat(name, ":", lineno)));
  }
  if (layers.empty()) detail::fail(name, ": no layers");
  return NetworkSpec::build(std::move(layers));
}

inline NetworkSpec load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) detail::fail("cannot open ", path);
  return parse_network(in, path);
}

inline void write_network(std::ostream& out, const NetworkSpec& net) {
  for (const auto& l : net.layers) {
    out << "K=" << l.kernel_size << " s_l=" << l.layer_stride << " C_in=" << l.c_in
        << " C_out=" << l.c_out << " policy=";
    switch (l.policy.kind) {
      case DataflowPolicy::Kind::Auto: out << "auto"; break;
      case DataflowPolicy::Kind::OutputStationary: out << "os"; break;
      case DataflowPolicy::Kind::WeightStationary: out << "ws"; break;
      default: out << l.policy.threshold;
    }
    if (l.transposed) out << " up=1";
    out << '\n';
  }
}

/// Submanifold stem, four stride-2 encoder stages and four transposed
/// decoder stages of one resampling layer plus four submanifold layers
/// each: 42 layers.
inline NetworkSpec unet42(std::size_t base = 32, std::size_t in_channels = 4,
                          DataflowPolicy policy = DataflowPolicy::output_stationary()) {
  std::vector<LayerSpec> l;
  auto add = [&](int k, int s, std::size_t cin, std::size_t cout, bool up = false) {
    LayerSpec spec;
    spec.kernel_size = k;
    spec.layer_stride = s;
    spec.c_in = cin;
    spec.c_out = cout;
    spec.policy = policy;
    spec.transposed = up;
    l.push_back(spec);
  };
  const std::size_t ch[5] = {base, 2 * base, 4 * base, 8 * base, 8 * base};
  add(5, 1, in_channels, ch[0]);
  add(3, 1, ch[0], ch[0]);
  for (int d = 1; d <= 4; ++d) {
    add(3, 2, ch[d - 1], ch[d]);
    for (int r = 0; r < 4; ++r) add(3, 1, ch[d], ch[d]);
  }
  for (int d = 4; d >= 1; --d) {
    add(3, 2, ch[d], ch[d - 1], true);
    for (int r = 0; r < 4; ++r) add(3, 1, ch[d - 1], ch[d - 1]);
  }
  return NetworkSpec::build(std::move(l));
}

/// K=5 stem and four stages of (stride-2 K=3 layer, four submanifold
/// layers alternating K=5 and K=3): 21 layers.
inline NetworkSpec resnet21(std::size_t base = 32, std::size_t in_channels = 4,
                            DataflowPolicy policy = DataflowPolicy::output_stationary()) {
  std::vector<LayerSpec> l;
  auto add = [&](int k, int s, std::size_t cin, std::size_t cout) {
    LayerSpec spec;
    spec.kernel_size = k;
    spec.layer_stride = s;
    spec.c_in = cin;
    spec.c_out = cout;
    spec.policy = policy;
    l.push_back(spec);
  };
  const std::size_t ch[5] = {base, base, 2 * base, 4 * base, 4 * base};
  add(5, 1, in_channels, ch[0]);
  for (int d = 1; d <= 4; ++d) {
    add(3, 2, ch[d - 1], ch[d]);
    for (int r = 0; r < 4; ++r) add(r % 2 == 0 ? 5 : 3, 1, ch[d], ch[d]);
  }
  return NetworkSpec::build(std::move(l));
}

}  // namespace vspc
