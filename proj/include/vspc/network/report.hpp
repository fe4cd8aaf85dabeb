// Copyright Contributors to the vspc project
// SPDX-License-Identifier: Apache-2.0

// JSON reports. Every report object carries `schema_version`; per-layer
// records use the field names below and are stable across versions.

#pragma once

#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "vspc/kmap/builders.hpp"
#include "vspc/network/density.hpp"
#include "vspc/network/runner.hpp"

namespace vspc {

inline constexpr int kReportSchemaVersion = 1;

inline std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

inline const char* mode_tag(IndexingMode m) {
  return m == IndexingMode::Sequential ? "sequential" : "network_wide";
}

inline nlohmann::json to_json(const SearchStats& s) {
  return {{"binary_search_count", s.binary_search_count},
          {"probe_count", s.probe_count},
          {"global_comparison_count", s.global_comparison_count},
          {"max_unit_probes", s.max_unit_probes}};
}

inline nlohmann::json to_json(const DensityProfile& p) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < p.l1_values.size(); ++i)
    rows.push_back({{"l1", p.l1_values[i]}, {"density", p.density[i]}});
  return {{"n_out", p.n_out}, {"non_increasing", p.non_increasing()}, {"by_l1", rows}};
}

inline nlohmann::json to_json(const LayerReport& l) {
  return {{"layer_id", l.layer_id},         {"n_in", l.n_in},
          {"n_out", l.n_out},               {"map_build_ns", l.map_build_ns},
          {"post_ns", l.post_ns},           {"feature_ns", l.feature_ns},
          {"bsearch_count", l.bsearch_count}, {"probe_count", l.probe_count},
          {"t_selected", l.t_selected},     {"kdense", l.kdense},
          {"ksparse", l.ksparse},           {"map_bytes", l.map_bytes},
          {"checksum", hex64(l.checksum)}};
}

inline nlohmann::json to_json(const NetworkReport& r) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : r.layers) layers.push_back(to_json(l));
  return {{"mode", mode_tag(r.mode)},
          {"downsample_ns", r.downsample_ns},
          {"mapping_ns", r.mapping_ns},
          {"indexing_ns", r.indexing_ns()},
          {"feature_ns", r.feature_ns},
          {"total_ns", r.total_ns},
          {"total_map_bytes", r.total_map_bytes},
          {"peak_map_bytes", r.peak_map_bytes},
          {"layers", layers}};
}

/// Checks the fields every report must carry; returns an empty string when
/// valid, otherwise the first problem found.
inline std::string check_report_schema(const nlohmann::json& j) {
  if (!j.is_object()) return "report is not an object";
  if (!j.contains("schema_version") || j["schema_version"] != kReportSchemaVersion)
    return "missing or unknown schema_version";
  if (!j.contains("command") || !j["command"].is_string()) return "missing command";
  static const char* const layer_fields[] = {"layer_id", "map_build_ns", "post_ns",
                                             "feature_ns", "bsearch_count", "probe_count",
                                             "t_selected", "kdense", "ksparse"};
  auto check_layers = [&](const nlohmann::json& layers) -> std::string {
    if (!layers.is_array()) return "layers is not an array";
    for (const auto& l : layers)
      for (const char* f : layer_fields)
        if (!l.contains(f)) return std::string("layer record lacks ") + f;
    return {};
  };
  if (j.contains("layers")) {
    if (auto e = check_layers(j["layers"]); !e.empty()) return e;
  }
  if (j.contains("runs")) {
    // bench-layer runs are layer records themselves.
    if (j["command"] == "bench-layer")
      if (auto e = check_layers(j["runs"]); !e.empty()) return e;
    for (const auto& run : j["runs"]) {
      if (run.contains("layers"))
        if (auto e = check_layers(run["layers"]); !e.empty()) return e;
    }
  }
  return {};
}

}  // namespace vspc
