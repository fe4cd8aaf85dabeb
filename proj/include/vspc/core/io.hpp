// Copyright Contributors to the vspc project
// SPDX-License-Identifier: Apache-2.0

// Point-cloud and configuration file formats.
//
// Text point cloud (version 1):
//   optional header line "# spc-text v1"; other lines beginning with '#'
//   are comments. One point per line: "x y z [f_1 ... f_C]", whitespace
//   separated decimals. Every point must carry the same channel count C.
//
// Binary point cloud (version 1), little-endian:
//   bytes 0..3  magic "SPC1"
//   u32         point count N
//   u32         channel count C
//   N records of (3 + C) float32: x y z f_1 ... f_C
//
// Voxel configuration: "key = value" lines, '#' comments.
//   grid_size  = g            or  g_x g_y g_z        (meters)
//   range      = R_x R_y R_z                         (meters)
//   bits       = b_x b_y b_z  (default: derived from range / grid_size)
//   word_width = 32 | 64      (default 32)
//   margin     = m            (default 0)

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "vspc/core/packing.hpp"
#include "vspc/core/quantize.hpp"
#include "vspc/core/types.hpp"

namespace vspc {

static_assert(std::endian::native == std::endian::little,
              "binary point-cloud I/O assumes a little-endian host");

struct PointCloud {
  std::vector<Point3> points;
  FeatureMatrix features;  ///< points.size() x C; C may be zero
};

inline constexpr char kBinaryMagic[4] = {'S', 'P', 'C', '1'};

inline PointCloud read_text_cloud(std::istream& in, const std::string& name = "<stream>") {
  PointCloud cloud;
  std::vector<float> feats;
  std::size_t channels = 0;
  bool first = true;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    std::istringstream ls(line);
    std::vector<double> vals;
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        detail::fail(name, ":", lineno, ": not a number: '", tok, "'");
      }
    }
    if (vals.size() < 3) detail::fail(name, ":", lineno, ": expected at least x y z");
    const std::size_t c = vals.size() - 3;
    if (first) {
      channels = c;
      first = false;
    } else if (c != channels) {
      detail::fail(name, ":", lineno, ": expected ", channels, " feature values, got ", c);
    }
    cloud.points.push_back({vals[0], vals[1], vals[2]});
    for (std::size_t i = 3; i < vals.size(); ++i) feats.push_back(static_cast<float>(vals[i]));
  }
  cloud.features = FeatureMatrix(cloud.points.size(), channels, std::move(feats));
  return cloud;
}

inline PointCloud read_binary_cloud(std::istream& in, const std::string& name = "<stream>") {
  char magic[4];
  std::uint32_t header[2];
  if (!in.read(magic, 4) || std::memcmp(magic, kBinaryMagic, 4) != 0) {
    detail::fail(name, ": missing SPC1 magic");
  }
  if (!in.read(reinterpret_cast<char*>(header), sizeof(header))) {
    detail::fail(name, ": truncated header");
  }
  const std::size_t n = header[0], c = header[1];
  std::vector<float> rec(3 + c);
  PointCloud cloud;
  cloud.points.resize(n);
  cloud.features = FeatureMatrix(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    if (!in.read(reinterpret_cast<char*>(rec.data()),
                 static_cast<std::streamsize>(rec.size() * sizeof(float)))) {
      detail::fail(name, ": truncated at point ", i, " of ", n);
    }
    cloud.points[i] = {rec[0], rec[1], rec[2]};
    std::copy(rec.begin() + 3, rec.end(), cloud.features.row(i).begin());
  }
  return cloud;
}

inline PointCloud read_point_cloud(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) detail::fail("cannot open ", path);
  char magic[4] = {};
  in.read(magic, 4);
  const bool binary = in.gcount() == 4 && std::memcmp(magic, kBinaryMagic, 4) == 0;
  in.clear();
  in.seekg(0);
  return binary ? read_binary_cloud(in, path) : read_text_cloud(in, path);
}

inline void write_text_cloud(std::ostream& out, const PointCloud& cloud) {
  out << "# spc-text v1\n";
  std::ostringstream line;
  line.precision(9);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    line.str({});
    line << cloud.points[i][0] << ' ' << cloud.points[i][1] << ' ' << cloud.points[i][2];
    if (cloud.features.channels > 0)
      for (float f : cloud.features.row(i)) line << ' ' << f;
    out << line.str() << '\n';
  }
}

inline void write_binary_cloud(std::ostream& out, const PointCloud& cloud) {
  out.write(kBinaryMagic, 4);
  const std::uint32_t header[2] = {static_cast<std::uint32_t>(cloud.points.size()),
                                   static_cast<std::uint32_t>(cloud.features.channels)};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  std::vector<float> rec(3 + cloud.features.channels);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    for (std::size_t a = 0; a < 3; ++a) rec[a] = static_cast<float>(cloud.points[i][a]);
    if (cloud.features.channels > 0)
      std::copy(cloud.features.row(i).begin(), cloud.features.row(i).end(), rec.begin() + 3);
    out.write(reinterpret_cast<const char*>(rec.data()),
              static_cast<std::streamsize>(rec.size() * sizeof(float)));
  }
}

inline void write_point_cloud(const std::string& path, const PointCloud& cloud, bool binary) {
  std::ofstream out(path, std::ios::binary);
  if (!out) detail::fail("cannot write ", path);
  binary ? write_binary_cloud(out, cloud) : write_text_cloud(out, cloud);
}

/// Parses "key = value" lines. Duplicate keys are rejected.
inline std::map<std::string, std::string> parse_key_values(std::istream& in,
                                                           const std::string& name) {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string{};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) detail::fail(name, ":", lineno, ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) detail::fail(name, ":", lineno, ": empty key");
    if (!kv.emplace(key, value).second) detail::fail(name, ":", lineno, ": duplicate key '", key, "'");
  }
  return kv;
}

struct VoxelConfig {
  GridSpec grid;
  PackSpec pack;
};

inline VoxelConfig parse_voxel_config(std::istream& in, const std::string& name = "<config>") {
  auto kv = parse_key_values(in, name);
  auto numbers = [&](const std::string& key) {
    std::istringstream vs(kv.at(key));
    std::vector<double> out;
    double v;
    while (vs >> v) out.push_back(v);
    if (!vs.eof()) detail::fail(name, ": key '", key, "' has a non-numeric value");
    return out;
  };
  VoxelConfig cfg;
  if (kv.count("grid_size")) {
    auto g = numbers("grid_size");
    if (g.size() == 1) g = {g[0], g[0], g[0]};
    if (g.size() != 3) detail::fail(name, ": grid_size needs 1 or 3 values");
    cfg.grid.grid_size = {g[0], g[1], g[2]};
  }
  if (kv.count("range")) {
    auto r = numbers("range");
    if (r.size() != 3) detail::fail(name, ": range needs 3 values");
    cfg.grid.range = {r[0], r[1], r[2]};
  }
  cfg.grid.validate();
  if (kv.count("bits")) {
    auto b = numbers("bits");
    if (b.size() != 3) detail::fail(name, ": bits needs 3 values");
    cfg.pack.bits = {static_cast<int>(b[0]), static_cast<int>(b[1]), static_cast<int>(b[2])};
  } else {
    cfg.pack.bits = cfg.grid.derived_bits();
  }
  if (kv.count("word_width")) cfg.pack.word_width = static_cast<int>(numbers("word_width").at(0));
  if (kv.count("margin")) cfg.pack.margin = static_cast<int>(numbers("margin").at(0));
  for (const auto& [key, value] : kv) {
    if (key != "grid_size" && key != "range" && key != "bits" && key != "word_width" &&
        key != "margin") {
      detail::fail(name, ": unknown key '", key, "'");
    }
  }
  cfg.pack.validate();
  cfg.grid.check_fits(cfg.pack);
  return cfg;
}

inline VoxelConfig load_voxel_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) detail::fail("cannot open ", path);
  return parse_voxel_config(in, path);
}

}  // namespace vspc
