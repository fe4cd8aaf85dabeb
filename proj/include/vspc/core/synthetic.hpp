// Copyright Contributors to the vspc project
// SPDX-License-Identifier: Apache-2.0

// Synthetic clouds on a unit grid. Points sit at voxel centres (v + 0.5),
// so quantizing with grid size 1 recovers the generating voxels exactly.

#pragma once

#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "vspc/core/io.hpp"
#include "vspc/core/rng.hpp"

namespace vspc {

enum class SyntheticKind { Plane, Sphere, Random, Wall };

inline SyntheticKind parse_synthetic_kind(const std::string& s) {
  if (s == "plane") return SyntheticKind::Plane;
  if (s == "sphere") return SyntheticKind::Sphere;
  if (s == "random") return SyntheticKind::Random;
  if (s == "wall") return SyntheticKind::Wall;
  detail::fail("unknown synthetic kind '", s, "' (plane, sphere, random, wall)");
}

struct SyntheticParams {
  int size = 64;       ///< plane/wall side length; random cube extent
  int height = 32;     ///< wall height
  double radius = 20;  ///< sphere shell radius
  std::size_t count = 10000;  ///< random voxel count
  std::size_t channels = 0;   ///< seeded feature channels per point
  std::uint64_t seed = 0;
};

/// plane: size x size voxels at z = 0.
/// sphere: voxels whose centre lies within half a voxel of the radius-r shell.
/// wall: two size-long walls meeting at a corner, `height` tall, one voxel thick.
/// random: `count` distinct voxels uniform in a size^3 cube.
inline std::vector<VoxelCoord> synthetic_voxels(SyntheticKind kind, const SyntheticParams& p) {
  std::vector<VoxelCoord> v;
  switch (kind) {
    case SyntheticKind::Plane:
      if (p.size < 1) detail::fail("plane: size must be positive");
      for (int x = 0; x < p.size; ++x)
        for (int y = 0; y < p.size; ++y) v.push_back({x, y, 0});
      break;
    case SyntheticKind::Sphere: {
      if (!(p.radius >= 1.0)) detail::fail("sphere: radius must be at least 1");
      const int r = static_cast<int>(std::ceil(p.radius)) + 1;
      for (int x = -r; x <= r; ++x)
        for (int y = -r; y <= r; ++y)
          for (int z = -r; z <= r; ++z) {
            const double d = std::sqrt(double(x) * x + double(y) * y + double(z) * z);
            if (d >= p.radius - 0.5 && d < p.radius + 0.5) v.push_back({x, y, z});
          }
      break;
    }
    case SyntheticKind::Wall:
      if (p.size < 1 || p.height < 1) detail::fail("wall: size and height must be positive");
      for (int x = 0; x < p.size; ++x)
        for (int z = 0; z < p.height; ++z) v.push_back({x, 0, z});
      for (int y = 1; y < p.size; ++y)
        for (int z = 0; z < p.height; ++z) v.push_back({0, y, z});
      break;
    case SyntheticKind::Random: {
      if (p.size < 1) detail::fail("random: size must be positive");
      const std::uint64_t cells = std::uint64_t(p.size) * std::uint64_t(p.size) * std::uint64_t(p.size);
      if (p.count > cells) detail::fail("random: ", p.count, " voxels do not fit a ", p.size, "^3 cube");
      SplitMix64 g(stream_seed(p.seed, 0));
      std::set<VoxelCoord> s;
      while (s.size() < p.count) {
        auto c = [&] { return static_cast<std::int32_t>(g.next() % static_cast<std::uint64_t>(p.size)); };
        const std::int32_t x = c(), y = c(), z = c();
        s.insert({x, y, z});
      }
      v.assign(s.begin(), s.end());
      break;
    }
  }
  return v;
}

inline PointCloud synthetic_cloud(SyntheticKind kind, const SyntheticParams& p) {
  const auto v = synthetic_voxels(kind, p);
  PointCloud c;
  c.points.reserve(v.size());
  for (const auto& x : v) c.points.push_back({x.x + 0.5, x.y + 0.5, x.z + 0.5});
  c.features = random_features(v.size(), p.channels, p.seed, 1);
  return c;
}

}  // namespace vspc
