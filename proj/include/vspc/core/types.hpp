// Copyright Contributors to the vspc project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vspc {

/// Broad failure classes; the CLI maps each one onto an exit code.
enum class ErrorKind {
  InvalidArgument,  ///< bad input, configuration, or file contents
  Capacity,         ///< an instance exceeds a configured resource limit
  Verification,     ///< a cross-check against an oracle failed
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

namespace detail {

template <typename... Args>
std::string concat(Args&&... args) {
  std::ostringstream oss;
  (oss << ... << std::forward<Args>(args));
  return oss.str();
}

template <typename... Args>
[[noreturn]] void fail(Args&&... args) {
  throw Error(ErrorKind::InvalidArgument, concat(std::forward<Args>(args)...));
}

template <typename... Args>
[[noreturn]] void fail_capacity(Args&&... args) {
  throw Error(ErrorKind::Capacity, concat(std::forward<Args>(args)...));
}

/// Floor division toward negative infinity.
constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace detail

/// Integer voxel index triple.
struct VoxelCoord {
  std::int32_t x = 0;
  std::int32_t y = 0;
  std::int32_t z = 0;

  constexpr std::int32_t operator[](std::size_t axis) const {
    return axis == 0 ? x : (axis == 1 ? y : z);
  }
  constexpr std::int32_t& operator[](std::size_t axis) {
    return axis == 0 ? x : (axis == 1 ? y : z);
  }

  friend constexpr VoxelCoord operator+(VoxelCoord a, VoxelCoord b) {
    return {a.x + b.x, a.y + b.y, a.z + b.z};
  }
  friend constexpr VoxelCoord operator-(VoxelCoord a, VoxelCoord b) {
    return {a.x - b.x, a.y - b.y, a.z - b.z};
  }
  // Lexicographic (x, then y, then z).
  friend constexpr auto operator<=>(const VoxelCoord&, const VoxelCoord&) = default;
};

struct VoxelCoordHash {
  std::size_t operator()(const VoxelCoord& v) const noexcept {
    std::uint64_t h = static_cast<std::uint32_t>(v.x);
    h = h * 0x9E3779B97F4A7C15ull ^ static_cast<std::uint32_t>(v.y);
    h = h * 0x9E3779B97F4A7C15ull ^ static_cast<std::uint32_t>(v.z);
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

/// Row-major |rows| x channels matrix of 32-bit floats.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t channels = 0;
  std::vector<float> data;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, std::size_t c) : rows(r), channels(c), data(r * c, 0.0f) {}
  FeatureMatrix(std::size_t r, std::size_t c, std::vector<float> values)
      : rows(r), channels(c), data(std::move(values)) {
    if (data.size() != rows * channels) {
      detail::fail("feature matrix: ", data.size(), " values for shape ", rows, "x",
                   channels);
    }
  }

  std::span<float> row(std::size_t i) { return {data.data() + i * channels, channels}; }
  std::span<const float> row(std::size_t i) const {
    return {data.data() + i * channels, channels};
  }
  float& at(std::size_t i, std::size_t c) { return data[i * channels + c]; }
  float at(std::size_t i, std::size_t c) const { return data[i * channels + c]; }

  bool all_finite() const {
    for (float v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

}  // namespace vspc
