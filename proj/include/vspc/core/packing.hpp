// Copyright Contributors to the vspc project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <concepts>
#include <cstdint>
#include <limits>
#include <span>
#include <type_traits>
#include <vector>

#include "vspc/core/types.hpp"

namespace vspc {

/// Unsigned machine word holding a packed coordinate triple.
template <typename W>
concept PackWord = std::same_as<W, std::uint32_t> || std::same_as<W, std::uint64_t>;

/// Bit-field layout of a packed coordinate: x in the most significant
/// bits[0] bits, then y, then z in the least significant bits[2] bits.
///
/// `margin` is the number of voxels kept free at both ends of every field.
/// Stored coordinates are at least `margin` away from either end, so adding
/// any offset with |component| <= margin never carries or borrows across
/// a field boundary.
struct PackSpec {
  std::array<int, 3> bits{12, 12, 8};
  int word_width = 32;
  int margin = 0;

  int shift(std::size_t axis) const {
    switch (axis) {
      case 0: return bits[1] + bits[2];
      case 1: return bits[2];
      default: return 0;
    }
  }

  std::int64_t capacity(std::size_t axis) const { return std::int64_t{1} << bits[axis]; }

  int total_bits() const { return bits[0] + bits[1] + bits[2]; }

  void validate() const {
    if (word_width != 32 && word_width != 64) {
      detail::fail("pack spec: word_width must be 32 or 64, got ", word_width);
    }
    for (std::size_t a = 0; a < 3; ++a) {
      if (bits[a] <= 0 || bits[a] > 31) {
        detail::fail("pack spec: bits for axis ", "xyz"[a], " must be in [1, 31], got ",
                     bits[a]);
      }
    }
    if (total_bits() > word_width) {
      detail::fail("pack spec: ", bits[0], "+", bits[1], "+", bits[2],
                   " bits exceed the ", word_width, "-bit word");
    }
    if (margin < 0) detail::fail("pack spec: negative margin ", margin);
    for (std::size_t a = 0; a < 3; ++a) {
      if (2 * std::int64_t{margin} >= capacity(a)) {
        detail::fail("pack spec: margin ", margin, " leaves no room on axis ", "xyz"[a]);
      }
    }
  }

  template <PackWord Word>
  void validate_for() const {
    validate();
    if (word_width != static_cast<int>(sizeof(Word) * 8)) {
      detail::fail("pack spec: word_width ", word_width, " does not match a ",
                   sizeof(Word) * 8, "-bit packed word");
    }
  }

  friend bool operator==(const PackSpec&, const PackSpec&) = default;
};

/// Smallest b with 2^b > extent, i.e. ceil(log2(extent + 1)).
inline int bits_for_extent(std::uint64_t extent) {
  return static_cast<int>(std::bit_width(extent));
}

template <PackWord Word>
struct PackedCoord {
  Word value = 0;

  friend constexpr auto operator<=>(const PackedCoord&, const PackedCoord&) = default;
};

/// Offset triple mapped through the same linear bit-field map; may be negative.
template <PackWord Word>
struct PackedOffset {
  std::make_signed_t<Word> value = 0;

  friend constexpr bool operator==(const PackedOffset&, const PackedOffset&) = default;
};

/// Query generation in packed form: modular word addition.
template <PackWord Word>
constexpr PackedCoord<Word> operator+(PackedCoord<Word> p, PackedOffset<Word> d) {
  return {static_cast<Word>(p.value + static_cast<Word>(d.value))};
}

template <PackWord Word>
using PackedCloud = std::vector<PackedCoord<Word>>;

template <PackWord Word>
constexpr PackedCoord<Word> pack_unchecked(VoxelCoord v, const PackSpec& spec) {
  return {static_cast<Word>((static_cast<Word>(v.x) << spec.shift(0)) |
                            (static_cast<Word>(v.y) << spec.shift(1)) |
                            static_cast<Word>(v.z))};
}

template <PackWord Word>
PackedCoord<Word> pack(VoxelCoord v, const PackSpec& spec) {
  for (std::size_t a = 0; a < 3; ++a) {
    if (v[a] < 0 || v[a] >= spec.capacity(a)) {
      detail::fail("pack: component ", "xyz"[a], "=", v[a], " outside [0, ",
                   spec.capacity(a), ")");
    }
  }
  return pack_unchecked<Word>(v, spec);
}

template <PackWord Word>
constexpr VoxelCoord unpack(PackedCoord<Word> p, const PackSpec& spec) {
  auto field = [&](std::size_t a) {
    const Word mask = static_cast<Word>((Word{1} << spec.bits[a]) - 1);
    return static_cast<std::int32_t>((p.value >> spec.shift(a)) & mask);
  };
  return {field(0), field(1), field(2)};
}

template <PackWord Word>
PackedOffset<Word> pack_offset(VoxelCoord delta, const PackSpec& spec) {
  for (std::size_t a = 0; a < 3; ++a) {
    if (delta[a] > spec.margin || delta[a] < -spec.margin) {
      detail::fail("pack_offset: component ", "xyz"[a], "=", delta[a],
                   " exceeds the pack margin ", spec.margin);
    }
  }
  const std::int64_t linear = (std::int64_t{delta.x} << spec.shift(0)) +
                              (std::int64_t{delta.y} << spec.shift(1)) +
                              std::int64_t{delta.z};
  return {static_cast<std::make_signed_t<Word>>(linear)};
}

/// Per field: (bits - m) ones followed by m zeros. AND-ing a packed
/// coordinate with it rounds every component down to a multiple of 2^m.
template <PackWord Word>
Word downsample_mask(const PackSpec& spec, int m) {
  const int min_bits = std::min({spec.bits[0], spec.bits[1], spec.bits[2]});
  if (m < 0 || m >= min_bits) {
    detail::fail("downsample_mask: depth ", m, " must be in [0, ", min_bits, ")");
  }
  Word mask = 0;
  for (std::size_t a = 0; a < 3; ++a) {
    const Word field = static_cast<Word>(((Word{1} << spec.bits[a]) - 1) & ~((Word{1} << m) - 1));
    mask |= static_cast<Word>(field << spec.shift(a));
  }
  return mask;
}

struct NormalizedCoords {
  std::vector<VoxelCoord> coords;
  /// original = normalized + origin
  VoxelCoord origin;
};

/// Translates each axis into [margin, 2^bits - 1 - margin]. Axes already in
/// that window are left untouched; others are shifted so their minimum lands
/// on `margin`.
inline NormalizedCoords normalize_coords(std::span<const VoxelCoord> coords,
                                         const PackSpec& spec) {
  spec.validate();
  NormalizedCoords out;
  out.coords.assign(coords.begin(), coords.end());
  if (coords.empty()) return out;

  for (std::size_t a = 0; a < 3; ++a) {
    std::int64_t lo = coords[0][a], hi = coords[0][a];
    for (const auto& c : coords) {
      lo = std::min<std::int64_t>(lo, c[a]);
      hi = std::max<std::int64_t>(hi, c[a]);
    }
    const std::int64_t extent = hi - lo + 1;
    const std::int64_t window = spec.capacity(a) - 2 * std::int64_t{spec.margin};
    if (extent > window) {
      const int needed =
          bits_for_extent(static_cast<std::uint64_t>(extent + 2 * spec.margin - 1));
      detail::fail_capacity("normalize_coords: axis ", "xyz"[a], " spans ", extent,
                            " voxels but ", spec.bits[a], " bits with margin ",
                            spec.margin, " hold only ", window, "; need ", needed,
                            " bits");
    }
    const bool in_window =
        lo >= spec.margin && hi <= spec.capacity(a) - 1 - spec.margin;
    const std::int64_t shift = in_window ? 0 : spec.margin - lo;
    out.origin[a] = static_cast<std::int32_t>(-shift);
    for (auto& c : out.coords) c[a] = static_cast<std::int32_t>(c[a] + shift);
  }
  return out;
}

}  // namespace vspc
