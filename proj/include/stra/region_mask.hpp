#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "stra/field.hpp"

namespace stra {

enum class Label : std::uint8_t { Background = 0, Buffer = 1, Roi = 2 };

/// Per-finest-node region classification.
///
/// Every finest node carries exactly one multilevel coefficient, so a node
/// labelled Roi or Buffer also marks its coefficient as protected on the
/// node's own level.
class RegionMask {
 public:
  RegionMask() = default;
  explicit RegionMask(Shape dims, Label fill = Label::Background);
  RegionMask(Shape dims, std::vector<std::uint8_t> labels);

  const Shape& dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return labels_.size(); }
  std::span<const std::uint8_t> raw() const noexcept { return labels_; }

  Label operator[](std::size_t i) const { return static_cast<Label>(labels_[i]); }
  void set(std::size_t i, Label l) { labels_[i] = static_cast<std::uint8_t>(l); }
  bool is_protected(std::size_t i) const { return labels_[i] != 0; }

  std::size_t count(Label l) const;

  bool operator==(const RegionMask&) const = default;

 private:
  Shape dims_;
  std::vector<std::uint8_t> labels_;
};

/// Run-length stream: repeated (label byte, LEB128 run length).
std::vector<std::uint8_t> encode_mask_rle(const RegionMask& mask);
RegionMask decode_mask_rle(std::span<const std::uint8_t> bytes, const Shape& dims);

/// Edge-replicating pad of a mask to the dyadic extents of `padded_dims`.
RegionMask pad_mask(const RegionMask& mask, const Shape& padded_dims);

/// Leading `dims` block of a padded mask.
RegionMask crop_mask(const RegionMask& mask, const Shape& dims);

}  // namespace stra
