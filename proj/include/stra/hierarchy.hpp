#pragma once

#include <cstddef>
#include <vector>

#include "stra/field.hpp"

namespace stra {

/// Nested dyadic grids N_0 ⊂ N_1 ⊂ ... ⊂ N_L over a padded field.
///
/// Level l keeps every 2^(L-l)-th finest node on every axis, so the joint
/// depth L is set by the shortest axis; longer axes keep more than two nodes
/// at level 0.
class GridHierarchy {
 public:
  GridHierarchy(Shape dims, std::vector<double> spacing = {});

  int levels() const noexcept { return levels_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  const Shape& dims() const noexcept { return dims_; }
  const std::vector<double>& spacing() const noexcept { return spacing_; }

  /// Finest-index step between neighbouring level-l nodes.
  std::size_t stride(int level) const { return std::size_t{1} << (levels_ - level); }

  /// Node counts per axis on level l.
  Shape level_dims(int level) const;

  /// Physical spacing of level l along an axis.
  double spacing_at(int level, std::size_t axis) const {
    return spacing_[axis] * static_cast<double>(stride(level));
  }

  /// Level l such that the node lies in N*_l = N_l \ N_{l-1} (N*_0 = N_0).
  int level_of(const Shape& coord) const;

  /// Same as level_of for a row-major flat index into the finest grid.
  int level_of_flat(std::size_t flat) const;

  /// Level of every finest node, row-major.
  std::vector<unsigned char> level_map() const;

 private:
  Shape dims_;
  std::vector<double> spacing_;
  int levels_ = 0;
};

GridHierarchy build_hierarchy(const Shape& dims, const std::vector<double>& spacing = {});

}  // namespace stra
