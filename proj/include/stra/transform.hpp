#pragma once

#include <span>
#include <vector>

#include "stra/field.hpp"
#include "stra/hierarchy.hpp"

namespace stra {

/// Multilevel coefficients stored congruent to the finest grid.
///
/// The entry at a node of N*_l holds that node's level-l coefficient; entries
/// on N_0 hold the coarsest-level nodal values.
class CoeffPyramid {
 public:
  CoeffPyramid(GridHierarchy hierarchy, std::vector<double> coeffs);

  const GridHierarchy& hierarchy() const noexcept { return hierarchy_; }
  std::span<const double> coeffs() const noexcept { return coeffs_; }
  double operator[](std::size_t i) const { return coeffs_[i]; }
  std::size_t size() const noexcept { return coeffs_.size(); }

 private:
  GridHierarchy hierarchy_;
  std::vector<double> coeffs_;
};

/// One 1-D decomposition step: coarse nodal values plus the interpolation
/// details at the odd nodes (details[j] for odd j, zero elsewhere).
struct LevelSplit {
  std::vector<double> coarse;
  std::vector<double> details;
};

LevelSplit decompose_1d_level(std::span<const double> values, double fine_spacing);

CoeffPyramid decompose(const Field& field);
Field recompose(const CoeffPyramid& pyramid);

/// Recomposition of a pyramid holding a single unit coefficient at `node`,
/// which must lie in N*_level. This is the error footprint of a unit
/// quantization error on that coefficient.
Field impulse_response(const Shape& dims, int level, const Shape& node);

namespace detail {

// Exposed for the transform tests: the fine-to-coarse L2 load operator and
// the coarse mass-matrix solve, both along one axis of a compact level grid.
std::vector<double> transfer_axis(std::span<const double> fine, const Shape& dims, std::size_t axis,
                                  double fine_spacing);
void mass_solve_axis(std::span<double> values, const Shape& dims, std::size_t axis,
                     double coarse_spacing);

}  // namespace detail

}  // namespace stra
