#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "stra/field.hpp"

namespace stra {

/// Per-coarse-spacing attenuation 2 + sqrt(3) of a recomposed unit error.
inline constexpr double kDecayBase = 3.7320508075688772;  // 2 + sqrt(3)

/// Amplitude envelope of one impulse response.
struct DecayProfile {
  int level = 0;
  Shape node;
  /// amplitude[d] = max |response| over nodes at Chebyshev distance d coarse spacings.
  std::vector<double> amplitude;
  /// Least-squares slope of ln amplitude[d] against d over d = 1..5.
  double slope = 0.0;
};

/// Node of N*_level nearest the grid centre whose index is odd (at that level)
/// exactly on the axes set in `odd_axes` (bit a = axis a).
Shape centre_node(const Shape& dims, int level, unsigned odd_axes);

DecayProfile decay_profile(const Shape& dims, int level, const Shape& node, int max_distance = 5);

/// Empirical constants for the pointwise error model
///   |e(y)| <= C_d * sum_l sum_x |dq(x)| * (2+sqrt3)^(-dist_{l-1}(x, y)).
struct DecayCalibration {
  std::array<double, 3> scale{};  ///< C_1, C_2, C_3
  double measured_ratio = 0.0;    ///< mean per-spacing amplitude ratio over distances 1..5
  std::array<double, 3> slope{};  ///< decay-fit slope per dimension

  double scale_for(std::size_t rank) const { return scale.at(rank - 1); }
};

inline constexpr double kCalibrationSafety = 1.25;

/// Grids used by the default calibration, one per dimension.
std::array<Shape, 3> default_calibration_dims();

DecayCalibration calibrate(const std::array<Shape, 3>& dims_per_rank = default_calibration_dims());

/// Process-wide calibration, computed once on first use.
const DecayCalibration& cached_calibration();

}  // namespace stra
