#include "stra/calibration.hpp"

#include <algorithm>
#include <cmath>

#include "stra/errors.hpp"
#include "stra/hierarchy.hpp"
#include "stra/transform.hpp"

namespace stra {

namespace {

// Chebyshev index distance from `node` for every finest node, row-major.
std::vector<std::size_t> chebyshev_from(const Shape& dims, const Shape& node) {
  const std::size_t rank = dims.size();
  std::vector<std::size_t> out(element_count(dims));
  Shape coord(rank, 0);
  for (auto& d : out) {
    d = 0;
    for (std::size_t a = 0; a < rank; ++a)
      d = std::max(d, coord[a] > node[a] ? coord[a] - node[a] : node[a] - coord[a]);
    for (std::size_t a = rank; a-- > 0;) {
      if (++coord[a] < dims[a]) break;
      coord[a] = 0;
    }
  }
  return out;
}

double fit_slope(const std::vector<double>& amplitude) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t d = 1; d < amplitude.size() && d <= 5; ++d) {
    if (!(amplitude[d] > 0.0)) continue;
    const double x = static_cast<double>(d), y = std::log(amplitude[d]);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
    ++n;
  }
  if (n < 2) return 0.0;
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Largest |response| * base^dist over nodes 1..5 coarse spacings away.
double tail_envelope(const Shape& dims, int level, const Shape& node) {
  const GridHierarchy h(dims);
  const Field response = impulse_response(dims, level, node);
  const auto dist = chebyshev_from(dims, node);
  const double coarse = 2.0 * static_cast<double>(h.stride(level));
  double env = 0.0;
  for (std::size_t y = 0; y < dist.size(); ++y) {
    const double d = static_cast<double>(dist[y]) / coarse;
    if (d < 1.0 || d > 5.0) continue;
    env = std::max(env, std::abs(response[y]) * std::pow(kDecayBase, d));
  }
  return env;
}

}  // namespace

Shape centre_node(const Shape& dims, int level, unsigned odd_axes) {
  const GridHierarchy h(dims);
  if (level < 1 || level > h.levels()) throw InvalidInput("centre_node needs 1 <= level <= L");
  if (odd_axes == 0 || odd_axes >= (1u << dims.size()))
    throw InvalidInput("odd_axes must select at least one existing axis");
  const std::size_t step = h.stride(level);
  Shape node(dims.size());
  for (std::size_t a = 0; a < dims.size(); ++a) {
    const std::size_t c = ((dims[a] - 1) / 2) / (2 * step) * (2 * step);
    node[a] = (odd_axes >> a & 1u) ? c + step : c;
  }
  return node;
}

DecayProfile decay_profile(const Shape& dims, int level, const Shape& node, int max_distance) {
  const GridHierarchy h(dims);
  const Field response = impulse_response(dims, level, node);
  const auto dist = chebyshev_from(dims, node);
  const std::size_t coarse = 2 * h.stride(level);
  DecayProfile p;
  p.level = level;
  p.node = node;
  p.amplitude.assign(static_cast<std::size_t>(max_distance) + 1, 0.0);
  for (std::size_t y = 0; y < dist.size(); ++y) {
    if (dist[y] % coarse != 0) continue;
    const std::size_t d = dist[y] / coarse;
    if (d <= static_cast<std::size_t>(max_distance))
      p.amplitude[d] = std::max(p.amplitude[d], std::abs(response[y]));
  }
  p.slope = fit_slope(p.amplitude);
  return p;
}

std::array<Shape, 3> default_calibration_dims() {
  return {Shape{65}, Shape{33, 33}, Shape{17, 17, 17}};
}

DecayCalibration calibrate(const std::array<Shape, 3>& dims_per_rank) {
  DecayCalibration cal;
  double slope_sum = 0.0;
  int slope_count = 0;
  for (std::size_t r = 1; r <= 3; ++r) {
    const Shape& dims = dims_per_rank[r - 1];
    if (dims.size() != r) throw InvalidInput("calibration grid rank mismatch");
    const GridHierarchy h(dims);
    // Every coefficient node in the low half of each axis; the transform is
    // symmetric under axis reversal, so this covers the whole grid.
    double env = 0.0;
    Shape coord(r, 0);
    const std::size_t n = element_count(dims);
    for (std::size_t k = 0; k < n; ++k) {
      bool low_half = true;
      for (std::size_t a = 0; a < r; ++a) low_half = low_half && 2 * coord[a] <= dims[a] - 1;
      const int level = h.level_of(coord);
      if (low_half && level >= 1) env = std::max(env, tail_envelope(dims, level, coord));
      for (std::size_t a = r; a-- > 0;) {
        if (++coord[a] < dims[a]) break;
        coord[a] = 0;
      }
    }
    cal.scale[r - 1] = kCalibrationSafety * env;
    // The decay slope is read off an interior node of a grid wide enough that
    // distance 5 stays clear of the boundary.
    Shape wide(r, 33);
    wide[0] = r == 1 ? 129 : (r == 2 ? 65 : 33);
    if (r == 2) wide[1] = 65;
    const GridHierarchy hw(wide);
    const DecayProfile p = decay_profile(wide, hw.levels(), centre_node(wide, hw.levels(), 1u));
    cal.slope[r - 1] = p.slope;
    slope_sum += p.slope;
    ++slope_count;
  }
  cal.measured_ratio = std::exp(slope_sum / slope_count);
  return cal;
}

const DecayCalibration& cached_calibration() {
  static const DecayCalibration cal = calibrate();
  return cal;
}

}  // namespace stra
