#include "stra/transform.hpp"

#include <string>

#include "stra/errors.hpp"

namespace stra {

CoeffPyramid::CoeffPyramid(GridHierarchy hierarchy, std::vector<double> coeffs)
    : hierarchy_(std::move(hierarchy)), coeffs_(std::move(coeffs)) {
  if (coeffs_.size() != element_count(hierarchy_.dims()))
    throw InvalidInput("coefficient count does not match the hierarchy");
}

namespace {

struct LineLayout {
  std::size_t outer;
  std::size_t length;
  std::size_t inner;
};

LineLayout layout_along(const Shape& dims, std::size_t axis) {
  LineLayout l{1, dims[axis], 1};
  for (std::size_t a = 0; a < axis; ++a) l.outer *= dims[a];
  for (std::size_t a = axis + 1; a < dims.size(); ++a) l.inner *= dims[a];
  return l;
}

Shape coarsen(const Shape& dims) {
  Shape out(dims.size());
  for (std::size_t a = 0; a < dims.size(); ++a) out[a] = (dims[a] - 1) / 2 + 1;
  return out;
}

// Replaces every node with an odd index along some axis by the multilinear
// interpolant of the all-even nodes. Sweeping the axes in order leaves each
// node interpolated from nodes that are already final.
void interpolate_odd(std::span<double> v, const Shape& dims) {
  for (std::size_t axis = 0; axis < dims.size(); ++axis) {
    const LineLayout l = layout_along(dims, axis);
    for (std::size_t o = 0; o < l.outer; ++o) {
      for (std::size_t i = 0; i < l.inner; ++i) {
        double* line = v.data() + o * l.length * l.inner + i;
        for (std::size_t j = 1; j < l.length; j += 2)
          line[j * l.inner] = 0.5 * (line[(j - 1) * l.inner] + line[(j + 1) * l.inner]);
      }
    }
  }
}

// Load vector of the detail function against coarse hat functions, computed
// as the tensor product of 1-D transfers (restriction of the fine mass matrix).
std::vector<double> load_vector(std::span<const double> details, Shape dims,
                                const GridHierarchy& h, int level) {
  std::vector<double> cur(details.begin(), details.end());
  for (std::size_t axis = 0; axis < dims.size(); ++axis) {
    cur = detail::transfer_axis(cur, dims, axis, h.spacing_at(level, axis));
    dims[axis] = (dims[axis] - 1) / 2 + 1;
  }
  return cur;
}

std::vector<double> correction(std::span<const double> details, const Shape& fine_dims,
                               const GridHierarchy& h, int level) {
  std::vector<double> w = load_vector(details, fine_dims, h, level);
  const Shape coarse_dims = coarsen(fine_dims);
  for (std::size_t axis = 0; axis < coarse_dims.size(); ++axis)
    detail::mass_solve_axis(w, coarse_dims, axis, h.spacing_at(level - 1, axis));
  return w;
}

// Visits every level-l node as (compact index, finest flat index).
template <class Fn>
void for_each_level_node(const GridHierarchy& h, int level, Fn&& fn) {
  const Shape ldims = h.level_dims(level);
  const Shape fstrides = strides_of(h.dims());
  const std::size_t step = h.stride(level);
  const std::size_t rank = ldims.size();
  Shape coord(rank, 0);
  const std::size_t n = element_count(ldims);
  std::size_t fine = 0;
  for (std::size_t k = 0; k < n; ++k) {
    fn(k, fine);
    for (std::size_t a = rank; a-- > 0;) {
      if (++coord[a] < ldims[a]) {
        fine += step * fstrides[a];
        break;
      }
      fine -= (ldims[a] - 1) * step * fstrides[a];
      coord[a] = 0;
    }
  }
}

// Compact index of the even (coarse) nodes inside a level grid.
template <class Fn>
void for_each_even_node(const Shape& dims, Fn&& fn) {
  const Shape cdims = coarsen(dims);
  const Shape fstrides = strides_of(dims);
  const std::size_t rank = dims.size();
  Shape coord(rank, 0);
  const std::size_t n = element_count(cdims);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t fine = 0;
    for (std::size_t a = 0; a < rank; ++a) fine += 2 * coord[a] * fstrides[a];
    fn(k, fine);
    for (std::size_t a = rank; a-- > 0;) {
      if (++coord[a] < cdims[a]) break;
      coord[a] = 0;
    }
  }
}

}  // namespace

namespace detail {

std::vector<double> transfer_axis(std::span<const double> fine, const Shape& dims, std::size_t axis,
                                  double fine_spacing) {
  const LineLayout l = layout_along(dims, axis);
  if (l.length < 3 || l.length % 2 == 0) throw InvalidInput("transfer needs an odd line of >= 3 nodes");
  const std::size_t nc = (l.length - 1) / 2 + 1;
  std::vector<double> out(l.outer * nc * l.inner);
  // Rows of the fine-to-coarse mass matrix: integral of a coarse hat times
  // each fine hat it overlaps.
  const double centre = fine_spacing * 5.0 / 6.0;
  const double edge = fine_spacing * 5.0 / 12.0;
  const double side = fine_spacing * 0.5;
  const double far = fine_spacing / 12.0;
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t i = 0; i < l.inner; ++i) {
      const double* src = fine.data() + o * l.length * l.inner + i;
      double* dst = out.data() + o * nc * l.inner + i;
      auto f = [&](std::size_t j) { return src[j * l.inner]; };
      const std::size_t n = l.length;
      dst[0] = edge * f(0) + side * f(1) + far * f(2);
      for (std::size_t c = 1; c + 1 < nc; ++c)
        dst[c * l.inner] = centre * f(2 * c) + side * (f(2 * c - 1) + f(2 * c + 1)) + far * (f(2 * c - 2) + f(2 * c + 2));
      dst[(nc - 1) * l.inner] = edge * f(n - 1) + side * f(n - 2) + far * f(n - 3);
    }
  }
  return out;
}

void mass_solve_axis(std::span<double> values, const Shape& dims, std::size_t axis,
                     double coarse_spacing) {
  const LineLayout l = layout_along(dims, axis);
  const std::size_t n = l.length;
  if (n < 2) throw InvalidInput("mass solve needs at least two nodes");
  const double off = coarse_spacing / 6.0;
  // Thomas elimination factors are shared by every line along this axis.
  std::vector<double> upper(n), inv_pivot(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double diag = (k == 0 || k + 1 == n) ? coarse_spacing / 3.0 : 2.0 * coarse_spacing / 3.0;
    const double pivot = k == 0 ? diag : diag - off * upper[k - 1];
    inv_pivot[k] = 1.0 / pivot;
    upper[k] = off * inv_pivot[k];
  }
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t i = 0; i < l.inner; ++i) {
      double* x = values.data() + o * n * l.inner + i;
      auto at = [&](std::size_t k) -> double& { return x[k * l.inner]; };
      at(0) *= inv_pivot[0];
      for (std::size_t k = 1; k < n; ++k) at(k) = (at(k) - off * at(k - 1)) * inv_pivot[k];
      for (std::size_t k = n - 1; k-- > 0;) at(k) -= upper[k] * at(k + 1);
    }
  }
}

}  // namespace detail

LevelSplit decompose_1d_level(std::span<const double> values, double fine_spacing) {
  const std::size_t n = values.size();
  if (n < 3 || n % 2 == 0) throw InvalidInput("level line must have an odd node count >= 3");
  const Shape dims{n};
  std::vector<double> interp(values.begin(), values.end());
  interpolate_odd(interp, dims);
  LevelSplit out;
  out.details.resize(n);
  for (std::size_t j = 0; j < n; ++j) out.details[j] = values[j] - interp[j];
  std::vector<double> w = detail::transfer_axis(out.details, dims, 0, fine_spacing);
  detail::mass_solve_axis(w, Shape{w.size()}, 0, 2.0 * fine_spacing);
  out.coarse.resize(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out.coarse[i] = values[2 * i] + w[i];
  return out;
}

CoeffPyramid decompose(const Field& field) {
  if (!field.is_dyadic()) throw InvalidInput("decompose requires dyadic extents; pad first");
  GridHierarchy h(field.dims(), field.spacing());
  std::vector<double> coeffs(field.size());
  std::vector<double> cur(field.values().begin(), field.values().end());

  for (int level = h.levels(); level >= 1; --level) {
    const Shape dims = h.level_dims(level);
    std::vector<double> det(cur);
    {
      std::vector<double> interp(cur);
      interpolate_odd(interp, dims);
      for (std::size_t k = 0; k < det.size(); ++k) det[k] -= interp[k];
    }
    for_each_level_node(h, level, [&](std::size_t k, std::size_t fine) { coeffs[fine] = det[k]; });

    const std::vector<double> w = correction(det, dims, h, level);
    std::vector<double> coarse(w.size());
    for_each_even_node(dims, [&](std::size_t c, std::size_t k) { coarse[c] = cur[k] + w[c]; });
    cur = std::move(coarse);
  }
  for_each_level_node(h, 0, [&](std::size_t k, std::size_t fine) { coeffs[fine] = cur[k]; });
  return CoeffPyramid(std::move(h), std::move(coeffs));
}

Field recompose(const CoeffPyramid& pyramid) {
  const GridHierarchy& h = pyramid.hierarchy();
  const auto coeffs = pyramid.coeffs();
  std::vector<double> cur(element_count(h.level_dims(0)));
  for_each_level_node(h, 0, [&](std::size_t k, std::size_t fine) { cur[k] = coeffs[fine]; });

  for (int level = 1; level <= h.levels(); ++level) {
    const Shape dims = h.level_dims(level);
    std::vector<double> det(element_count(dims));
    for_each_level_node(h, level, [&](std::size_t k, std::size_t fine) { det[k] = coeffs[fine]; });
    for_each_even_node(dims, [&](std::size_t, std::size_t k) { det[k] = 0.0; });

    const std::vector<double> w = correction(det, dims, h, level);
    std::vector<double> next(det.size(), 0.0);
    for_each_even_node(dims, [&](std::size_t c, std::size_t k) { next[k] = cur[c] - w[c]; });
    interpolate_odd(next, dims);
    for (std::size_t k = 0; k < next.size(); ++k) next[k] += det[k];
    cur = std::move(next);
  }
  return Field(h.dims(), std::move(cur), h.spacing());
}

Field impulse_response(const Shape& dims, int level, const Shape& node) {
  GridHierarchy h(dims);
  if (node.size() != dims.size()) throw InvalidInput("impulse node rank differs from dims");
  for (std::size_t a = 0; a < dims.size(); ++a)
    if (node[a] >= dims[a]) throw InvalidInput("impulse node outside the grid");
  if (h.level_of(node) != level)
    throw InvalidInput("node does not belong to N*_" + std::to_string(level));
  std::vector<double> coeffs(element_count(dims), 0.0);
  const Shape strides = strides_of(dims);
  std::size_t flat = 0;
  for (std::size_t a = 0; a < dims.size(); ++a) flat += node[a] * strides[a];
  coeffs[flat] = 1.0;
  return recompose(CoeffPyramid(std::move(h), std::move(coeffs)));
}

}  // namespace stra
