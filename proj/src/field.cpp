#include "stra/field.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <string>

#include "stra/errors.hpp"

namespace stra {

std::size_t element_count(const Shape& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

Shape strides_of(const Shape& dims) {
  Shape strides(dims.size(), 1);
  for (std::size_t a = dims.size(); a-- > 1;) strides[a - 1] = strides[a] * dims[a];
  return strides;
}

bool is_dyadic_extent(std::size_t n) {
  if (n < 3) return false;
  const std::size_t m = n - 1;
  return (m & (m - 1)) == 0;
}

std::size_t dyadic_extent_for(std::size_t n) {
  std::size_t m = 2;
  while (m + 1 < n) m *= 2;
  return m + 1;
}

Field::Field(Shape dims, std::vector<double> data, std::vector<double> spacing, Shape orig_dims)
    : dims_(std::move(dims)),
      data_(std::move(data)),
      spacing_(std::move(spacing)),
      orig_dims_(std::move(orig_dims)) {
  if (dims_.empty() || dims_.size() > kMaxRank)
    throw InvalidInput("field rank must be between 1 and 3, got " + std::to_string(dims_.size()));
  if (element_count(dims_) != data_.size())
    throw InvalidInput("field data length " + std::to_string(data_.size()) +
                       " does not match its dims");
  if (spacing_.empty()) spacing_.assign(dims_.size(), 1.0);
  if (spacing_.size() != dims_.size()) throw InvalidInput("spacing rank differs from dims rank");
  for (double h : spacing_)
    if (!(h > 0.0)) throw InvalidInput("grid spacing must be positive");
  if (orig_dims_.empty()) orig_dims_ = dims_;
  if (orig_dims_.size() != dims_.size()) throw InvalidInput("orig_dims rank differs from dims rank");
  for (std::size_t a = 0; a < dims_.size(); ++a)
    if (orig_dims_[a] > dims_[a] || orig_dims_[a] == 0)
      throw InvalidInput("orig_dims must be positive and not exceed dims");
}

Field Field::zeros(Shape dims, std::vector<double> spacing) {
  std::vector<double> data(element_count(dims), 0.0);
  return Field(std::move(dims), std::move(data), std::move(spacing));
}

bool Field::is_dyadic() const {
  return std::all_of(dims_.begin(), dims_.end(), is_dyadic_extent);
}

namespace {

// Copies between two row-major blocks; `index_map` gives the source coordinate
// for each destination coordinate along an axis.
std::vector<double> remap(std::span<const double> src, const Shape& src_dims, const Shape& dst_dims,
                          const std::function<std::size_t(std::size_t, std::size_t)>& index_map) {
  const std::size_t rank = dst_dims.size();
  const Shape src_strides = strides_of(src_dims);
  std::vector<double> out(element_count(dst_dims));
  Shape coord(rank, 0);
  for (double& v : out) {
    std::size_t offset = 0;
    for (std::size_t a = 0; a < rank; ++a) offset += index_map(a, coord[a]) * src_strides[a];
    v = src[offset];
    for (std::size_t a = rank; a-- > 0;) {
      if (++coord[a] < dst_dims[a]) break;
      coord[a] = 0;
    }
  }
  return out;
}

}  // namespace

Field pad_to_dyadic(const Field& field) {
  const Shape& dims = field.dims();
  Shape padded(dims.size());
  for (std::size_t a = 0; a < dims.size(); ++a) {
    if (dims[a] < 2) throw InvalidInput("cannot pad an axis with fewer than 2 nodes");
    padded[a] = dyadic_extent_for(dims[a]);
  }
  auto data = remap(field.values(), dims, padded,
                    [&](std::size_t a, std::size_t i) { return std::min(i, dims[a] - 1); });
  return Field(padded, std::move(data), field.spacing(), dims);
}

Field crop_to_original(const Field& field) {
  if (!field.is_padded()) return field;
  const Shape& orig = field.orig_dims();
  auto data = remap(field.values(), field.dims(), orig, [](std::size_t, std::size_t i) { return i; });
  return Field(orig, std::move(data), field.spacing());
}

}  // namespace stra
