#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace stra {

using Shape = std::vector<std::size_t>;

inline constexpr std::size_t kMaxRank = 3;

std::size_t element_count(const Shape& dims);

/// Row-major (last axis fastest) strides for `dims`.
Shape strides_of(const Shape& dims);

/// True when n == 2^k + 1 for some k >= 1.
bool is_dyadic_extent(std::size_t n);

/// Smallest 2^k + 1 (k >= 1) that is >= n.
std::size_t dyadic_extent_for(std::size_t n);

/// N-dimensional (1..3 axes) field of doubles on a uniform grid.
///
/// `orig_dims` records the extents before dyadic padding; it equals `dims`
/// for fields that were never padded.
class Field {
 public:
  Field() = default;
  Field(Shape dims, std::vector<double> data, std::vector<double> spacing = {},
        Shape orig_dims = {});

  static Field zeros(Shape dims, std::vector<double> spacing = {});

  const Shape& dims() const noexcept { return dims_; }
  const Shape& orig_dims() const noexcept { return orig_dims_; }
  const std::vector<double>& spacing() const noexcept { return spacing_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const double> values() const noexcept { return data_; }
  double operator[](std::size_t i) const { return data_[i]; }

  bool is_dyadic() const;
  bool is_padded() const { return orig_dims_ != dims_; }

 private:
  Shape dims_;
  std::vector<double> data_;
  std::vector<double> spacing_;
  Shape orig_dims_;
};

/// Grows every axis to the next 2^k + 1 extent, replicating edge values.
Field pad_to_dyadic(const Field& field);

/// Leading `orig_dims` block of a padded field.
Field crop_to_original(const Field& field);

}  // namespace stra
