#include "stra/hierarchy.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <string>

#include "stra/errors.hpp"

namespace stra {

GridHierarchy::GridHierarchy(Shape dims, std::vector<double> spacing)
    : dims_(std::move(dims)), spacing_(std::move(spacing)) {
  if (dims_.empty() || dims_.size() > kMaxRank) throw InvalidInput("hierarchy rank must be 1..3");
  if (spacing_.empty()) spacing_.assign(dims_.size(), 1.0);
  if (spacing_.size() != dims_.size()) throw InvalidInput("spacing rank differs from dims rank");
  levels_ = 64;
  for (std::size_t n : dims_) {
    if (!is_dyadic_extent(n))
      throw InvalidInput("extent " + std::to_string(n) + " is not of the form 2^k + 1");
    levels_ = std::min(levels_, std::countr_zero(n - 1));
  }
}

Shape GridHierarchy::level_dims(int level) const {
  if (level < 0 || level > levels_) throw InvalidInput("level out of range");
  Shape out(dims_.size());
  for (std::size_t a = 0; a < dims_.size(); ++a) out[a] = (dims_[a] - 1) / stride(level) + 1;
  return out;
}

int GridHierarchy::level_of(const Shape& coord) const {
  int shared = levels_;
  for (std::size_t c : coord)
    if (c != 0) shared = std::min(shared, std::countr_zero(c));
  return levels_ - shared;
}

int GridHierarchy::level_of_flat(std::size_t flat) const {
  Shape coord(dims_.size());
  for (std::size_t a = dims_.size(); a-- > 0;) {
    coord[a] = flat % dims_[a];
    flat /= dims_[a];
  }
  return level_of(coord);
}

std::vector<unsigned char> GridHierarchy::level_map() const {
  // Per-axis trailing-zero counts capped at L; missing leading axes are a
  // single coordinate that never limits the minimum.
  const std::size_t shift = kMaxRank - dims_.size();
  std::array<std::vector<int>, kMaxRank> tz;
  for (std::size_t a = 0; a < kMaxRank; ++a) {
    if (a < shift) {
      tz[a].assign(1, levels_);
      continue;
    }
    const std::size_t n = dims_[a - shift];
    tz[a].assign(n, levels_);
    for (std::size_t c = 1; c < n; ++c) tz[a][c] = std::min(levels_, std::countr_zero(c));
  }
  std::vector<unsigned char> out(element_count(dims_));
  std::size_t i = 0;
  for (int t0 : tz[0])
    for (int t1 : tz[1]) {
      const int m = std::min(t0, t1);
      for (int t2 : tz[2]) out[i++] = static_cast<unsigned char>(levels_ - std::min(m, t2));
    }
  return out;
}

GridHierarchy build_hierarchy(const Shape& dims, const std::vector<double>& spacing) {
  return GridHierarchy(dims, spacing);
}

}  // namespace stra
