#include "stra/region_mask.hpp"

#include <algorithm>

#include "stra/errors.hpp"
#include "stra/varint.hpp"

namespace stra {

RegionMask::RegionMask(Shape dims, Label fill)
    : dims_(std::move(dims)), labels_(element_count(dims_), static_cast<std::uint8_t>(fill)) {}

RegionMask::RegionMask(Shape dims, std::vector<std::uint8_t> labels)
    : dims_(std::move(dims)), labels_(std::move(labels)) {
  if (labels_.size() != element_count(dims_)) throw InvalidInput("mask size does not match dims");
  std::uint8_t top = 0;
  for (auto v : labels_) top = std::max(top, v);
  if (top > 2) throw InvalidInput("mask label out of range");
}

std::size_t RegionMask::count(Label l) const {
  return static_cast<std::size_t>(
      std::count(labels_.begin(), labels_.end(), static_cast<std::uint8_t>(l)));
}

std::vector<std::uint8_t> encode_mask_rle(const RegionMask& mask) {
  std::vector<std::uint8_t> out;
  const auto raw = mask.raw();
  std::size_t i = 0;
  while (i < raw.size()) {
    std::size_t j = i + 1;
    while (j < raw.size() && raw[j] == raw[i]) ++j;
    out.push_back(raw[i]);
    put_varint(out, j - i);
    i = j;
  }
  return out;
}

RegionMask decode_mask_rle(std::span<const std::uint8_t> bytes, const Shape& dims) {
  const std::size_t n = element_count(dims);
  std::vector<std::uint8_t> labels;
  labels.reserve(n);
  ByteReader in(bytes);
  while (!in.done()) {
    const std::uint8_t label = in.u8();
    const std::uint64_t run = in.varint();
    if (label > 2) throw FormatError(FormatError::Kind::Framing, "mask stream has a bad label");
    if (run == 0 || run > n - labels.size())
      throw FormatError(FormatError::Kind::Framing, "mask run overflows the grid");
    labels.insert(labels.end(), run, label);
  }
  if (labels.size() != n) throw FormatError(FormatError::Kind::Framing, "mask stream is truncated");
  return RegionMask(dims, std::move(labels));
}

namespace {

std::vector<std::uint8_t> remap_labels(std::span<const std::uint8_t> src, const Shape& src_dims,
                                       const Shape& dst_dims) {
  const std::size_t rank = dst_dims.size();
  const Shape ss = strides_of(src_dims);
  std::vector<std::uint8_t> out(element_count(dst_dims));
  Shape coord(rank, 0);
  for (auto& v : out) {
    std::size_t off = 0;
    for (std::size_t a = 0; a < rank; ++a) off += std::min(coord[a], src_dims[a] - 1) * ss[a];
    v = src[off];
    for (std::size_t a = rank; a-- > 0;) {
      if (++coord[a] < dst_dims[a]) break;
      coord[a] = 0;
    }
  }
  return out;
}

}  // namespace

RegionMask pad_mask(const RegionMask& mask, const Shape& padded_dims) {
  if (mask.dims() == padded_dims) return mask;
  if (mask.dims().size() != padded_dims.size()) throw InvalidInput("mask rank mismatch");
  for (std::size_t a = 0; a < padded_dims.size(); ++a)
    if (mask.dims()[a] > padded_dims[a]) throw InvalidInput("mask larger than target grid");
  return RegionMask(padded_dims, remap_labels(mask.raw(), mask.dims(), padded_dims));
}

RegionMask crop_mask(const RegionMask& mask, const Shape& dims) {
  if (mask.dims() == dims) return mask;
  if (mask.dims().size() != dims.size()) throw InvalidInput("mask rank mismatch");
  for (std::size_t a = 0; a < dims.size(); ++a)
    if (dims[a] > mask.dims()[a]) throw InvalidInput("crop larger than mask");
  return RegionMask(dims, remap_labels(mask.raw(), mask.dims(), dims));
}

}  // namespace stra
