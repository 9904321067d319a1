#include "stra/codec.hpp"

#include <zlib.h>

#include <chrono>
#include <cmath>
#include <limits>

#include "stra/calibration.hpp"
#include "stra/errors.hpp"
#include "stra/huffman.hpp"
#include "stra/varint.hpp"

namespace stra {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool protected_node(const RegionMask& mask, const std::vector<unsigned char>& level, std::size_t i) {
  return mask.is_protected(i) || level[i] == 0;
}

// Magic, version and the CRC field itself.
constexpr std::size_t kHeaderPrefix = 10;

// CRC-32 over the whole blob except the 4-byte CRC field at offset 6.
std::uint32_t blob_crc(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, bytes.data(), 6);
  crc = crc32(crc, bytes.data() + kHeaderPrefix, static_cast<uInt>(bytes.size() - kHeaderPrefix));
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

double bin_width(double tau, int levels, NormMode norm, double decay_scale) {
  const double terms = static_cast<double>(levels + 1);
  if (norm == NormMode::Rms) return 2.0 * std::sqrt(3.0) * tau / std::sqrt(terms);
  return 2.0 * tau / (decay_scale * terms);
}

QuantizedPyramid quantize(const CoeffPyramid& pyramid, const RegionMask& mask, double bin_protected,
                          double bin_background) {
  if (!(bin_protected > 0.0) || !(bin_background > 0.0)) throw ConfigError("quantization bins must be positive");
  const GridHierarchy& h = pyramid.hierarchy();
  if (mask.dims() != h.dims()) throw InvalidInput("mask does not match the pyramid grid");
  const std::vector<unsigned char> level = h.level_map();
  QuantizedPyramid out{h.dims(), h.levels(), std::vector<std::int64_t>(pyramid.size()), bin_protected,
                       bin_background};
  constexpr double kLimit = 4.0e18;
  for (std::size_t i = 0; i < pyramid.size(); ++i) {
    const double bin = protected_node(mask, level, i) ? bin_protected : bin_background;
    const double v = pyramid[i] / bin;
    if (!(std::abs(v) < kLimit)) throw ConfigError("coefficient too large for the requested bound");
    out.q[i] = std::llround(v);
  }
  return out;
}

QuantizedPyramid quantize(const CoeffPyramid& pyramid, const RegionMask& mask, const BoundMap& bounds,
                          double decay_scale) {
  const int L = pyramid.hierarchy().levels();
  return quantize(pyramid, mask, bin_width(bounds.tau0(), L, bounds.norm(), decay_scale),
                  bin_width(bounds.tau1(), L, bounds.norm(), decay_scale));
}

CoeffPyramid dequantize(const QuantizedPyramid& q, const RegionMask& mask, const std::vector<double>& spacing) {
  GridHierarchy h(q.dims, spacing);
  if (h.levels() != q.levels || mask.dims() != q.dims || q.q.size() != element_count(q.dims))
    throw InvalidInput("quantized pyramid is inconsistent");
  const std::vector<unsigned char> level = h.level_map();
  std::vector<double> c(q.q.size());
  for (std::size_t i = 0; i < c.size(); ++i)
    c[i] = static_cast<double>(q.q[i]) * (protected_node(mask, level, i) ? q.bin_protected : q.bin_background);
  return CoeffPyramid(std::move(h), std::move(c));
}

std::vector<std::uint8_t> backend_pack(std::span<const std::uint8_t> bytes, Backend backend) {
  if (backend == Backend::None) return {bytes.begin(), bytes.end()};
  if (backend != Backend::Zlib) throw FormatError(FormatError::Kind::Unsupported, "unknown backend");
  std::vector<std::uint8_t> out;
  put_varint(out, bytes.size());
  const std::size_t head = out.size();
  uLongf len = compressBound(static_cast<uLong>(bytes.size()));
  out.resize(head + len);
  if (compress2(out.data() + head, &len, bytes.data(), static_cast<uLong>(bytes.size()), Z_BEST_COMPRESSION) != Z_OK)
    throw std::runtime_error("zlib compression failed");
  out.resize(head + len);
  return out;
}

std::vector<std::uint8_t> backend_unpack(std::span<const std::uint8_t> bytes, Backend backend) {
  if (backend == Backend::None) return {bytes.begin(), bytes.end()};
  if (backend != Backend::Zlib) throw FormatError(FormatError::Kind::Unsupported, "unknown backend");
  ByteReader in(bytes);
  const std::uint64_t size = in.varint();
  // Deflate cannot expand data by more than ~1032x.
  if (size > 1100 * static_cast<std::uint64_t>(bytes.size()) + 64)
    throw FormatError(FormatError::Kind::Framing, "implausible unpacked size");
  const auto body = in.take(in.remaining());
  std::vector<std::uint8_t> out(size);
  uLongf len = static_cast<uLongf>(size);
  if (uncompress(out.data(), &len, body.data(), static_cast<uLong>(body.size())) != Z_OK || len != size)
    throw FormatError(FormatError::Kind::Framing, "zlib stream is corrupt");
  return out;
}

std::vector<std::uint8_t> serialize_blob(const CompressedBlob& blob) {
  const BlobHeader& h = blob.header;
  const QuantizedPyramid& q = blob.quantized;
  const std::size_t r = h.dims.size();
  if (r == 0 || r > kMaxRank || h.orig_dims.size() != r || h.spacing.size() != r || q.dims != h.dims ||
      blob.mask.dims() != h.dims)
    throw InvalidInput("blob parts disagree on the grid");

  // Only RoI labels are stored; the decoder rebuilds the buffer from R_bz.
  RegionMask roi(blob.mask.dims());
  for (std::size_t i = 0; i < roi.size(); ++i)
    if (blob.mask[i] == Label::Roi) roi.set(i, Label::Roi);
  const std::vector<std::uint8_t> mask = backend_pack(encode_mask_rle(roi), h.backend);
  const std::vector<std::uint8_t> payload = backend_pack(huffman_encode(q.q), h.backend);

  std::vector<std::uint8_t> out{'S', 'T', 'R', 'A'};
  put_le<std::uint16_t>(out, kFormatVersion);
  put_le<std::uint32_t>(out, 0);  // CRC placeholder
  put_u8(out, h.spatial_rank);
  put_u8(out, static_cast<std::uint8_t>(r));
  put_u8(out, static_cast<std::uint8_t>(q.levels));
  put_u8(out, static_cast<std::uint8_t>(h.norm));
  put_u8(out, static_cast<std::uint8_t>(h.backend));
  put_le<std::uint16_t>(out, h.buffer_width);
  put_le<std::uint32_t>(out, h.timesteps);
  for (auto n : h.dims) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(n));
  for (auto n : h.orig_dims) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(n));
  for (auto s : h.spacing) put_f64(out, s);
  put_f64(out, h.tau0);
  put_f64(out, h.tau1);
  put_f64(out, q.bin_protected);
  put_f64(out, q.bin_background);
  put_le<std::uint64_t>(out, mask.size());
  put_le<std::uint64_t>(out, payload.size());
  out.insert(out.end(), mask.begin(), mask.end());
  out.insert(out.end(), payload.begin(), payload.end());

  const uLong crc = blob_crc(out);
  for (int i = 0; i < 4; ++i) out[6 + i] = static_cast<std::uint8_t>(crc >> (8 * i));
  return out;
}

CompressedBlob parse_blob(std::span<const std::uint8_t> bytes) {
  using K = FormatError::Kind;
  if (bytes.size() < kHeaderPrefix) throw FormatError(K::Framing, "blob too short");
  ByteReader in(bytes);
  const auto magic = in.take(4);
  const auto version = in.le<std::uint16_t>();
  const auto stored_crc = in.le<std::uint32_t>();
  if (blob_crc(bytes) != stored_crc) throw FormatError(K::Checksum, "checksum mismatch");
  if (!(magic[0] == 'S' && magic[1] == 'T' && magic[2] == 'R' && magic[3] == 'A'))
    throw FormatError(K::Framing, "not a .stra blob");
  if (version != kFormatVersion) throw FormatError(K::Unsupported, "unsupported format version");

  CompressedBlob blob;
  BlobHeader& h = blob.header;
  h.spatial_rank = in.u8();
  const std::size_t r = in.u8();
  const int levels = in.u8();
  const auto norm = in.u8();
  const auto backend = in.u8();
  if (r == 0 || r > kMaxRank || h.spatial_rank == 0 || h.spatial_rank > r || norm > 1)
    throw FormatError(K::Framing, "bad header fields");
  if (backend > 1) throw FormatError(K::Unsupported, "unknown backend");
  h.norm = static_cast<NormMode>(norm);
  h.backend = static_cast<Backend>(backend);
  h.buffer_width = in.le<std::uint16_t>();
  h.timesteps = in.le<std::uint32_t>();
  h.dims.resize(r);
  h.orig_dims.resize(r);
  h.spacing.resize(r);
  for (auto& n : h.dims) n = in.le<std::uint32_t>();
  for (auto& n : h.orig_dims) n = in.le<std::uint32_t>();
  for (auto& s : h.spacing) s = in.f64();
  h.tau0 = in.f64();
  h.tau1 = in.f64();
  QuantizedPyramid& q = blob.quantized;
  q.bin_protected = in.f64();
  q.bin_background = in.f64();
  const auto mask_len = in.le<std::uint64_t>();
  const auto payload_len = in.le<std::uint64_t>();
  if (mask_len > in.remaining() || payload_len != in.remaining() - mask_len)
    throw FormatError(K::Framing, "section lengths do not match the blob size");

  for (std::size_t a = 0; a < r; ++a)
    if (!is_dyadic_extent(h.dims[a]) || h.orig_dims[a] > h.dims[a] || h.orig_dims[a] == 0)
      throw FormatError(K::Framing, "bad grid extents");
  q.dims = h.dims;
  q.levels = levels;
  const RegionMask roi = decode_mask_rle(backend_unpack(in.take(mask_len), h.backend), h.dims);
  if (roi.count(Label::Buffer) != 0) throw FormatError(K::Framing, "mask stream carries buffer labels");
  blob.mask = dilate_buffer(roi, h.buffer_width, GridHierarchy(h.dims, h.spacing));
  const std::vector<std::uint8_t> packed = backend_unpack(in.take(payload_len), h.backend);
  q.q = huffman_decode(packed, element_count(h.dims));
  return blob;
}

TemporalStack::TemporalStack(std::vector<Field> slices) : slices_(std::move(slices)) {
  if (slices_.empty()) throw InvalidInput("a stack needs at least one slice");
  for (const Field& f : slices_)
    if (f.dims() != slices_[0].dims() || f.spacing() != slices_[0].spacing())
      throw InvalidInput("stack slices differ in dims or spacing");
  if (slices_.size() > 1 && slices_[0].rank() >= kMaxRank)
    throw InvalidInput("stacking needs slices of rank <= 2");
}

Field TemporalStack::to_field() const {
  const std::size_t T = slices_.size();
  if (T == 1) return slices_[0];
  const Field& s0 = slices_[0];
  Shape dims = s0.dims();
  dims.push_back(T);
  std::vector<double> spacing = s0.spacing();
  spacing.push_back(1.0);
  std::vector<double> data(s0.size() * T);
  for (std::size_t t = 0; t < T; ++t) {
    const auto v = slices_[t].values();
    for (std::size_t i = 0; i < v.size(); ++i) data[i * T + t] = v[i];
  }
  return Field(std::move(dims), std::move(data), std::move(spacing));
}

TemporalStack TemporalStack::from_field(const Field& field, std::size_t timesteps) {
  if (timesteps <= 1) return TemporalStack({field});
  if (field.rank() < 2 || field.dims().back() != timesteps) throw InvalidInput("field has no matching time axis");
  Shape dims(field.dims().begin(), field.dims().end() - 1);
  std::vector<double> spacing(field.spacing().begin(), field.spacing().end() - 1);
  const std::size_t n = element_count(dims);
  std::vector<Field> slices;
  slices.reserve(timesteps);
  for (std::size_t t = 0; t < timesteps; ++t) {
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = field[i * timesteps + t];
    slices.emplace_back(dims, std::move(data), spacing);
  }
  return TemporalStack(std::move(slices));
}

Analysis analyze(const TemporalStack& stack, const CompressConfig& config) {
  if (stack.timesteps() == 0) throw InvalidInput("empty stack");
  if (!(config.tau0 > 0.0)) throw ConfigError("tau0 must be positive");
  if (config.tau1 != 0.0 && config.tau1 < config.tau0) throw ConfigError("tau1 must be at least tau0");
  if (config.adaptive && !config.mask) config.refinement.validate();

  const auto t0 = Clock::now();
  Field padded = pad_to_dyadic(stack.to_field());
  CoeffPyramid pyramid = decompose(padded);

  const auto t1 = Clock::now();
  RegionMask mask;
  if (!config.adaptive) {
    mask = RegionMask(padded.dims(), Label::Roi);
  } else {
    RegionMask roi;
    if (config.mask) {
      if (config.mask->dims() == padded.dims()) roi = *config.mask;
      else if (config.mask->dims() == padded.orig_dims()) roi = pad_mask(*config.mask, padded.dims());
      else throw InvalidInput("supplied mask does not match the field grid");
    } else {
      roi = detect_rois(coefficient_heatmap(pyramid), config.refinement);
    }
    mask = dilate_buffer(roi, config.buffer_width, pyramid.hierarchy());
  }
  const double detect = seconds_since(t1);

  Analysis a{std::move(padded), std::move(pyramid), std::move(mask), stack[0].rank(), stack.timesteps()};
  a.detect_seconds = detect;
  a.analysis_seconds = seconds_since(t0);
  return a;
}

CompressResult encode_analysis(const Analysis& a, const CompressConfig& config) {
  const double scale = cached_calibration().scale_for(a.padded.rank());
  const auto t0 = Clock::now();

  CompressStats stats;
  stats.roi_nodes = a.mask.count(Label::Roi);
  stats.buffer_nodes = a.mask.count(Label::Buffer);
  const bool has_background = stats.roi_nodes + stats.buffer_nodes < a.mask.size();

  double tau1 = config.tau0;
  if (has_background) {
    const double requested = config.tau1 > 0.0 ? config.tau1 : std::numeric_limits<double>::infinity();
    tau1 = derive_tau1(config.tau0, config.buffer_width, scale, requested);
    stats.tau1_capped = config.tau1 > 0.0 && tau1 < config.tau1;
  }
  const BoundMap bounds(config.tau0, tau1, config.buffer_width, config.norm, scale);

  CompressedBlob blob;
  blob.header.spatial_rank = static_cast<std::uint8_t>(a.spatial_rank);
  blob.header.timesteps = static_cast<std::uint32_t>(a.timesteps);
  blob.header.norm = config.norm;
  blob.header.backend = config.backend;
  blob.header.buffer_width = static_cast<std::uint16_t>(config.buffer_width);
  blob.header.dims = a.padded.dims();
  blob.header.orig_dims = a.padded.orig_dims();
  blob.header.spacing = a.padded.spacing();
  blob.header.tau0 = bounds.tau0();
  blob.header.tau1 = bounds.tau1();
  blob.mask = a.mask;
  blob.quantized = quantize(a.pyramid, a.mask, bounds, scale);

  CompressResult out{serialize_blob(blob), stats};
  out.stats.tau1 = tau1;
  out.stats.raw_bytes = element_count(a.padded.orig_dims()) * sizeof(double);
  out.stats.blob_bytes = out.blob.size();
  out.stats.detect_seconds = a.detect_seconds;
  out.stats.total_seconds = a.analysis_seconds + seconds_since(t0);
  return out;
}

CompressResult compress(const TemporalStack& stack, const CompressConfig& config) {
  return encode_analysis(analyze(stack, config), config);
}

TemporalStack decompress(std::span<const std::uint8_t> bytes) {
  CompressedBlob blob = parse_blob(bytes);
  const BlobHeader& h = blob.header;
  const std::size_t grid_rank = h.dims.size();
  if (grid_rank != h.spatial_rank + (h.timesteps > 1 ? 1u : 0u) ||
      (h.timesteps > 1 && h.orig_dims.back() != h.timesteps))
    throw FormatError(FormatError::Kind::Framing, "inconsistent stack geometry");
  const CoeffPyramid pyramid = dequantize(blob.quantized, blob.mask, h.spacing);
  const Field full = recompose(pyramid);
  const std::vector<double> values(full.values().begin(), full.values().end());
  const Field cropped = crop_to_original(Field(h.dims, values, h.spacing, h.orig_dims));
  return TemporalStack::from_field(cropped, h.timesteps);
}

RatioSearch search_ratio(std::span<const Analysis> analyses, CompressConfig config, double target_ratio, double lo,
                         double hi, int iterations) {
  auto run = [&](double tau0) {
    config.tau0 = tau0;
    RatioSearch r{tau0, 0.0, {}};
    std::size_t raw = 0, packed = 0;
    for (const Analysis& a : analyses) {
      r.results.push_back(encode_analysis(a, config));
      raw += r.results.back().stats.raw_bytes;
      packed += r.results.back().stats.blob_bytes;
    }
    r.ratio = packed ? static_cast<double>(raw) / packed : 0.0;
    return r;
  };
  RatioSearch best = run(hi);
  if (best.ratio < target_ratio) return best;
  double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < iterations; ++i) {
    const double mid = 0.5 * (a + b);
    RatioSearch r = run(std::exp(mid));
    if (r.ratio >= target_ratio) {
      b = mid;
      best = std::move(r);
    } else {
      a = mid;
    }
  }
  return best;
}

}  // namespace stra
