#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "stra/field.hpp"
#include "stra/region_mask.hpp"
#include "stra/roi.hpp"
#include "stra/transform.hpp"

namespace stra {

inline constexpr std::uint16_t kFormatVersion = 1;

enum class Backend : std::uint8_t { None = 0, Zlib = 1 };

/// Integer codes plus the two bin widths they were quantized with.
struct QuantizedPyramid {
  Shape dims;
  int levels = 0;
  std::vector<std::int64_t> q;
  double bin_protected = 0.0;
  double bin_background = 0.0;

  bool operator==(const QuantizedPyramid&) const = default;
};

/// Bin widths for a given bound, grid depth and dimension.
/// MAX: 2 tau / (C_d (L + 1)).  RMS: 2 sqrt(3) tau / sqrt(L + 1).
double bin_width(double tau, int levels, NormMode norm, double decay_scale);

/// Midpoint quantization. Protected nodes (Roi, Buffer, and the coarsest
/// grid N_0) use `bin_protected`, all others `bin_background`.
QuantizedPyramid quantize(const CoeffPyramid& pyramid, const RegionMask& mask, double bin_protected,
                          double bin_background);
QuantizedPyramid quantize(const CoeffPyramid& pyramid, const RegionMask& mask, const BoundMap& bounds,
                          double decay_scale);

CoeffPyramid dequantize(const QuantizedPyramid& q, const RegionMask& mask, const std::vector<double>& spacing);

/// Lossless byte backend run after Huffman coding.
std::vector<std::uint8_t> backend_pack(std::span<const std::uint8_t> bytes, Backend backend);
std::vector<std::uint8_t> backend_unpack(std::span<const std::uint8_t> bytes, Backend backend);

/// Fixed header fields of a `.stra` blob. `dims`, `orig_dims` and `spacing`
/// describe the transform grid, which carries time as its last axis when T > 1.
struct BlobHeader {
  std::uint8_t spatial_rank = 0;
  std::uint32_t timesteps = 1;
  NormMode norm = NormMode::Max;
  Backend backend = Backend::Zlib;
  std::uint16_t buffer_width = 0;
  Shape dims;
  Shape orig_dims;
  std::vector<double> spacing;
  double tau0 = 0.0;
  double tau1 = 0.0;

  bool operator==(const BlobHeader&) const = default;
};

struct CompressedBlob {
  BlobHeader header;
  RegionMask mask;
  QuantizedPyramid quantized;
};

/// Little-endian layout:
///   "STRA" | u16 version | u32 CRC-32 of every other byte of the blob |
///   u8 spatial rank | u8 grid rank | u8 L | u8 norm | u8 backend | u16 R_bz | u32 T |
///   u32 dims[r] | u32 orig_dims[r] | f64 spacing[r] | f64 tau0 | f64 tau1 |
///   f64 bin_protected | f64 bin_background | u64 mask length | u64 payload length |
///   mask (RLE through the backend) | payload (Huffman stream through the backend).
/// The mask section holds RoI labels only; parsing rebuilds the buffer with
/// dilate_buffer, so `blob.mask` should already be dilate_buffer output.
std::vector<std::uint8_t> serialize_blob(const CompressedBlob& blob);

/// Throws FormatError: Checksum for CRC mismatch, Framing for bad structure,
/// Unsupported for unknown versions or backends.
CompressedBlob parse_blob(std::span<const std::uint8_t> bytes);

/// T slices sharing dims and spacing; stacked along a new last axis.
class TemporalStack {
 public:
  TemporalStack() = default;
  explicit TemporalStack(std::vector<Field> slices);

  std::size_t timesteps() const noexcept { return slices_.size(); }
  const std::vector<Field>& slices() const noexcept { return slices_; }
  const Field& operator[](std::size_t t) const { return slices_[t]; }

  /// The slice itself when T == 1, otherwise a (d+1)-axis field with unit time spacing.
  Field to_field() const;
  static TemporalStack from_field(const Field& field, std::size_t timesteps);

 private:
  std::vector<Field> slices_;
};

struct CompressConfig {
  double tau0 = 1e-3;
  /// Requested background bound; 0 means "as large as the buffer allows".
  double tau1 = 0.0;
  unsigned buffer_width = 2;
  NormMode norm = NormMode::Max;
  RefinementConfig refinement = RefinementConfig::defaults();
  /// false: uniform compression at tau0 (every node protected).
  bool adaptive = true;
  /// Precomputed RoI mask on the original or padded grid; skips detection.
  std::optional<RegionMask> mask;
  Backend backend = Backend::Zlib;
};

struct CompressStats {
  double detect_seconds = 0.0;  ///< heatmap + RoI detection + buffer construction
  double total_seconds = 0.0;
  double tau1 = 0.0;            ///< background bound actually used
  bool tau1_capped = false;     ///< requested tau1 was lowered to the cap
  std::size_t roi_nodes = 0;
  std::size_t buffer_nodes = 0;
  std::size_t raw_bytes = 0;    ///< 8 bytes per original node
  std::size_t blob_bytes = 0;

  double ratio() const { return blob_bytes ? static_cast<double>(raw_bytes) / blob_bytes : 0.0; }
  double detect_fraction() const { return total_seconds > 0 ? detect_seconds / total_seconds : 0.0; }
};

/// Decomposition and region analysis, reusable across several bounds.
struct Analysis {
  Field padded;
  CoeffPyramid pyramid;
  RegionMask mask;  ///< Roi/Buffer/Background on the padded grid
  std::size_t spatial_rank = 0;
  std::size_t timesteps = 1;
  double detect_seconds = 0.0;
  double analysis_seconds = 0.0;
};

Analysis analyze(const TemporalStack& stack, const CompressConfig& config);

struct CompressResult {
  std::vector<std::uint8_t> blob;
  CompressStats stats;
};

/// Quantizes and encodes a prepared analysis with the bounds in `config`.
CompressResult encode_analysis(const Analysis& analysis, const CompressConfig& config);

CompressResult compress(const TemporalStack& stack, const CompressConfig& config);
TemporalStack decompress(std::span<const std::uint8_t> blob);

/// Smallest tau0 whose combined compression ratio over `analyses` reaches
/// `target_ratio`, by bisection on log tau0 over [lo, hi]. tau1 is taken
/// from the config (0 = follow the cap).
struct RatioSearch {
  double tau0 = 0.0;
  double ratio = 0.0;
  std::vector<CompressResult> results;
};
RatioSearch search_ratio(std::span<const Analysis> analyses, CompressConfig config, double target_ratio,
                         double lo = 1e-8, double hi = 1e2, int iterations = 28);

}  // namespace stra
