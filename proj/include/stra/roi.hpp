#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "stra/field.hpp"
#include "stra/hierarchy.hpp"
#include "stra/region_mask.hpp"
#include "stra/transform.hpp"

namespace stra {

/// One refinement round: bin width in nodes per axis plus the global and
/// local percentile thresholds, both in (0, 100).
struct LayerSpec {
  std::size_t bin_width = 4;
  double global_percentile = 90.0;
  double local_percentile = 50.0;
};

struct RefinementConfig {
  std::vector<LayerSpec> layers;

  /// Two layers, bins 4 then 2, global 90 then 75, local 50.
  static RefinementConfig defaults();
  void validate() const;
};

enum class NormMode : std::uint8_t { Max = 0, Rms = 1 };

/// Absolute error bounds for protected (tau0) and background (tau1) data.
class BoundMap {
 public:
  /// Throws ConfigError unless tau0 > 0, tau1 >= tau0 and tau1 does not exceed
  /// the buffer-zone cap (2+sqrt3)^R * tau0 / C_d (or tau0 when that cap is lower).
  BoundMap(double tau0, double tau1, unsigned buffer_width, NormMode norm, double decay_scale);

  double tau0() const noexcept { return tau0_; }
  double tau1() const noexcept { return tau1_; }
  unsigned buffer_width() const noexcept { return buffer_width_; }
  NormMode norm() const noexcept { return norm_; }

 private:
  double tau0_;
  double tau1_;
  unsigned buffer_width_;
  NormMode norm_;
};

/// Largest admissible background bound for the given buffer width.
double tau1_cap(double tau0, unsigned buffer_width, double decay_scale);

/// min(requested, cap), never below tau0.
double derive_tau1(double tau0, unsigned buffer_width, double decay_scale, double requested_tau1);

/// Finest-grid map of the largest |coefficient| (levels >= 1) whose node is
/// nearest in Euclidean index distance; ties go to the lower flat index.
Field coefficient_heatmap(const CoeffPyramid& pyramid);

/// Nearest-rank percentile of `values` (p in (0, 100]); 0 for an empty list.
double percentile_nearest_rank(std::vector<double> values, double p);

/// Two-step (global then local) percentile refinement over bin sums of the
/// heatmap. Returns a mask with Roi / Background labels only.
RegionMask detect_rois(const Field& heatmap, const RefinementConfig& config);

/// Marks as Buffer every non-Roi node of N*_l within Chebyshev index distance
/// buffer_width * 2^(L-l+1) of a Roi node (N_0 uses the level-1 radius).
/// Existing Buffer labels are discarded and recomputed.
RegionMask dilate_buffer(const RegionMask& mask, unsigned buffer_width, const GridHierarchy& hierarchy);

/// Number of 4-connected (face-connected) components of Roi nodes.
std::size_t count_roi_components(const RegionMask& mask);

}  // namespace stra
