#pragma once

#include <cstddef>
#include <vector>

#include "stra/track.hpp"

namespace stra {

/// Euclidean for grid tracks; great-circle (radians) for (lon, lat) degree tracks.
enum class PointMetric { Euclidean, GreatCircle };

/// Spherical angle between two (lon, lat) points given in degrees, in radians.
double gcd(double lon1, double lat1, double lon2, double lat2);

double point_distance(const TrackPoint& a, const TrackPoint& b, PointMetric metric);

/// Discrete Frechet distance between the point sequences. Throws InvalidInput
/// on an empty track.
double frechet(const Track& a, const Track& b, PointMetric metric = PointMetric::Euclidean);

/// Arc-length curve mapping: both curves are resampled at kPcmSamples equal
/// arc-length steps, the shorter curve's window is slid along the longer one,
/// and the smallest mean sample distance is returned. Throws InvalidInput on
/// an empty track.
inline constexpr std::size_t kPcmSamples = 64;
double pcm(const Track& a, const Track& b, PointMetric metric = PointMetric::Euclidean);

enum class TrackClass { Matched, Partial, Missed };

/// Which of {0}, (0, grid spacing], (grid spacing, inf) the mean point error falls in.
enum class ErrorRange { Zero, WithinGrid, BeyondGrid, Unaligned };

struct ClassifyThresholds {
  double matched_frechet = 2.0;
  double matched_pcm = 1.0;
  double partial_pcm = 2.0;
  double grid_spacing = 1.0;
  PointMetric metric = PointMetric::Euclidean;
};

struct TrackScore {
  /// Mean point distance over time-aligned points; 0 with no aligned points
  /// (then `range` is Unaligned).
  double mean_gcd = 0.0;
  double frechet = 0.0;
  double pcm = 0.0;
  TrackClass cls = TrackClass::Missed;
  ErrorRange range = ErrorRange::Unaligned;
  /// Index of the chosen reduced track, or -1 when none exists.
  int match = -1;
};

/// Scores every truth track against the reduced track with the smallest
/// Frechet distance.
std::vector<TrackScore> classify(const std::vector<Track>& reduced, const std::vector<Track>& truth,
                                 const ClassifyThresholds& thresholds = {});

struct ClassCounts {
  std::size_t matched = 0;
  std::size_t partial = 0;
  std::size_t missed = 0;
  std::size_t range0 = 0;
  std::size_t range_mid = 0;
  std::size_t range_inf = 0;
  /// Matched with zero mean point error.
  std::size_t exact = 0;
};

/// Class totals, plus error-range totals over non-missed tracks.
ClassCounts tally(const std::vector<TrackScore>& scores);

}  // namespace stra
