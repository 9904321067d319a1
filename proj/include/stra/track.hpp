#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "stra/field.hpp"

namespace stra {

/// Position is (x, y) in grid index units, or (lon, lat) in degrees for
/// geographic tracks. x runs along axis 0 of a slice.
struct TrackPoint {
  int t = 0;
  double x = 0.0;
  double y = 0.0;
  double intensity = 0.0;

  bool operator==(const TrackPoint&) const = default;
};

struct Track {
  std::vector<TrackPoint> points;

  bool empty() const noexcept { return points.empty(); }
  std::size_t size() const noexcept { return points.size(); }
  int first_t() const { return points.front().t; }
  int last_t() const { return points.back().t; }

  bool operator==(const Track&) const = default;
};

struct Candidate {
  double x = 0.0;
  double y = 0.0;
  /// Depth below the slice median.
  double intensity = 0.0;

  bool operator==(const Candidate&) const = default;
};

struct CandidateOptions {
  /// Refine node positions with a per-axis three-point parabola fit.
  bool subpixel = true;
  /// Of several minima closer than this (in nodes), only the deepest survives.
  /// 0 keeps every minimum.
  double merge_radius = 0.0;
};

/// Strict-or-equal local minima of a 2D slice over the 8-neighbourhood whose
/// value is at most median - depth_threshold. Boundary nodes only compare
/// against the neighbours that exist. Ties between equal neighbouring minima
/// keep the lowest flat index.
std::vector<Candidate> detect_candidates(const Field& slice, double depth_threshold,
                                         const CandidateOptions& options = {});

/// Candidates found in the slice at time t.
struct Frame {
  int t = 0;
  std::vector<Candidate> candidates;
};

/// Thresholds in time units, so they mean the same for every output rate.
struct StitchConfig {
  /// Largest distance travelled per unit of elapsed time.
  double max_dist = 2.0;
  /// Largest number of missing time units between consecutive points.
  int max_gap = 5;
  /// Shortest kept lifetime, last t - first t.
  int min_len = 12;
};

/// Greedy nearest-candidate chaining over time-ordered frames. Each frame's
/// admissible (track, candidate) links are taken in ascending distance order,
/// ties by track then candidate index; leftover candidates start new tracks.
std::vector<Track> stitch_tracks(const std::vector<Frame>& frames, const StitchConfig& config);

/// One record per line: track index, t, x, y, intensity (comma separated).
void write_tracks(std::ostream& out, const std::vector<Track>& tracks);
std::vector<Track> read_tracks(std::istream& in);

}  // namespace stra
