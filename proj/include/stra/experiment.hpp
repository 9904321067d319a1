#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stra/codec.hpp"
#include "stra/metrics.hpp"
#include "stra/synth.hpp"
#include "stra/track.hpp"

namespace stra {

/// Candidate detection plus stitching, with thresholds in time units (one
/// unit per full-rate slice).
struct TrackerConfig {
  double depth_threshold = 2.5;
  CandidateOptions candidates{false, 3.0};
  StitchConfig stitch{2.0, 5, 12};
};

/// Tracks the slices, where slice i was taken at time times[i].
std::vector<Track> track_slices(const std::vector<Field>& slices, const std::vector<int>& times,
                                const TrackerConfig& config);

enum class MethodKind { Decimate, Uniform, Adaptive };

struct MethodSpec {
  MethodKind kind = MethodKind::Uniform;
  /// Decimation factor k, or the compression ratio to search for.
  double target_cr = 1.0;
  /// When > 0, compress at this fixed tau0 instead of searching for target_cr.
  double tau0 = 0.0;
};

std::string method_name(MethodKind kind);

struct ExperimentConfig {
  std::string scenario;
  SynthConfig synth;
  TrackerConfig tracker;
  ClassifyThresholds thresholds;
  std::vector<MethodSpec> methods;
  /// Slices per temporal stack handed to the compressor.
  std::size_t chunk = 32;
  /// Norm, buffer width, refinement and backend; tau0 and the mode are set per method.
  CompressConfig compress;
  int search_iterations = 24;
  /// Methods run on up to this many threads; results do not depend on it.
  unsigned threads = 1;
};

struct MethodReport {
  MethodSpec spec;
  double achieved_cr = 0.0;
  double tau0 = 0.0;
  ClassCounts counts;
  /// Unmatched truth tracks whose reduced candidates along the true path
  /// have an interior hole longer than the stitcher's gap allowance.
  std::size_t gap_split = 0;
  double detect_overhead_frac = 0.0;
  double wall_seconds = 0.0;
  std::vector<Track> tracks;
  std::vector<TrackScore> scores;
};

struct ExperimentReport {
  /// Well-center paths from the generator.
  std::vector<Track> generated;
  /// Tracks found in the unreduced stack; every method is scored against these.
  std::vector<Track> truth;
  std::vector<MethodReport> methods;
};

/// generate -> reduce with every method -> track -> classify against truth.
ExperimentReport run_experiment(const ExperimentConfig& config);

/// Header plus one row per method:
/// method,target_cr,achieved_cr,n_matched,n_partial,n_missed,range0,range_mid,range_inf,detect_overhead_frac,wall_seconds
void write_report_csv(std::ostream& out, const ExperimentReport& report, bool header = true);

struct ScenarioInfo {
  std::string name;
  std::string description;
};

std::vector<ScenarioInfo> list_scenarios();

/// Preset for `name` with the generator seeded by `seed`; nullopt when unknown.
std::optional<ExperimentConfig> make_scenario(const std::string& name, std::uint64_t seed);

}  // namespace stra
