#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "stra/codec.hpp"
#include "stra/field.hpp"
#include "stra/track.hpp"

namespace stra {

/// Counter-based generator: draw i of stream s is a pure function of
/// (seed, s, i), so results do not depend on evaluation order.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t bits(std::uint64_t counter) const;
  /// Uniform in [0, 1).
  double uniform(std::uint64_t counter) const;
  /// Standard normal (Box-Muller over counters 2c and 2c+1).
  double normal(std::uint64_t counter) const;

  /// Sequential helpers over an internal counter.
  std::uint64_t next_bits() { return bits(next_++); }
  double next_uniform() { return uniform(next_++); }
  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_uniform(); }

 private:
  std::uint64_t key_;
  std::uint64_t next_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

struct SynthConfig {
  std::size_t nx = 65;
  std::size_t ny = 65;
  std::size_t timesteps = 64;
  std::size_t n_vortices = 4;
  double depth_min = 4.0;
  double depth_max = 8.0;
  /// Gaussian well radius (standard deviation) in nodes.
  double radius_min = 2.5;
  double radius_max = 4.0;
  /// Path speed range in nodes per step; paths are cubic Bezier curves whose
  /// inner control points bend off the chord by at most `path_bend` of its length.
  double speed_min = 0.3;
  double speed_max = 0.8;
  double path_bend = 0.25;
  /// Lifetime range in steps, clamped to the stack length.
  std::size_t lifetime_min = 16;
  std::size_t lifetime_max = 64;
  /// Relative depth oscillation and its period range in steps.
  double pulse_amplitude = 0.0;
  double pulse_period_min = 8.0;
  double pulse_period_max = 20.0;
  /// Steps over which a well deepens after genesis and fills before decay.
  std::size_t ramp_steps = 3;
  double background_amplitude = 1.0;
  double noise_amplitude = 0.05;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SynthData {
  TemporalStack stack;
  /// Well-center trajectories with the well depth as intensity.
  std::vector<Track> truth;
};

/// Smooth drifting background plus white noise minus moving Gaussian wells.
SynthData gen_synthetic(const SynthConfig& config);

struct FilamentConfig {
  std::size_t nx = 129;
  std::size_t ny = 129;
  std::size_t n_filaments = 6;
  /// Ridge half-width (standard deviation) in nodes.
  double width = 0.8;
  double noise_amplitude = 0.02;
  std::uint64_t seed = 1;
};

/// Thin sinuous ridges over weak noise: a 2D field whose features are long
/// and narrow, used to compare RoI fragmentation across bin widths.
Field gen_filament_field(const FilamentConfig& config);

}  // namespace stra
