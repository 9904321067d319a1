#include "stra/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <ostream>
#include <thread>

#include "stra/errors.hpp"

namespace stra {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<Frame> detect_frames(const std::vector<Field>& slices, const std::vector<int>& times,
                                 const TrackerConfig& config) {
  if (slices.size() != times.size()) throw InvalidInput("one time per slice is required");
  std::vector<Frame> frames(slices.size());
  for (std::size_t i = 0; i < slices.size(); ++i)
    frames[i] = {times[i], detect_candidates(slices[i], config.depth_threshold, config.candidates)};
  return frames;
}

struct Reduced {
  std::vector<Field> slices;
  std::vector<int> times;
  double achieved_cr = 0.0;
  double tau0 = 0.0;
  double detect_overhead = 0.0;
};

Reduced decimate(const std::vector<Field>& slices, double factor) {
  const auto k = static_cast<std::size_t>(factor);
  if (k < 1 || static_cast<double>(k) != factor) throw ConfigError("decimation factor must be a positive integer");
  Reduced r;
  for (std::size_t t = 0; t < slices.size(); t += k) {
    r.slices.push_back(slices[t]);
    r.times.push_back(static_cast<int>(t));
  }
  r.achieved_cr = static_cast<double>(slices.size()) / static_cast<double>(r.slices.size());
  return r;
}

Reduced compress_chunks(const std::vector<Field>& slices, const ExperimentConfig& config, const MethodSpec& spec) {
  CompressConfig cc = config.compress;
  cc.adaptive = spec.kind == MethodKind::Adaptive;
  const std::size_t chunk = std::max<std::size_t>(1, config.chunk);

  std::vector<Analysis> analyses;
  for (std::size_t t0 = 0; t0 < slices.size(); t0 += chunk) {
    const std::size_t t1 = std::min(slices.size(), t0 + chunk);
    analyses.push_back(analyze(TemporalStack({slices.begin() + t0, slices.begin() + t1}), cc));
  }

  std::vector<CompressResult> results;
  if (spec.tau0 > 0.0) {
    cc.tau0 = spec.tau0;
    for (const Analysis& a : analyses) results.push_back(encode_analysis(a, cc));
  } else {
    RatioSearch s = search_ratio(analyses, cc, spec.target_cr, 1e-8, 1e2, config.search_iterations);
    cc.tau0 = s.tau0;
    results = std::move(s.results);
  }

  Reduced r;
  r.tau0 = cc.tau0;
  std::size_t raw = 0, stored = 0;
  double detect = 0.0, total = 0.0;
  for (std::size_t c = 0; c < results.size(); ++c) {
    const CompressStats& st = results[c].stats;
    raw += st.raw_bytes;
    stored += st.blob_bytes;
    detect += st.detect_seconds;
    total += st.total_seconds;
    const TemporalStack back = decompress(results[c].blob);
    for (const Field& f : back.slices()) r.slices.push_back(f);
  }
  for (std::size_t t = 0; t < r.slices.size(); ++t) r.times.push_back(static_cast<int>(t));
  r.achieved_cr = stored ? static_cast<double>(raw) / static_cast<double>(stored) : 0.0;
  r.detect_overhead = total > 0.0 ? detect / total : 0.0;
  return r;
}

// Unmatched truth tracks whose chain of on-path candidates (within the
// matched Frechet threshold of the truth position) has an interior hole
// longer than the stitcher's gap allowance.
std::size_t count_gap_splits(const std::vector<Frame>& frames, const std::vector<Track>& truth,
                             const std::vector<TrackScore>& scores, const ExperimentConfig& config) {
  const double reach = config.thresholds.matched_frechet;
  std::size_t n = 0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    if (scores[k].cls == TrackClass::Matched) continue;
    std::vector<int> hits;
    std::size_t p = 0;
    const auto& pts = truth[k].points;
    for (const Frame& f : frames) {
      while (p < pts.size() && pts[p].t < f.t) ++p;
      if (p == pts.size()) break;
      if (pts[p].t != f.t) continue;
      for (const Candidate& c : f.candidates) {
        if (std::hypot(c.x - pts[p].x, c.y - pts[p].y) <= reach) {
          hits.push_back(f.t);
          break;
        }
      }
    }
    for (std::size_t i = 1; i < hits.size(); ++i) {
      if (hits[i] - hits[i - 1] - 1 > config.tracker.stitch.max_gap) {
        ++n;
        break;
      }
    }
  }
  return n;
}

}  // namespace

std::vector<Track> track_slices(const std::vector<Field>& slices, const std::vector<int>& times,
                                const TrackerConfig& config) {
  return stitch_tracks(detect_frames(slices, times, config), config.stitch);
}

std::string method_name(MethodKind kind) {
  switch (kind) {
    case MethodKind::Decimate: return "decimate";
    case MethodKind::Uniform: return "uniform";
    case MethodKind::Adaptive: return "adaptive";
  }
  return "unknown";
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  ExperimentReport report;
  const SynthData data = gen_synthetic(config.synth);
  report.generated = data.truth;
  const std::vector<Field>& slices = data.stack.slices();
  std::vector<int> all_times(slices.size());
  for (std::size_t t = 0; t < slices.size(); ++t) all_times[t] = static_cast<int>(t);
  report.truth = track_slices(slices, all_times, config.tracker);

  auto run_method = [&](const MethodSpec& spec) {
    const auto t0 = Clock::now();
    MethodReport m;
    m.spec = spec;
    const Reduced r = spec.kind == MethodKind::Decimate ? decimate(slices, spec.target_cr)
                                                        : compress_chunks(slices, config, spec);
    const std::vector<Frame> frames = detect_frames(r.slices, r.times, config.tracker);
    m.tracks = stitch_tracks(frames, config.tracker.stitch);
    m.scores = classify(m.tracks, report.truth, config.thresholds);
    m.counts = tally(m.scores);
    m.achieved_cr = r.achieved_cr;
    m.tau0 = r.tau0;
    m.detect_overhead_frac = r.detect_overhead;
    m.gap_split = count_gap_splits(frames, report.truth, m.scores, config);
    m.wall_seconds = seconds_since(t0);
    return m;
  };

  report.methods.resize(config.methods.size());
  const std::size_t workers = std::clamp<std::size_t>(config.threads, 1, std::max<std::size_t>(1, config.methods.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < config.methods.size(); ++i) report.methods[i] = run_method(config.methods[i]);
    return report;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(config.methods.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < config.methods.size();) {
        try {
          report.methods[i] = run_method(config.methods[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return report;
}

void write_report_csv(std::ostream& out, const ExperimentReport& report, bool header) {
  if (header)
    out << "method,target_cr,achieved_cr,n_matched,n_partial,n_missed,range0,range_mid,range_inf,"
           "detect_overhead_frac,wall_seconds\n";
  char line[256];
  for (const MethodReport& m : report.methods) {
    const ClassCounts& c = m.counts;
    std::snprintf(line, sizeof line, "%s,%g,%.6g,%zu,%zu,%zu,%zu,%zu,%zu,%.6g,%.6g\n",
                  method_name(m.spec.kind).c_str(), m.spec.target_cr, m.achieved_cr, c.matched, c.partial,
                  c.missed, c.range0, c.range_mid, c.range_inf, m.detect_overhead_frac, m.wall_seconds);
    out << line;
  }
}

std::vector<ScenarioInfo> list_scenarios() {
  return {
      {"decim-vs-comp", "decimation by 6 against uniform and adaptive compression at CR 6"},
      {"adaptive-vs-uniform", "uniform against adaptive compression at CR 15 and 23"},
      {"lossless", "decimation by 1 and compression at tau0 = 1e-9"},
      {"default", "decimation by 6, compression at CR 6 and CR 23"},
  };
}

std::optional<ExperimentConfig> make_scenario(const std::string& name, std::uint64_t seed) {
  ExperimentConfig c;
  c.scenario = name;
  c.synth.seed = seed;
  c.synth.n_vortices = 5;
  c.synth.pulse_amplitude = 0.4;
  c.compress.buffer_width = 1;
  // Wide first-layer cells keep the local pass from seeding RoIs everywhere.
  c.compress.refinement.layers = {{8, 80.0, 99.0}, {4, 50.0, 99.0}};
  using K = MethodKind;
  if (name == "decim-vs-comp") {
    c.methods = {{K::Decimate, 6}, {K::Uniform, 6}, {K::Adaptive, 6}};
  } else if (name == "adaptive-vs-uniform") {
    c.methods = {{K::Uniform, 15}, {K::Adaptive, 15}, {K::Uniform, 23}, {K::Adaptive, 23}};
  } else if (name == "lossless") {
    c.methods = {{K::Decimate, 1}, {K::Uniform, 1, 1e-9}, {K::Adaptive, 1, 1e-9}};
  } else if (name == "default") {
    c.methods = {{K::Decimate, 6}, {K::Uniform, 6}, {K::Adaptive, 6}, {K::Uniform, 23}, {K::Adaptive, 23}};
  } else {
    return std::nullopt;
  }
  return c;
}

}  // namespace stra
