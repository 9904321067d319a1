// Acceptance suite: one PASS/FAIL line per criterion.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "stra/calibration.hpp"
#include "stra/codec.hpp"
#include "stra/errors.hpp"
#include "stra/experiment.hpp"
#include "stra/metrics.hpp"
#include "stra/roi.hpp"
#include "stra/synth.hpp"
#include "stra/transform.hpp"

using namespace stra;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Field normal_field(const Shape& dims, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<double> v(element_count(dims));
  for (double& x : v) x = g(rng);
  return Field(dims, v);
}

Field smooth_field(const Shape& dims, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ph(0, 6.28), k(2, 7);
  std::normal_distribution<double> g(0, 0.01);
  double phase[3], freq[3];
  for (int a = 0; a < 3; ++a) phase[a] = ph(rng), freq[a] = k(rng);
  const Shape st = strides_of(dims);
  std::vector<double> v(element_count(dims));
  for (std::size_t i = 0; i < v.size(); ++i) {
    double s = 1.0;
    for (std::size_t a = 0, rem = i; a < dims.size(); ++a) {
      s *= std::sin(freq[a] * double(rem / st[a]) / double(dims[a] - 1) + phase[a]);
      rem %= st[a];
    }
    v[i] = s + g(rng);
  }
  return Field(dims, v);
}

// Labels the union of a few random boxes as Roi.
RegionMask random_boxes(const Shape& dims, int boxes, double max_extent, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  RegionMask m(dims);
  const Shape st = strides_of(dims);
  for (int b = 0; b < boxes; ++b) {
    Shape lo(dims.size()), hi(dims.size());
    for (std::size_t a = 0; a < dims.size(); ++a) {
      lo[a] = std::size_t(u(rng) * double(dims[a]) * (1 - max_extent));
      hi[a] = std::min(dims[a], lo[a] + 1 + std::size_t(u(rng) * double(dims[a]) * max_extent));
    }
    for (std::size_t i = 0; i < m.size(); ++i) {
      bool in = true;
      for (std::size_t a = 0, rem = i; a < dims.size(); ++a) {
        const std::size_t c = rem / st[a];
        rem %= st[a];
        in = in && c >= lo[a] && c < hi[a];
      }
      if (in) m.set(i, Label::Roi);
    }
  }
  return m;
}

// 1. recompose(decompose(u)) reproduces u.
Outcome transform_invertibility() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  double worst = 0.0;
  for (const Shape& dims : {Shape{257}, Shape{129, 129}, Shape{33, 33, 33}})
    for (int i = 0; i < 100; ++i) {
      const Field f = normal_field(dims, rng);
      const Field back = recompose(decompose(f));
      double err = 0.0, mag = 0.0;
      for (std::size_t k = 0; k < f.size(); ++k) {
        err = std::max(err, std::abs(back[k] - f[k]));
        mag = std::max(mag, std::abs(f[k]));
      }
      worst = std::max(worst, err / mag);
    }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 120.0,
          fmt("worst relative max error %.2e (limit 1e-9), 300 fields in %.1f s (limit 120 s)", worst, secs)};
}

// 2. Impulse responses decay by (2+sqrt3) per coarse spacing.
Outcome decay_law() {
  const double target = -std::log(kDecayBase);
  bool ok = true;
  std::string detail;
  for (const Shape& dims : {Shape{257}, Shape{129, 129}, Shape{129, 129, 129}}) {
    const int L = GridHierarchy(dims).levels();
    double lo = 1e9, hi = -1e9;
    for (int level = L; level > L - 3; --level) {
      const DecayProfile p = decay_profile(dims, level, centre_node(dims, level, 1u));
      lo = std::min(lo, p.slope);
      hi = std::max(hi, p.slope);
      ok = ok && std::abs(p.slope - target) <= 0.15 * std::abs(target);
    }
    detail += fmt("%zuD slopes [%.4f, %.4f] ", dims.size(), lo, hi);
  }
  return {ok, detail + fmt("over levels L..L-2, target %.4f +/-15%%", target)};
}

// 3. Kernels and constants shrink with dimension.
Outcome dimensional_ordering() {
  double k2[3];
  const Shape grids[3] = {Shape{129}, Shape{65, 65}, Shape{33, 33, 33}};
  for (int r = 0; r < 3; ++r) {
    const int L = GridHierarchy(grids[r]).levels();
    k2[r] = decay_profile(grids[r], L, centre_node(grids[r], L, 1u)).amplitude[2];
  }
  const DecayCalibration cal = calibrate();
  const bool ok = k2[0] >= k2[1] && k2[1] >= k2[2] && cal.scale[0] >= cal.scale[1] && cal.scale[1] >= cal.scale[2];
  return {ok, fmt("|K(2)| 1D %.5f 2D %.5f 3D %.5f; C_1 %.4f C_2 %.4f C_3 %.4f", k2[0], k2[1], k2[2], cal.scale[0],
                  cal.scale[1], cal.scale[2])};
}

// 4. Max error within tau0 on Roi and Buffer nodes (tau1 at the cap).
Outcome strict_max_bound() {
  std::mt19937_64 rng(4);
  std::size_t roi_viol = 0, buf_viol = 0, nodes = 0;
  double roi_worst = 0.0, buf_worst = 0.0;
  auto trial = [&](const Shape& dims, int t) {
    const Field f = t % 2 ? smooth_field(dims, rng) : normal_field(dims, rng);
    const RegionMask roi = random_boxes(dims, 3, 0.2, rng);
    for (double tau0 : {1e-2, 1e-3, 1e-4}) {
      CompressConfig c;
      c.tau0 = tau0;
      c.buffer_width = 2;
      c.mask = roi;
      const Analysis a = analyze(TemporalStack({f}), c);
      const Field back = decompress(encode_analysis(a, c).blob)[0];
      for (std::size_t i = 0; i < f.size(); ++i) {
        const double e = std::abs(back[i] - f[i]) / tau0;
        if (a.mask[i] == Label::Roi) {
          roi_worst = std::max(roi_worst, e);
          roi_viol += e > 1.0;
          ++nodes;
        } else if (a.mask[i] == Label::Buffer) {
          buf_worst = std::max(buf_worst, e);
          buf_viol += e > 1.0;
          ++nodes;
        }
      }
    }
  };
  for (int t = 0; t < 50; ++t) trial({65, 65}, t);
  for (int t = 0; t < 20; ++t) trial({17, 17, 17}, t);
  return {roi_viol + buf_viol == 0,
          fmt("violations: ROI %zu, BUFFER %zu of %zu protected node checks; max |e|/tau0 ROI %.3f BUFFER %.3f",
              roi_viol, buf_viol, nodes, roi_worst, buf_worst)};
}

// 5. Unit background error reaching Roi nodes through a buffer of width R.
Outcome buffer_leakage() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> noise(-1, 1);
  int within = 0, trials = 0;
  double worst_ratio = 0.0;
  for (const Shape& dims : {Shape{257}, Shape{65, 65}, Shape{33, 33, 33}}) {
    const GridHierarchy h(dims);
    const double bound_base = cached_calibration().scale_for(dims.size()) * (h.levels() + 1);
    for (unsigned R = 1; R <= 3; ++R)
      for (int t = 0; t < 10; ++t) {
        const RegionMask m = dilate_buffer(random_boxes(dims, 1, 0.2, rng), R, h);
        std::vector<double> c(m.size(), 0.0);
        for (std::size_t i = 0; i < c.size(); ++i)
          if (!m.is_protected(i)) c[i] = noise(rng);
        const Field e = recompose(CoeffPyramid(h, c));
        double worst = 0.0;
        for (std::size_t i = 0; i < e.size(); ++i)
          if (m[i] == Label::Roi) worst = std::max(worst, std::abs(e[i]));
        const double bound = bound_base * std::pow(kDecayBase, -double(R));
        within += worst <= bound;
        worst_ratio = std::max(worst_ratio, worst / bound);
        ++trials;
      }
  }
  return {within == trials, fmt("%d/%d trials within C_d (2+sqrt3)^-R (L+1) (1D/2D/3D x R 1..3 x 10); worst "
                                "measured/bound %.3f",
                                within, trials, worst_ratio)};
}

// 6. derive_tau1 = min(requested, (2+sqrt3)^R tau0 / C_d).
Outcome tau1_cap_formula() {
  int exact = 0, total = 0;
  const double C = cached_calibration().scale_for(2);
  for (double tau0 : {1e-2, 1e-3, 1e-4})
    for (unsigned R : {1u, 2u, 3u})
      for (double factor : {0.5, 2.0, 1e6}) {
        const double cap = std::pow(2.0 + std::sqrt(3.0), double(R)) * tau0 / C;
        const double requested = factor < 1.0 ? tau0 + factor * (cap - tau0) : factor * cap;
        const double want = std::min(requested, cap);
        exact += derive_tau1(tau0, R, C, requested) == want;
        ++total;
      }
  return {exact == total, fmt("%d/%d combinations exact (tau0 x R_bz x requested, C_2 = %.6f)", exact, total, C)};
}

// The advected stack: a sum of modes drifting across a 65x65 grid.
TemporalStack advected_stack() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  const std::size_t n = 65, T = 32;
  struct Mode {
    double kx, ky, phase, amp;
  };
  std::vector<Mode> modes;
  for (int m = 0; m < 12; ++m) modes.push_back({1 + 5 * u(rng), 1 + 5 * u(rng), 6.28 * u(rng), 1.0 / (1 + m)});
  std::vector<Field> slices;
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<double> v(n * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double x = double(i) / (n - 1) - 0.01 * double(t), y = double(j) / (n - 1) - 0.006 * double(t);
        double s = 0.0;
        for (const Mode& m : modes) s += m.amp * std::sin(3.14 * m.kx * x + m.phase) * std::cos(3.14 * m.ky * y + m.phase);
        v[i * n + j] = s;
      }
    slices.emplace_back(Shape{n, n}, v);
  }
  return TemporalStack(slices);
}

// 7. Joint space-time compression beats slice-by-slice at the same bound,
// on the drifting-mode stack and on the vortex generator's stack.
Outcome temporal_gain() {
  SynthConfig sc;
  sc.timesteps = 32;
  sc.seed = 5;
  sc.n_vortices = 5;
  sc.pulse_amplitude = 0.4;
  const std::pair<const char*, TemporalStack> stacks[] = {{"advected modes", advected_stack()},
                                                          {"vortices", gen_synthetic(sc).stack}};
  bool ok = true;
  std::string detail;
  for (const auto& [name, stack] : stacks) {
    detail += std::string(name) + ":";
    for (double tau : {1e-2, 1e-3, 1e-4}) {
      CompressConfig c;
      c.tau0 = tau;
      c.adaptive = false;
      const double joint = compress(stack, c).stats.ratio();
      std::size_t bytes = 0;
      for (const Field& s : stack.slices()) bytes += compress(TemporalStack({s}), c).blob.size();
      const double per_slice = double(65 * 65 * 32 * 8) / double(bytes);
      ok = ok && joint >= 1.2 * per_slice;
      detail += fmt(" %.0e %.2f/%.2f=x%.2f", tau, joint, per_slice, joint / per_slice);
    }
    detail += "; ";
  }
  return {ok, detail + "CR joint/per-slice, need x1.20"};
}

// Random blob contents with a consistent header.
CompressedBlob random_blob(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> rank(1, 3), exp(1, 5), small(0, 3);
  std::geometric_distribution<int> geo(0.2);
  std::uniform_real_distribution<double> u(0, 1);
  CompressedBlob b;
  const int r = rank(rng);
  Shape dims(r), orig(r);
  for (int a = 0; a < r; ++a) {
    dims[a] = (std::size_t{1} << (r == 3 ? std::min(exp(rng), 4) : exp(rng))) + 1;
    orig[a] = dims[a] - std::size_t(u(rng) * double(dims[a] / 2));
  }
  const GridHierarchy h(dims);
  b.header.spatial_rank = static_cast<std::uint8_t>(r);
  b.header.timesteps = 1;
  b.header.norm = u(rng) < 0.5 ? NormMode::Max : NormMode::Rms;
  b.header.backend = u(rng) < 0.5 ? Backend::None : Backend::Zlib;
  b.header.buffer_width = static_cast<std::uint16_t>(small(rng));
  b.header.dims = dims;
  b.header.orig_dims = orig;
  b.header.spacing.assign(r, 1.0);
  b.header.tau0 = std::pow(10.0, -1 - 5 * u(rng));
  b.header.tau1 = b.header.tau0 * (1 + 3 * u(rng));
  RegionMask roi(dims);
  const double density = u(rng) * 0.2;
  for (std::size_t i = 0; i < roi.size(); ++i)
    if (u(rng) < density) roi.set(i, Label::Roi);
  b.mask = dilate_buffer(roi, b.header.buffer_width, h);
  b.quantized.dims = dims;
  b.quantized.levels = h.levels();
  b.quantized.bin_protected = b.header.tau0 * u(rng) + 1e-9;
  b.quantized.bin_background = b.quantized.bin_protected * (1 + u(rng));
  b.quantized.q.resize(element_count(dims));
  for (auto& q : b.quantized.q) {
    q = (rng() & 1 ? 1 : -1) * std::int64_t(geo(rng));
    if (u(rng) < 0.001) q = std::int64_t(rng() >> 4) - (std::int64_t{1} << 58);
  }
  return b;
}

// 8. Blob round trip and corruption detection.
Outcome codec_losslessness() {
  std::mt19937_64 rng(8);
  int identical = 0, detected = 0;
  std::vector<std::vector<std::uint8_t>> samples;
  for (int i = 0; i < 1000; ++i) {
    const CompressedBlob b = random_blob(rng);
    const std::vector<std::uint8_t> bytes = serialize_blob(b);
    const CompressedBlob back = parse_blob(bytes);
    identical += back.header == b.header && back.mask == b.mask && back.quantized == b.quantized;
    if (i < 100) samples.push_back(bytes);
  }
  for (auto& bytes : samples) {
    const std::size_t bit = rng() % (bytes.size() * 8);
    bytes[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    try {
      parse_blob(bytes);
    } catch (const FormatError& e) {
      detected += e.kind() == FormatError::Kind::Checksum;
    }
  }
  return {identical == 1000 && detected == 100,
          fmt("%d/1000 random pyramids decode identically; %d/100 single-bit flips reported as checksum errors",
              identical, detected)};
}

double exhaustive_frechet(const Track& a, const Track& b) {
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double w) {
    w = std::max(w, std::hypot(a.points[i].x - b.points[j].x, a.points[i].y - b.points[j].y));
    if (i + 1 == a.size() && j + 1 == b.size()) {
      best = std::min(best, w);
      return;
    }
    if (i + 1 < a.size()) walk(i + 1, j, w);
    if (j + 1 < b.size()) walk(i, j + 1, w);
    if (i + 1 < a.size() && j + 1 < b.size()) walk(i + 1, j + 1, w);
  };
  walk(0, 0, 0.0);
  return best;
}

// 9. Frechet and great-circle distance against independent oracles.
Outcome metric_oracles() {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-10, 10), lon(-180, 180), lat(-90, 90);
  double f_err = 0.0, g_err = 0.0;
  for (int t = 0; t < 200; ++t) {
    Track a, b;
    const int n = 1 + int(rng() % 5), m = 1 + int(rng() % 5);
    for (int i = 0; i < n; ++i) a.points.push_back({i, u(rng), u(rng), 0});
    for (int i = 0; i < m; ++i) b.points.push_back({i, u(rng), u(rng), 0});
    f_err = std::max(f_err, std::abs(frechet(a, b) - exhaustive_frechet(a, b)));
  }
  const double r = std::numbers::pi / 180;
  for (int t = 0; t < 1000; ++t) {
    const double l1 = lon(rng), p1 = lat(rng), l2 = lon(rng), p2 = lat(rng);
    const double h = std::pow(std::sin((p2 - p1) * r / 2), 2) +
                     std::cos(p1 * r) * std::cos(p2 * r) * std::pow(std::sin((l2 - l1) * r / 2), 2);
    g_err = std::max(g_err, std::abs(gcd(l1, p1, l2, p2) - 2 * std::asin(std::min(1.0, std::sqrt(h)))));
  }
  return {f_err <= 1e-12 && g_err <= 1e-9,
          fmt("Frechet max deviation %.1e over 200 pairs (limit 1e-12); gcd vs haversine %.1e over 1000 pairs (limit "
              "1e-9)",
              f_err, g_err)};
}

// 10. Compression at CR 6 keeps tracks that decimation by 6 loses.
Outcome decimation_vs_compression() {
  double dec = 0.0, uni = 0.0, ada = 0.0;
  int split = 0;
  const int seeds = 20;
  for (int s = 1; s <= seeds; ++s) {
    const ExperimentReport r = run_experiment(*make_scenario("decim-vs-comp", s));
    auto rate = [&](const MethodReport& m) {
      return r.truth.empty() ? 1.0 : double(m.counts.matched) / double(r.truth.size());
    };
    for (const MethodReport& m : r.methods) {
      if (m.spec.kind == MethodKind::Decimate) {
        dec += rate(m) / seeds;
        split += m.gap_split > 0;
      } else if (m.spec.kind == MethodKind::Uniform) {
        uni += rate(m) / seeds;
      } else {
        ada += rate(m) / seeds;
      }
    }
  }
  return {std::min(uni, ada) >= dec && split >= 6,
          fmt("mean matched rate: decimation %.3f, uniform %.3f, adaptive %.3f; gap splits in %d/%d scenarios (need "
              ">= 6)",
              dec, uni, ada, split, seeds)};
}

// 11. Adaptive keeps at least as many exactly matched tracks as uniform.
Outcome adaptive_vs_uniform() {
  const double cr = 23.0;
  int ge = 0, worst = 0, sum_u = 0, sum_a = 0;
  for (int s = 1; s <= 20; ++s) {
    ExperimentConfig c = *make_scenario("adaptive-vs-uniform", s);
    c.methods = {{MethodKind::Uniform, cr}, {MethodKind::Adaptive, cr}};
    const ExperimentReport r = run_experiment(c);
    const int u = int(r.methods[0].counts.exact), a = int(r.methods[1].counts.exact);
    ge += a >= u;
    worst = std::min(worst, a - u);
    sum_u += u;
    sum_a += a;
  }
  return {ge >= 16 && worst >= -1,
          fmt("CR %.0f: adaptive >= uniform in %d/20 seeds (need 16), worst difference %d (need >= -1); exact matches "
              "%d vs %d",
              cr, ge, worst, sum_a, sum_u)};
}

// 12. Detection plus buffer construction as a share of compression time.
Outcome detection_overhead() {
  SynthConfig sc;
  sc.timesteps = 32;
  sc.seed = 5;
  sc.n_vortices = 5;
  sc.pulse_amplitude = 0.4;
  const TemporalStack stack = gen_synthetic(sc).stack;
  const std::vector<RefinementConfig> configs{
      {{{8, 90, 99}}},
      {{{8, 90, 99}, {4, 60, 99}}},
      {{{8, 90, 99}, {4, 60, 99}, {2, 50, 99}}},
  };
  double worst = 0.0, best = 1.0;
  for (double tau : {1e-2, 1e-3, 1e-4})
    for (const RefinementConfig& rc : configs) {
      CompressConfig c;
      c.tau0 = tau;
      c.refinement = rc;
      c.buffer_width = 1;
      std::vector<double> frac;
      for (int rep = 0; rep < 9; ++rep) frac.push_back(compress(stack, c).stats.detect_fraction());
      std::nth_element(frac.begin(), frac.begin() + 4, frac.end());
      worst = std::max(worst, frac[4]);
      best = std::min(best, frac[4]);
    }
  return {worst <= 0.15, fmt("median detection share %.3f to %.3f over 1-3 layers x tau0 1e-2..1e-4 on 65x65x32 "
                             "(limit 0.15)",
                             best, worst)};
}

// 13. Wider bins give fewer, larger RoIs at the same tagged area.
Outcome roi_topology() {
  FilamentConfig fc;
  fc.seed = 1;
  const Field f = gen_filament_field(fc);
  const Field heat = crop_to_original(coefficient_heatmap(decompose(pad_to_dyadic(f))));
  auto frac = [](const RegionMask& m) { return double(m.count(Label::Roi)) / double(m.size()); };
  const RegionMask fine = detect_rois(heat, RefinementConfig{{{1, 90, 99}}});
  RegionMask wide;
  double gap = 1.0, p3 = 0.0;
  for (double p = 0.5; p < 100; p += 0.5) {
    RegionMask m = detect_rois(heat, RefinementConfig{{{3, p, 99}}});
    if (std::abs(frac(m) - frac(fine)) < gap) gap = std::abs(frac(m) - frac(fine)), wide = std::move(m), p3 = p;
  }
  const std::size_t c1 = count_roi_components(fine), c3 = count_roi_components(wide);
  return {gap <= 0.01 && c3 < c1, fmt("width 1 (global 90): %zu components at %.3f tagged; width 3 (global %.1f): %zu "
                                      "components at %.3f tagged",
                                      c1, frac(fine), p3, c3, frac(wide))};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
      {"transform invertibility", transform_invertibility},
      {"decay law", decay_law},
      {"dimensional ordering", dimensional_ordering},
      {"strict MAX bound in ROI and BUFFER", strict_max_bound},
      {"buffer-zone leakage", buffer_leakage},
      {"tau1 cap", tau1_cap_formula},
      {"temporal buffering gain", temporal_gain},
      {"codec losslessness", codec_losslessness},
      {"metric oracles", metric_oracles},
      {"decimation vs compression", decimation_vs_compression},
      {"adaptive vs uniform", adaptive_vs_uniform},
      {"detection overhead", detection_overhead},
      {"RoI topology", roi_topology},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = int(k) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s  %2d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, criteria[k].first, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
