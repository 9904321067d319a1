#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stra/calibration.hpp"
#include "stra/codec.hpp"
#include "stra/errors.hpp"
#include "stra/experiment.hpp"
#include "stra/synth.hpp"

namespace {

using namespace stra;

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const void* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot create " + path);
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw IoError("write failed: " + path);
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  write_file(path, text.data(), text.size());
}

struct RawInput {
  std::string path;
  std::vector<std::size_t> shape;
  std::string dtype = "f64";
  std::size_t timesteps = 1;
};

void add_raw_flags(CLI::App* cmd, RawInput& raw) {
  cmd->add_option("-i,--input", raw.path, "raw little-endian field, C order, slices back to back")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--shape", raw.shape, "node counts per axis of one slice, e.g. 65,65")
      ->required()
      ->delimiter(',');
  cmd->add_option("--dtype", raw.dtype, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}));
  cmd->add_option("-T,--timesteps", raw.timesteps, "slices in the file")->check(CLI::PositiveNumber);
}

TemporalStack load_stack(const RawInput& raw) {
  if (raw.shape.empty() || raw.shape.size() > kMaxRank) throw ConfigError("--shape needs 1 to 3 axes");
  const std::size_t width = raw.dtype == "f32" ? 4 : 8;
  const std::size_t n = element_count(raw.shape);
  const std::vector<std::uint8_t> bytes = read_file(raw.path);
  if (bytes.size() != n * raw.timesteps * width) {
    std::ostringstream msg;
    msg << raw.path << " holds " << bytes.size() << " bytes; shape x timesteps x dtype needs "
        << n * raw.timesteps * width;
    throw IoError(msg.str());
  }
  std::vector<Field> slices;
  for (std::size_t t = 0; t < raw.timesteps; ++t) {
    std::vector<double> v(n);
    const std::uint8_t* p = bytes.data() + t * n * width;
    for (std::size_t i = 0; i < n; ++i) {
      if (width == 4) {
        float f;
        std::memcpy(&f, p + 4 * i, 4);
        v[i] = f;
      } else {
        std::memcpy(&v[i], p + 8 * i, 8);
      }
    }
    slices.emplace_back(raw.shape, std::move(v));
  }
  return TemporalStack(std::move(slices));
}

void save_stack(const std::string& path, const TemporalStack& stack, const std::string& dtype) {
  std::vector<std::uint8_t> out;
  for (const Field& f : stack.slices()) {
    for (double v : f.values()) {
      const std::size_t at = out.size();
      if (dtype == "f32") {
        const auto x = static_cast<float>(v);
        out.resize(at + 4);
        std::memcpy(out.data() + at, &x, 4);
      } else {
        out.resize(at + 8);
        std::memcpy(out.data() + at, &v, 8);
      }
    }
  }
  write_file(path, out.data(), out.size());
}

std::string join(const Shape& s) {
  std::string out;
  for (std::size_t a = 0; a < s.size(); ++a) out += (a ? "," : "") + std::to_string(s[a]);
  return out;
}

// "k:pg:pl,k:pg:pl,..."
RefinementConfig parse_layers(const std::string& text) {
  RefinementConfig rc;
  std::stringstream all(text);
  std::string item;
  while (std::getline(all, item, ',')) {
    LayerSpec l;
    char c1 = 0, c2 = 0;
    std::istringstream is(item);
    if (!(is >> l.bin_width >> c1 >> l.global_percentile >> c2 >> l.local_percentile) || c1 != ':' || c2 != ':' ||
        !is.eof())
      throw ConfigError("bad layer spec '" + item + "' (want width:global:local)");
    rc.layers.push_back(l);
  }
  rc.validate();
  return rc;
}

struct BoundFlags {
  double tau0 = 1e-3;
  double tau1 = 0.0;
  unsigned rbz = 2;
  std::string norm = "max";
  std::string layers;
  bool uniform = false;
};

void add_bound_flags(CLI::App* cmd, BoundFlags& b) {
  cmd->add_option("--tau0", b.tau0, "absolute bound in RoI and buffer")->check(CLI::PositiveNumber);
  cmd->add_option("--tau1", b.tau1, "background bound; 0 or omitted uses the buffer cap");
  cmd->add_option("--rbz", b.rbz, "buffer width in coarse-grid spacings");
  cmd->add_option("--norm", b.norm, "max or rms")->check(CLI::IsMember({"max", "rms"}));
  cmd->add_option("--layers", b.layers, "refinement layers, width:global:local,... (default 4:90:50,2:75:50)");
  cmd->add_flag("--uniform", b.uniform, "compress everything at tau0");
}

CompressConfig make_compress_config(const BoundFlags& b) {
  CompressConfig c;
  c.tau0 = b.tau0;
  c.tau1 = b.tau1;
  c.buffer_width = b.rbz;
  c.norm = b.norm == "rms" ? NormMode::Rms : NormMode::Max;
  if (!b.layers.empty()) c.refinement = parse_layers(b.layers);
  c.adaptive = !b.uniform;
  return c;
}

int cmd_compress(const RawInput& raw, const BoundFlags& bounds, const std::string& output, const std::string& backend) {
  CompressConfig config = make_compress_config(bounds);
  config.backend = backend == "none" ? Backend::None : Backend::Zlib;
  const TemporalStack stack = load_stack(raw);
  const Analysis a = analyze(stack, config);
  const CompressResult r = encode_analysis(a, config);
  if (r.stats.tau1_capped)
    std::cerr << "warning: --tau1 " << bounds.tau1 << " exceeds the buffer-zone cap; using " << r.stats.tau1 << "\n";
  write_file(output, r.blob.data(), r.blob.size());

  // Measured error per region, from a decode of the blob just written.
  const Field back = pad_to_dyadic(decompress(r.blob).to_field());
  double err[3] = {0.0, 0.0, 0.0};
  const Shape& pd = a.padded.dims();
  const Shape& od = a.padded.orig_dims();
  const Shape strides = strides_of(pd);
  for (std::size_t i = 0; i < a.padded.size(); ++i) {
    bool inside = true;
    for (std::size_t ax = 0, rem = i; ax < pd.size(); ++ax) {
      inside = inside && (rem / strides[ax]) < od[ax];
      rem %= strides[ax];
    }
    if (!inside) continue;
    double& e = err[static_cast<int>(a.mask[i])];
    e = std::max(e, std::abs(back[i] - a.padded[i]));
  }
  const double scale = cached_calibration().scale_for(a.padded.rank());
  const double leak = scale * r.stats.tau1 * std::pow(kDecayBase, -static_cast<double>(config.buffer_width));
  std::printf("wrote %s (%zu bytes)\n", output.c_str(), r.blob.size());
  std::printf("shape %s timesteps %zu\n", join(raw.shape).c_str(), raw.timesteps);
  std::printf("compression_ratio %.6g\n", r.stats.ratio());
  std::printf("tau0 %.6g tau1 %.6g\n", config.tau0, r.stats.tau1);
  std::printf("roi nodes %zu max_error %.6g bound %.6g\n", r.stats.roi_nodes, err[2], config.tau0);
  std::printf("buffer nodes %zu max_error %.6g bound %.6g\n", r.stats.buffer_nodes, err[1], config.tau0);
  std::printf("background nodes %zu max_error %.6g bound %.6g\n",
              a.mask.size() - r.stats.roi_nodes - r.stats.buffer_nodes, err[0], r.stats.tau1 + leak);
  std::printf("detect_overhead_frac %.6g\n", r.stats.detect_fraction());
  return 0;
}

int cmd_decompress(const std::string& input, const std::string& output, const std::string& dtype) {
  const std::vector<std::uint8_t> bytes = read_file(input);
  const TemporalStack stack = decompress(bytes);
  save_stack(output, stack, dtype);
  std::printf("shape %s timesteps %zu dtype %s\n", join(stack[0].dims()).c_str(), stack.timesteps(), dtype.c_str());
  return 0;
}

int cmd_detect(const RawInput& raw, const BoundFlags& bounds, const std::string& output) {
  CompressConfig config = make_compress_config(bounds);
  config.adaptive = true;
  const TemporalStack stack = load_stack(raw);
  const Analysis a = analyze(stack, config);
  const RegionMask mask = crop_mask(a.mask, a.padded.orig_dims());
  write_file(output, mask.raw().data(), mask.size());
  const double n = static_cast<double>(mask.size());
  std::printf("grid %s\n", join(mask.dims()).c_str());
  std::printf("roi %zu (%.4f) buffer %zu (%.4f) background %zu\n", mask.count(Label::Roi),
              static_cast<double>(mask.count(Label::Roi)) / n, mask.count(Label::Buffer),
              static_cast<double>(mask.count(Label::Buffer)) / n, mask.count(Label::Background));
  std::printf("components %zu\n", count_roi_components(mask));
  std::printf("detect_seconds %.6g\n", a.detect_seconds);
  return 0;
}

int cmd_simulate(const SynthConfig& sc, const std::string& output, const std::string& tracks) {
  sc.validate();
  const SynthData d = gen_synthetic(sc);
  save_stack(output, d.stack, "f64");
  if (!tracks.empty()) {
    std::ostringstream os;
    write_tracks(os, d.truth);
    write_text(tracks, os.str());
  }
  std::printf("shape %zu,%zu timesteps %zu wells %zu\n", sc.nx, sc.ny, sc.timesteps, d.truth.size());
  return 0;
}

int cmd_evaluate(const std::string& scenario, std::uint64_t seed, unsigned threads, const std::string& output) {
  if (scenario == "list") {
    for (const ScenarioInfo& s : list_scenarios()) std::printf("%-20s %s\n", s.name.c_str(), s.description.c_str());
    return 0;
  }
  auto config = make_scenario(scenario, seed);
  if (!config) throw ConfigError("unknown scenario '" + scenario + "' (try --scenario list)");
  config->threads = threads;
  const ExperimentReport report = run_experiment(*config);
  std::ostringstream os;
  write_report_csv(os, report);
  write_text(output, os.str());
  return 0;
}

int cmd_calibrate(const std::string& output) {
  const DecayCalibration cal = calibrate();
  std::ostringstream os;
  os << "dim,C_d,slope,k0,k1,k2,k3,k4,k5\n";
  char line[256];
  for (std::size_t r = 1; r <= 3; ++r) {
    // Finest-level response of the node nearest the centre, odd along the
    // first axis, by distance in coarse spacings. Same grids as the slope fit.
    Shape d(r, 33);
    if (r == 1) d[0] = 129;
    if (r == 2) d = {65, 65};
    const int L = GridHierarchy(d).levels();
    const DecayProfile p = decay_profile(d, L, centre_node(d, L, 1u));
    std::snprintf(line, sizeof line, "%zu,%.10g,%.10g", r, cal.scale[r - 1], cal.slope[r - 1]);
    os << line;
    for (double a : p.amplitude) {
      std::snprintf(line, sizeof line, ",%.10g", a);
      os << line;
    }
    os << "\n";
  }
  write_text(output, os.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stra: region-adaptive error-bounded compression of spatiotemporal fields"};
  app.require_subcommand(1);

  RawInput raw;
  BoundFlags bounds;
  std::string output, backend = "zlib", dtype = "f64", tracks, scenario;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  SynthConfig sc;

  auto* compress = app.add_subcommand("compress", "compress a raw field or stack to a .stra blob");
  add_raw_flags(compress, raw);
  add_bound_flags(compress, bounds);
  compress->add_option("-o,--output", output, ".stra output path")->required();
  compress->add_option("--backend", backend, "lossless backend after Huffman: zlib or none")
      ->check(CLI::IsMember({"zlib", "none"}));

  std::string blob_path;
  auto* decompress_cmd = app.add_subcommand("decompress", "decode a .stra blob to raw floats");
  decompress_cmd->add_option("-i,--input", blob_path, ".stra input path")->required()->check(CLI::ExistingFile);
  decompress_cmd->add_option("-o,--output", output, "raw output path")->required();
  decompress_cmd->add_option("--dtype", dtype, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}));

  auto* detect = app.add_subcommand("detect-roi", "write the RoI/buffer mask (uint8 per node: 0 bg, 1 buffer, 2 RoI)");
  add_raw_flags(detect, raw);
  add_bound_flags(detect, bounds);
  detect->add_option("-o,--output", output, "raw uint8 mask path")->required();

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic vortex stack (raw f64)");
  simulate->add_option("-o,--output", output, "raw f64 output path")->required();
  simulate->add_option("--tracks", tracks, "well paths as id,t,x,y,intensity lines");
  simulate->add_option("--seed", sc.seed);
  simulate->add_option("--nx", sc.nx);
  simulate->add_option("--ny", sc.ny);
  simulate->add_option("-T,--timesteps", sc.timesteps);
  simulate->add_option("--vortices", sc.n_vortices);
  simulate->add_option("--pulse", sc.pulse_amplitude, "relative depth oscillation");
  simulate->add_option("--noise", sc.noise_amplitude);

  auto* evaluate = app.add_subcommand("evaluate", "run a tracking experiment preset and write the CSV report");
  evaluate->add_option("--scenario", scenario, "preset name, or 'list'")->required();
  evaluate->add_option("--seed", seed);
  evaluate->add_option("--threads", threads)->check(CLI::PositiveNumber);
  evaluate->add_option("-o,--output", output, "CSV path (default stdout)");

  auto* calibrate_cmd = app.add_subcommand("calibrate", "measure the decay constants and kernel tables (CSV)");
  calibrate_cmd->add_option("-o,--output", output, "CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*compress) return cmd_compress(raw, bounds, output, backend);
    if (*decompress_cmd) return cmd_decompress(blob_path, output, dtype);
    if (*detect) return cmd_detect(raw, bounds, output);
    if (*simulate) return cmd_simulate(sc, output, tracks);
    if (*evaluate) return cmd_evaluate(scenario, seed, threads, output);
    if (*calibrate_cmd) return cmd_calibrate(output);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
