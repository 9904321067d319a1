#include "stra/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "stra/errors.hpp"

namespace stra {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(splitmix64(seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL))) {}

std::uint64_t CounterRng::bits(std::uint64_t counter) const {
  return splitmix64(key_ + counter * 0x9e3779b97f4a7c15ULL);
}

double CounterRng::uniform(std::uint64_t counter) const {
  return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
}

double CounterRng::normal(std::uint64_t counter) const {
  const double u1 = 1.0 - uniform(2 * counter);  // (0, 1]
  const double u2 = uniform(2 * counter + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void SynthConfig::validate() const {
  if (nx < 33 || ny < 33) throw InvalidInput("synthetic grids need at least 33 nodes per axis");
  if (timesteps < 8) throw InvalidInput("synthetic stacks need at least 8 timesteps");
  if (radius_min <= 0 || radius_max < radius_min) throw InvalidInput("bad vortex radius range");
  if (radius_max >= static_cast<double>(std::min(nx, ny)))
    throw InvalidInput("vortex radius must be smaller than the domain");
  if (depth_min < 0 || depth_max < depth_min) throw InvalidInput("bad vortex depth range");
  if (speed_min < 0 || speed_max < speed_min) throw InvalidInput("bad vortex speed range");
  if (lifetime_min == 0 || lifetime_max < lifetime_min) throw InvalidInput("bad vortex lifetime range");
  if (pulse_period_min <= 0 || pulse_period_max < pulse_period_min) throw InvalidInput("bad pulse period range");
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Vortex {
  int birth = 0;
  int life = 1;
  double depth = 0.0;
  double radius = 1.0;
  double pulse_period = 1.0;
  double pulse_phase = 0.0;
  double px[4] = {};
  double py[4] = {};
};

struct Wave {
  double amplitude, kx, ky, phase, drift;
};

double bezier(const double* p, double u) {
  const double v = 1.0 - u;
  return v * v * v * p[0] + 3 * v * v * u * p[1] + 3 * v * u * u * p[2] + u * u * u * p[3];
}

Vortex make_vortex(const SynthConfig& c, std::size_t index) {
  CounterRng rng(c.seed, 1000 + index);
  const int T = static_cast<int>(c.timesteps);
  const int lmin = std::min<int>(static_cast<int>(c.lifetime_min), T);
  const int lmax = std::min<int>(static_cast<int>(c.lifetime_max), T);
  Vortex v;
  v.life = lmin + static_cast<int>(rng.next_bits() % static_cast<std::uint64_t>(lmax - lmin + 1));
  v.birth = static_cast<int>(rng.next_bits() % static_cast<std::uint64_t>(T - v.life + 1));
  v.depth = rng.next_uniform(c.depth_min, c.depth_max);
  v.radius = rng.next_uniform(c.radius_min, c.radius_max);
  v.pulse_period = rng.next_uniform(c.pulse_period_min, c.pulse_period_max);
  v.pulse_phase = rng.next_uniform(0.0, kTwoPi);

  const double xmax = static_cast<double>(c.nx - 1), ymax = static_cast<double>(c.ny - 1);
  const double margin = std::min({2.0 * v.radius, xmax / 4, ymax / 4});
  const double x0 = rng.next_uniform(margin, xmax - margin);
  const double y0 = rng.next_uniform(margin, ymax - margin);
  double chord = rng.next_uniform(c.speed_min, c.speed_max) * (v.life - 1);
  const double heading = rng.next_uniform(0.0, kTwoPi);
  const double bend1 = rng.next_uniform(-c.path_bend, c.path_bend);
  const double bend2 = rng.next_uniform(-c.path_bend, c.path_bend);

  // Rotate the heading until the chord end stays inside; shorten it if none does.
  auto inside = [&](double x, double y) { return x >= margin && x <= xmax - margin && y >= margin && y <= ymax - margin; };
  double dx = 0, dy = 0;
  for (int shrink = 0; shrink < 32; ++shrink, chord *= 0.8) {
    bool found = false;
    for (int k = 0; k < 16 && !found; ++k) {
      const double h = heading + k * kTwoPi / 16;
      dx = chord * std::cos(h);
      dy = chord * std::sin(h);
      found = inside(x0 + dx, y0 + dy);
    }
    if (found) break;
  }
  const double nxp = -dy, nyp = dx;  // perpendicular with the chord's length
  v.px[0] = x0;
  v.py[0] = y0;
  v.px[1] = x0 + dx / 3 + bend1 * nxp;
  v.py[1] = y0 + dy / 3 + bend1 * nyp;
  v.px[2] = x0 + 2 * dx / 3 + bend2 * nxp;
  v.py[2] = y0 + 2 * dy / 3 + bend2 * nyp;
  v.px[3] = x0 + dx;
  v.py[3] = y0 + dy;
  return v;
}

TrackPoint vortex_at(const Vortex& v, const SynthConfig& c, int t) {
  const int s = t - v.birth;
  const double u = v.life > 1 ? static_cast<double>(s) / (v.life - 1) : 0.0;
  const double xmax = static_cast<double>(c.nx - 1), ymax = static_cast<double>(c.ny - 1);
  const double ramp = static_cast<double>(c.ramp_steps) + 1.0;
  const double envelope = std::min({1.0, (s + 1) / ramp, (v.life - s) / ramp});
  const double pulse = 1.0 + c.pulse_amplitude * std::sin(kTwoPi * s / v.pulse_period + v.pulse_phase);
  return {t, std::clamp(bezier(v.px, u), 0.0, xmax), std::clamp(bezier(v.py, u), 0.0, ymax),
          v.depth * envelope * pulse};
}

}  // namespace

SynthData gen_synthetic(const SynthConfig& config) {
  config.validate();
  const std::size_t nx = config.nx, ny = config.ny, n = nx * ny;
  const int T = static_cast<int>(config.timesteps);

  CounterRng wave_rng(config.seed, 1);
  std::vector<Wave> waves;
  for (int m = 0; m < 3; ++m) {
    Wave w;
    w.amplitude = config.background_amplitude * wave_rng.next_uniform(0.2, 0.45);
    w.kx = 1.0 + static_cast<double>(wave_rng.next_bits() % 2);
    w.ky = static_cast<double>(wave_rng.next_bits() % 3);
    w.phase = wave_rng.next_uniform(0.0, kTwoPi);
    w.drift = wave_rng.next_uniform(-0.05, 0.05);
    waves.push_back(w);
  }

  std::vector<Vortex> vortices;
  for (std::size_t v = 0; v < config.n_vortices; ++v) vortices.push_back(make_vortex(config, v));

  SynthData out;
  out.truth.resize(vortices.size());
  const CounterRng noise(config.seed, 2);
  std::vector<Field> slices;
  slices.reserve(config.timesteps);
  for (int t = 0; t < T; ++t) {
    std::vector<double> data(n);
    for (std::size_t i = 0; i < nx; ++i) {
      for (std::size_t j = 0; j < ny; ++j) {
        double s = 0.0;
        for (const Wave& w : waves)
          s += w.amplitude * std::sin(kTwoPi * (w.kx * i / nx + w.ky * j / ny) + w.phase + w.drift * t);
        data[i * ny + j] = s + config.noise_amplitude * noise.normal(static_cast<std::uint64_t>(t) * n + i * ny + j);
      }
    }
    for (std::size_t v = 0; v < vortices.size(); ++v) {
      const Vortex& vx = vortices[v];
      if (t < vx.birth || t >= vx.birth + vx.life) continue;
      const TrackPoint p = vortex_at(vx, config, t);
      out.truth[v].points.push_back(p);
      const double reach = 5.0 * vx.radius, inv = 1.0 / (2.0 * vx.radius * vx.radius);
      const auto lo_i = static_cast<std::size_t>(std::max(0.0, std::ceil(p.x - reach)));
      const auto hi_i = static_cast<std::size_t>(std::min<double>(nx - 1, std::floor(p.x + reach)));
      const auto lo_j = static_cast<std::size_t>(std::max(0.0, std::ceil(p.y - reach)));
      const auto hi_j = static_cast<std::size_t>(std::min<double>(ny - 1, std::floor(p.y + reach)));
      for (std::size_t i = lo_i; i <= hi_i; ++i)
        for (std::size_t j = lo_j; j <= hi_j; ++j) {
          const double dx = i - p.x, dy = j - p.y;
          data[i * ny + j] -= p.intensity * std::exp(-(dx * dx + dy * dy) * inv);
        }
    }
    slices.emplace_back(Shape{nx, ny}, std::move(data));
  }
  std::erase_if(out.truth, [](const Track& t) { return t.empty(); });
  out.stack = TemporalStack(std::move(slices));
  return out;
}

Field gen_filament_field(const FilamentConfig& config) {
  const std::size_t nx = config.nx, ny = config.ny;
  if (nx < 3 || ny < 3 || config.width <= 0) throw InvalidInput("bad filament field settings");
  std::vector<double> data(nx * ny, 0.0);
  const CounterRng noise(config.seed, 2);
  for (std::size_t k = 0; k < data.size(); ++k) data[k] = config.noise_amplitude * noise.normal(k);

  CounterRng rng(config.seed, 1);
  const double inv = 1.0 / (2.0 * config.width * config.width);
  for (std::size_t f = 0; f < config.n_filaments; ++f) {
    // Ridge along a sine curve; odd filaments run along the other axis.
    const bool transpose = f % 2 == 1;
    const std::size_t along = transpose ? ny : nx, across = transpose ? nx : ny;
    const double amp = rng.next_uniform(0.6, 1.0);
    const double centre = rng.next_uniform(0.15, 0.85) * (across - 1);
    const double wave = rng.next_uniform(0.04, 0.12) * (across - 1);
    const double freq = rng.next_uniform(0.5, 2.0);
    const double phase = rng.next_uniform(0.0, kTwoPi);
    for (std::size_t a = 0; a < along; ++a) {
      const double arg = kTwoPi * freq * a / (along - 1) + phase;
      const double c = centre + wave * std::sin(arg);
      const double slope = wave * std::cos(arg) * kTwoPi * freq / (along - 1);
      const double scale = 1.0 / (1.0 + slope * slope);
      for (std::size_t b = 0; b < across; ++b) {
        const double d = b - c;
        const double v = amp * std::exp(-d * d * scale * inv);
        data[transpose ? b * ny + a : a * ny + b] += v;
      }
    }
  }
  return Field({nx, ny}, std::move(data));
}

}  // namespace stra
