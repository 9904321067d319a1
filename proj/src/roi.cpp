#include "stra/roi.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>

#include "stra/calibration.hpp"
#include "stra/errors.hpp"

namespace stra {

RefinementConfig RefinementConfig::defaults() {
  return RefinementConfig{{LayerSpec{4, 90.0, 50.0}, LayerSpec{2, 75.0, 50.0}}};
}

void RefinementConfig::validate() const {
  if (layers.empty()) throw ConfigError("refinement needs at least one layer");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& s = layers[i];
    if (s.bin_width == 0) throw ConfigError("bin width must be positive");
    if (!(s.global_percentile > 0.0 && s.global_percentile < 100.0) ||
        !(s.local_percentile > 0.0 && s.local_percentile < 100.0))
      throw ConfigError("percentiles must lie in (0, 100)");
    if (i > 0 && s.bin_width > layers[i - 1].bin_width)
      throw ConfigError("bin widths must not grow across layers");
  }
}

double tau1_cap(double tau0, unsigned buffer_width, double decay_scale) {
  if (!(tau0 > 0.0)) throw ConfigError("tau0 must be positive");
  if (!(decay_scale > 0.0)) throw ConfigError("decay scale must be positive");
  return std::pow(kDecayBase, static_cast<double>(buffer_width)) * tau0 / decay_scale;
}

double derive_tau1(double tau0, unsigned buffer_width, double decay_scale, double requested_tau1) {
  const double cap = tau1_cap(tau0, buffer_width, decay_scale);
  return std::max(tau0, std::min(requested_tau1, cap));
}

BoundMap::BoundMap(double tau0, double tau1, unsigned buffer_width, NormMode norm, double decay_scale)
    : tau0_(tau0), tau1_(tau1), buffer_width_(buffer_width), norm_(norm) {
  const double cap = std::max(tau0, tau1_cap(tau0, buffer_width, decay_scale));
  if (!(tau1 >= tau0)) throw ConfigError("tau1 must be at least tau0");
  if (tau1 > cap * (1.0 + 1e-12)) throw ConfigError("tau1 exceeds the buffer-zone cap");
}

namespace {

Shape unflatten(std::size_t flat, const Shape& dims) {
  Shape c(dims.size());
  for (std::size_t a = dims.size(); a-- > 0;) {
    c[a] = flat % dims[a];
    flat /= dims[a];
  }
  return c;
}

}  // namespace

Field coefficient_heatmap(const CoeffPyramid& pyramid) {
  const GridHierarchy& h = pyramid.hierarchy();
  const Shape& dims = h.dims();
  const std::size_t rank = dims.size();
  const Shape strides = strides_of(dims);
  const auto coeffs = pyramid.coeffs();
  std::vector<double> heat(coeffs.size(), 0.0);

  // Per-axis tables for level l: flat offset of the nearest level-l
  // coordinate (halves round down), whether it is an odd lattice point, and
  // the cheapest single-axis step onto an odd point when it is not.
  struct AxisTable {
    std::vector<std::size_t> base;
    std::vector<char> odd;
    std::vector<long long> step_cost;
    std::vector<std::ptrdiff_t> step;
  };
  std::array<AxisTable, kMaxRank> tab;
  constexpr long long kNoStep = std::numeric_limits<long long>::max();

  for (int level = 1; level <= h.levels(); ++level) {
    const auto s = static_cast<std::ptrdiff_t>(h.stride(level));
    // Real axes occupy the trailing table slots.
    const std::size_t shift = kMaxRank - rank;
    for (std::size_t slot = 0; slot < kMaxRank; ++slot) {
      AxisTable& t = tab[slot];
      const std::size_t n = slot >= shift ? dims[slot - shift] : 1;
      t.base.assign(n, 0);
      t.odd.assign(n, 0);
      t.step_cost.assign(n, kNoStep);
      t.step.assign(n, 0);
      if (slot < shift) continue;
      const auto st = static_cast<std::ptrdiff_t>(strides[slot - shift]);
      for (std::size_t c = 0; c < n; ++c) {
        const auto ci = static_cast<std::ptrdiff_t>(c);
        const std::ptrdiff_t q = ci / s, r = ci % s;
        const std::ptrdiff_t near = (2 * r > s ? q + 1 : q) * s;
        const std::ptrdiff_t off = ci - near;
        t.base[c] = static_cast<std::size_t>(near * st);
        t.odd[c] = (near / s) & 1;
        for (std::ptrdiff_t dir : {-1, 1}) {  // -1 first: equal cost keeps the lower index
          const std::ptrdiff_t to = near + dir * s;
          if (to < 0 || to >= static_cast<std::ptrdiff_t>(n)) continue;
          const std::ptrdiff_t d = off - dir * s;
          const long long cost = static_cast<long long>(d * d - off * off);
          if (cost < t.step_cost[c]) {
            t.step_cost[c] = cost;
            t.step[c] = dir * s * st;
          }
        }
      }
    }

    const AxisTable& t2 = tab[2];
    const std::size_t n2 = t2.base.size();
    // Rows that share their nearest level-l row reuse one gathered template,
    // rebuilt whenever the nearest level-l coordinate along axis 0 changes.
    const AxisTable& t1 = tab[1];
    std::vector<std::size_t> row_of(t1.base.size());
    std::size_t n_rows = 0;
    for (std::size_t c1 = 0; c1 < t1.base.size(); ++c1)
      row_of[c1] = c1 > 0 && t1.base[c1] == t1.base[c1 - 1] ? row_of[c1 - 1] : n_rows++;
    std::vector<double> tmpl(n_rows * n2);
    std::size_t y = 0;
    for (std::size_t c0 = 0; c0 < tab[0].base.size(); ++c0) {
      const double* plane = coeffs.data() + tab[0].base[c0];
      if (s > 1 && (c0 == 0 || tab[0].base[c0] != tab[0].base[c0 - 1])) {
        for (std::size_t c1 = 0; c1 < t1.base.size(); ++c1) {
          if (c1 > 0 && row_of[c1] == row_of[c1 - 1]) continue;
          const double* src = plane + t1.base[c1];
          double* out = tmpl.data() + row_of[c1] * n2;
          for (std::size_t c2 = 0; c2 < n2; ++c2) out[c2] = std::abs(src[t2.base[c2]]);
        }
      }
      for (std::size_t c1 = 0; c1 < t1.base.size(); ++c1, y += n2) {
        double* __restrict dst = heat.data() + y;
        const double* src = plane + t1.base[c1];
        const bool odd_row = tab[0].odd[c0] || t1.odd[c1];
        if (s == 1 && odd_row) {
          for (std::size_t c2 = 0; c2 < n2; ++c2) dst[c2] = std::max(dst[c2], std::abs(src[c2]));
          continue;
        }
        const double* __restrict tv = tmpl.data() + row_of[c1] * n2;
        if (odd_row) {
          for (std::size_t c2 = 0; c2 < n2; ++c2) dst[c2] = std::max(dst[c2], tv[c2]);
          continue;
        }
        // Nearest node sits on the coarser grid where the axis-2 coordinate
        // is even: take the cheapest single-axis step onto an odd node, ties
        // to the lower flat index. Axes 0 and 1 are fixed along the row.
        long long row_cost = kNoStep;
        std::ptrdiff_t row_step = 0;
        for (const auto& [t, c] : {std::pair{&tab[0], c0}, std::pair{&tab[1], c1}}) {
          const long long cost = t->step_cost[c];
          if (cost < row_cost || (cost == row_cost && cost != kNoStep && t->step[c] < row_step)) {
            row_cost = cost;
            row_step = t->step[c];
          }
        }
        for (std::size_t c2 = 0; c2 < n2; ++c2) {
          if (t2.odd[c2]) {
            dst[c2] = std::max(dst[c2], s == 1 ? std::abs(src[c2]) : tv[c2]);
            continue;
          }
          const long long cost = t2.step_cost[c2];
          const bool own = cost < row_cost || (cost == row_cost && cost != kNoStep && t2.step[c2] < row_step);
          const std::ptrdiff_t pick = static_cast<std::ptrdiff_t>(t2.base[c2]) + (own ? t2.step[c2] : row_step);
          dst[c2] = std::max(dst[c2], std::abs(src[pick]));
        }
      }
    }
  }
  return Field(dims, std::move(heat), h.spacing());
}

double percentile_nearest_rank(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  const auto n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  const auto nth = values.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(values.begin(), nth, values.end());
  return *nth;
}

namespace {

struct Box {
  std::array<std::size_t, kMaxRank> lo{};
  std::array<std::size_t, kMaxRank> hi{};  // exclusive
};

// Bins of width k tiling `parent` (partial at the top), row-major.
struct Tiling {
  Box parent;
  std::size_t k = 1;
  std::array<std::size_t, kMaxRank> count{1, 1, 1};
  std::size_t first = 0;  // index of the first bin in the layer's score list

  std::size_t size() const { return count[0] * count[1] * count[2]; }
  Box bin(std::size_t i, std::size_t rank) const {
    Box b;
    for (std::size_t a = rank; a-- > 0;) {
      const std::size_t c = i % count[a];
      i /= count[a];
      b.lo[a] = parent.lo[a] + c * k;
      b.hi[a] = std::min(parent.hi[a], b.lo[a] + k);
    }
    return b;
  }
};

Tiling make_tiling(const Box& parent, std::size_t rank, std::size_t k, std::size_t first) {
  Tiling t{parent, k, {1, 1, 1}, first};
  for (std::size_t a = 0; a < rank; ++a) t.count[a] = (parent.hi[a] - parent.lo[a] + k - 1) / k;
  return t;
}

// Adds |H| of every node in the tiling's parent box to its bin's score.
void accumulate(const Field& heat, const Shape& strides, const Tiling& t, std::vector<double>& score) {
  const std::size_t rank = heat.rank();
  const std::size_t shift = kMaxRank - rank;
  std::array<std::size_t, kMaxRank> lo{0, 0, 0}, len{1, 1, 1}, st{0, 0, 0}, k{1, 1, 1};
  for (std::size_t a = 0; a < rank; ++a) {
    lo[a + shift] = t.parent.lo[a];
    len[a + shift] = t.parent.hi[a] - t.parent.lo[a];
    st[a + shift] = strides[a];
    k[a + shift] = t.k;
  }
  const std::size_t n1 = rank >= 2 ? t.count[rank - 2] : 1, n2 = t.count[rank - 1];
  const auto values = heat.values();
  for (std::size_t i0 = 0, b0 = 0, r0 = k[0]; i0 < len[0]; ++i0) {
    for (std::size_t i1 = 0, b1 = 0, r1 = k[1]; i1 < len[1]; ++i1) {
      const double* row = values.data() + (lo[0] + i0) * st[0] + (lo[1] + i1) * st[1] + lo[2] * st[2];
      double* out = score.data() + t.first + (b0 * n1 + b1) * n2;
      for (std::size_t i2 = 0; i2 < len[2]; i2 += k[2]) {
        const std::size_t end = std::min(len[2], i2 + k[2]);
        double sum = 0.0;
        for (std::size_t j = i2; j < end; ++j) sum += std::abs(row[j * st[2]]);
        *out++ += sum;
      }
      if (--r1 == 0) {
        ++b1;
        r1 = k[1];
      }
    }
    if (--r0 == 0) {
      ++b0;
      r0 = k[0];
    }
  }
}

using Dims3 = std::array<std::size_t, kMaxRank>;

// Sums of |H| over the bins of a width-k grid anchored at the origin. Axes are
// right-aligned in the three slots; leading unit axes keep width 1.
std::vector<double> grid_bin_sums(std::span<const double> heat, const Dims3& n, const Dims3& k, Dims3& g) {
  for (std::size_t a = 0; a < kMaxRank; ++a) g[a] = (n[a] + k[a] - 1) / k[a];
  // Contiguous rows first (axis 1, then axis 0); the short axis-2 runs last,
  // once the data has shrunk by k[0] k[1].
  const std::size_t row = n[2];
  std::vector<double> planes(n[0] * g[1] * row, 0.0);
  for (std::size_t i0 = 0; i0 < n[0]; ++i0)
    for (std::size_t b1 = 0, i1 = 0; b1 < g[1]; ++b1) {
      double* __restrict out = planes.data() + (i0 * g[1] + b1) * row;
      for (const std::size_t end = std::min(n[1], i1 + k[1]); i1 < end; ++i1) {
        const double* __restrict in = heat.data() + (i0 * n[1] + i1) * row;
        for (std::size_t j = 0; j < row; ++j) out[j] += std::abs(in[j]);
      }
    }
  const std::size_t plane = g[1] * row;
  std::vector<double> cols(g[0] * plane, 0.0);
  for (std::size_t b0 = 0, i0 = 0; b0 < g[0]; ++b0) {
    double* __restrict out = cols.data() + b0 * plane;
    for (const std::size_t end = std::min(n[0], i0 + k[0]); i0 < end; ++i0) {
      const double* __restrict in = planes.data() + i0 * plane;
      for (std::size_t j = 0; j < plane; ++j) out[j] += in[j];
    }
  }
  std::vector<double> bins(g[0] * g[1] * g[2]);
  for (std::size_t r = 0; r < g[0] * g[1]; ++r) {
    const double* in = cols.data() + r * row;
    double* out = bins.data() + r * g[2];
    for (std::size_t b = 0, j = 0; b < g[2]; ++b) {
      const std::size_t end = std::min(row, j + k[2]);
      double sum = 0.0;
      for (; j < end; ++j) sum += in[j];
      out[b] = sum;
    }
  }
  return bins;
}

// Nearest-rank percentile that reorders `v` in place.
double nearest_rank_inplace(std::vector<double>& v, double p) {
  if (v.empty()) return 0.0;
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(v.size())));
  rank = std::clamp<std::size_t>(rank, 1, v.size());
  const auto nth = v.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(v.begin(), nth, v.end());
  return *nth;
}

// detect_rois when every bin width divides the previous one: each layer's
// bins then sit on one global grid and parents map to children by division.
RegionMask detect_rois_nested(const Field& heatmap, const RefinementConfig& config) {
  const Shape& dims = heatmap.dims();
  const std::size_t rank = dims.size(), shift = kMaxRank - rank;
  Dims3 n{1, 1, 1};
  for (std::size_t a = 0; a < rank; ++a) n[a + shift] = dims[a];

  // Bin sums at the last (finest) width; coarser layers add these up.
  Dims3 kf{1, 1, 1}, gf;
  for (std::size_t a = shift; a < kMaxRank; ++a) kf[a] = config.layers.back().bin_width;
  const std::vector<double> fine = grid_bin_sums(heatmap.values(), n, kf, gf);

  std::vector<char> active, tag;
  Dims3 g{1, 1, 1}, k{1, 1, 1};
  std::vector<double> local;
  for (std::size_t layer = 0; layer < config.layers.size(); ++layer) {
    const std::size_t width = config.layers[layer].bin_width;
    // Children per parent along each axis; layer 1 groups 2^d bins.
    Dims3 f{1, 1, 1};
    for (std::size_t a = shift; a < kMaxRank; ++a) f[a] = layer == 0 ? 2 : k[a] / width;
    Dims3 prev_g = g;
    Dims3 ratio{1, 1, 1};
    for (std::size_t a = shift; a < kMaxRank; ++a) {
      k[a] = width;
      ratio[a] = width / kf[a];
    }
    const bool last = layer + 1 == config.layers.size();
    if (last) g = gf;
    const std::vector<double> score = last ? fine : grid_bin_sums(fine, gf, ratio, g);
    const std::size_t nb = score.size();

    std::vector<char> next_active(nb, 1);
    if (layer > 0) {
      // Each parent bin expands to an f[0] x f[1] x f[2] block of children.
      for (std::size_t b0 = 0, p0 = 0, r0 = 0; b0 < g[0]; ++b0) {
        for (std::size_t b1 = 0, p1 = 0, r1 = 0; b1 < g[1]; ++b1) {
          const char* parent = tag.data() + (p0 * prev_g[1] + p1) * prev_g[2];
          char* out = next_active.data() + (b0 * g[1] + b1) * g[2];
          for (std::size_t p2 = 0, b2 = 0; p2 < prev_g[2]; ++p2)
            for (std::size_t c = 0; c < f[2] && b2 < g[2]; ++c) out[b2++] = parent[p2];
          if (++r1 == f[1]) {
            r1 = 0;
            ++p1;
          }
        }
        if (++r0 == f[0]) {
          r0 = 0;
          ++p0;
        }
      }
    }
    active = std::move(next_active);

    local.clear();
    for (std::size_t i = 0; i < nb; ++i)
      if (active[i]) local.push_back(score[i]);
    const double global = nearest_rank_inplace(local, config.layers[layer].global_percentile);
    tag.assign(nb, 0);
    for (std::size_t i = 0; i < nb; ++i) tag[i] = active[i] && score[i] >= global && score[i] > 0.0;

    // Local update over parent cells without global tags.
    const double p_local = config.layers[layer].local_percentile;
    Dims3 cg;
    for (std::size_t a = 0; a < kMaxRank; ++a) cg[a] = (g[a] + f[a] - 1) / f[a];
    for (std::size_t c0 = 0; c0 < cg[0]; ++c0)
      for (std::size_t c1 = 0; c1 < cg[1]; ++c1)
        for (std::size_t c2 = 0; c2 < cg[2]; ++c2) {
          const std::size_t lo0 = c0 * f[0], lo1 = c1 * f[1], lo2 = c2 * f[2];
          const std::size_t hi0 = std::min(g[0], lo0 + f[0]), hi1 = std::min(g[1], lo1 + f[1]),
                            hi2 = std::min(g[2], lo2 + f[2]);
          if (!active[(lo0 * g[1] + lo1) * g[2] + lo2]) continue;
          bool any = false;
          local.clear();
          for (std::size_t b0 = lo0; b0 < hi0; ++b0)
            for (std::size_t b1 = lo1; b1 < hi1; ++b1)
              for (std::size_t b2 = lo2; b2 < hi2; ++b2) {
                const std::size_t i = (b0 * g[1] + b1) * g[2] + b2;
                any |= tag[i] != 0;
                local.push_back(score[i]);
              }
          if (any) continue;
          const double thr = nearest_rank_inplace(local, p_local);
          for (std::size_t b0 = lo0; b0 < hi0; ++b0)
            for (std::size_t b1 = lo1; b1 < hi1; ++b1)
              for (std::size_t b2 = lo2; b2 < hi2; ++b2) {
                const std::size_t i = (b0 * g[1] + b1) * g[2] + b2;
                tag[i] = score[i] >= thr && score[i] > 0.0;
              }
        }
    if (std::find(tag.begin(), tag.end(), 1) == tag.end()) break;
  }

  std::vector<std::uint8_t> labels(element_count(dims), 0);
  const auto roi = static_cast<std::uint8_t>(Label::Roi);
  // Each bin row expands once and is copied to the k[0] x k[1] label rows it covers.
  std::vector<std::uint8_t> expanded(n[2]);
  for (std::size_t b0 = 0; b0 < g[0]; ++b0) {
    for (std::size_t b1 = 0; b1 < g[1]; ++b1) {
      const char* trow = tag.data() + (b0 * g[1] + b1) * g[2];
      for (std::size_t j = 0, b2 = 0, r2 = 0; j < n[2]; ++j) {
        expanded[j] = trow[b2] ? roi : 0;
        if (++r2 == k[2]) {
          r2 = 0;
          ++b2;
        }
      }
      for (std::size_t i0 = b0 * k[0]; i0 < std::min(n[0], (b0 + 1) * k[0]); ++i0)
        for (std::size_t i1 = b1 * k[1]; i1 < std::min(n[1], (b1 + 1) * k[1]); ++i1)
          std::copy(expanded.begin(), expanded.end(), labels.begin() + static_cast<std::ptrdiff_t>((i0 * n[1] + i1) * n[2]));
    }
  }
  return RegionMask(dims, std::move(labels));
}

}  // namespace

RegionMask detect_rois(const Field& heatmap, const RefinementConfig& config) {
  config.validate();
  const Shape& dims = heatmap.dims();
  const std::size_t rank = dims.size();
  const Shape strides = strides_of(dims);

  bool nested = true;
  for (std::size_t l = 1; l < config.layers.size(); ++l)
    nested &= config.layers[l - 1].bin_width % config.layers[l].bin_width == 0;
  if (nested) return detect_rois_nested(heatmap, config);

  Box domain;
  for (std::size_t a = 0; a < rank; ++a) domain.hi[a] = dims[a];

  // Layer 1 tiles the whole domain; its parent cells are 2^d blocks of bins.
  std::vector<Tiling> tilings{make_tiling(domain, rank, config.layers[0].bin_width, 0)};
  std::vector<std::size_t> parent;
  {
    const Tiling& t = tilings[0];
    parent.resize(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      std::size_t rest = i, cell = 0, scale = 1;
      for (std::size_t a = rank; a-- > 0;) {
        const std::size_t c = rest % t.count[a];
        rest /= t.count[a];
        cell += (c / 2) * scale;
        scale *= (t.count[a] + 1) / 2;
      }
      parent[i] = cell;
    }
  }

  std::vector<Box> tagged;
  for (std::size_t layer = 0;; ++layer) {
    const LayerSpec& spec = config.layers[layer];
    std::size_t nbins = 0;
    for (const Tiling& t : tilings) nbins += t.size();
    std::vector<double> score(nbins, 0.0);
    for (const Tiling& t : tilings) accumulate(heatmap, strides, t, score);

    std::vector<char> tag(nbins, 0);
    const double global = percentile_nearest_rank(score, spec.global_percentile);
    for (std::size_t i = 0; i < nbins; ++i) tag[i] = score[i] >= global && score[i] > 0.0;

    // Local update for parent cells the global pass left untouched.
    const std::size_t ncell = *std::max_element(parent.begin(), parent.end()) + 1;
    std::vector<std::size_t> start(ncell + 1, 0), order(nbins);
    for (std::size_t i = 0; i < nbins; ++i) ++start[parent[i] + 1];
    for (std::size_t c = 0; c < ncell; ++c) start[c + 1] += start[c];
    {
      std::vector<std::size_t> fill(start.begin(), start.end() - 1);
      for (std::size_t i = 0; i < nbins; ++i) order[fill[parent[i]]++] = i;
    }
    std::vector<double> local;
    for (std::size_t c = 0; c < ncell; ++c) {
      const auto first = order.begin() + static_cast<std::ptrdiff_t>(start[c]);
      const auto last = order.begin() + static_cast<std::ptrdiff_t>(start[c + 1]);
      if (first == last || std::any_of(first, last, [&](std::size_t i) { return tag[i]; })) continue;
      local.clear();
      for (auto it = first; it != last; ++it) local.push_back(score[*it]);
      const double thr = percentile_nearest_rank(local, spec.local_percentile);
      for (auto it = first; it != last; ++it) tag[*it] = score[*it] >= thr && score[*it] > 0.0;
    }

    tagged.clear();
    for (const Tiling& t : tilings)
      for (std::size_t i = 0; i < t.size(); ++i)
        if (tag[t.first + i]) tagged.push_back(t.bin(i, rank));
    if (layer + 1 == config.layers.size() || tagged.empty()) break;

    // Next layer: re-tile every tagged bin; each tagged bin is a parent cell.
    tilings.clear();
    parent.clear();
    std::size_t first = 0;
    for (std::size_t p = 0; p < tagged.size(); ++p) {
      tilings.push_back(make_tiling(tagged[p], rank, config.layers[layer + 1].bin_width, first));
      first += tilings.back().size();
      parent.insert(parent.end(), tilings.back().size(), p);
    }
  }

  std::vector<std::uint8_t> labels(element_count(dims), 0);
  for (const Box& b : tagged) {
    std::array<std::size_t, kMaxRank> lo{0, 0, 0}, hi{1, 1, 1}, st{0, 0, 0};
    const std::size_t shift = kMaxRank - rank;
    for (std::size_t a = 0; a < rank; ++a) {
      lo[a + shift] = b.lo[a];
      hi[a + shift] = b.hi[a];
      st[a + shift] = strides[a];
    }
    for (std::size_t c0 = lo[0]; c0 < hi[0]; ++c0)
      for (std::size_t c1 = lo[1]; c1 < hi[1]; ++c1)
        for (std::size_t c2 = lo[2]; c2 < hi[2]; ++c2)
          labels[c0 * st[0] + c1 * st[1] + c2 * st[2]] = static_cast<std::uint8_t>(Label::Roi);
  }
  return RegionMask(dims, std::move(labels));
}

namespace {

// Along `axis`: out[k] = OR of in[j] for j in [k*step + lo, k*step + hi],
// clipped to the input line. Works on whole rows of the trailing axes.
std::vector<char> window_or(const std::vector<char>& in, Shape& dims, std::size_t axis, std::size_t out_len,
                            std::size_t step, std::ptrdiff_t lo, std::ptrdiff_t hi) {
  const auto n = static_cast<std::ptrdiff_t>(dims[axis]);
  std::size_t inner = 1, outer = 1;
  for (std::size_t a = axis + 1; a < dims.size(); ++a) inner *= dims[a];
  for (std::size_t a = 0; a < axis; ++a) outer *= dims[a];
  std::vector<char> out(outer * out_len * inner, 0);
  std::vector<std::uint32_t> prefix(static_cast<std::size_t>(n) + 1, 0);
  for (std::size_t o = 0; o < outer; ++o) {
    const char* src = in.data() + o * static_cast<std::size_t>(n) * inner;
    char* dst = out.data() + o * out_len * inner;
    if (inner == 1 && step == 1) {
      const auto len = static_cast<std::ptrdiff_t>(out_len);
      for (std::ptrdiff_t j = lo; j <= hi; ++j) {
        const std::ptrdiff_t k0 = std::max<std::ptrdiff_t>(0, -j), k1 = std::min(len, n - j);
        for (std::ptrdiff_t k = k0; k < k1; ++k) dst[k] |= src[k + j];
      }
      continue;
    }
    if (inner == 1) {
      for (std::ptrdiff_t j = 0; j < n; ++j) prefix[j + 1] = prefix[j] + (src[j] != 0);
      if (prefix[n] == 0) continue;
    }
    for (std::size_t k = 0; k < out_len; ++k) {
      const std::ptrdiff_t centre = static_cast<std::ptrdiff_t>(k * step);
      const std::ptrdiff_t a = std::max<std::ptrdiff_t>(0, centre + lo);
      const std::ptrdiff_t b = std::min<std::ptrdiff_t>(n - 1, centre + hi);
      if (a > b) continue;
      if (inner == 1) {
        dst[k] = prefix[b + 1] > prefix[a];
        continue;
      }
      char* __restrict row = dst + k * inner;
      for (std::ptrdiff_t j = a; j <= b; ++j) {
        const char* __restrict r = src + static_cast<std::size_t>(j) * inner;
        for (std::size_t i = 0; i < inner; ++i) row[i] |= r[i];
      }
    }
  }
  dims[axis] = out_len;
  return out;
}

}  // namespace

RegionMask dilate_buffer(const RegionMask& mask, unsigned buffer_width, const GridHierarchy& hierarchy) {
  if (mask.dims() != hierarchy.dims()) throw InvalidInput("mask and hierarchy dims differ");
  const Shape& dims = mask.dims();
  const std::size_t rank = dims.size();
  const std::size_t n = mask.size();
  std::vector<std::uint8_t> labels(n);
  std::vector<char> roi(n);
  for (std::size_t i = 0; i < n; ++i) {
    roi[i] = mask[i] == Label::Roi;
    labels[i] = roi[i] ? static_cast<std::uint8_t>(Label::Roi) : 0;
  }
  const int L = hierarchy.levels();
  if (buffer_width == 0 || L == 0) return RegionMask(dims, std::move(labels));

  // blk holds, per cell of the stride-s lattice, whether the closed cell
  // contains a RoI node. A lattice node p is within Chebyshev distance
  // 2 R s of RoI exactly when some cell k in [p/s - 2R, p/s + 2R - 1] is set.
  const Shape strides = strides_of(dims);
  const auto w = static_cast<std::ptrdiff_t>(2 * buffer_width);
  Shape bdims = dims;
  std::vector<char> blk;
  for (int level = L; level >= 1; --level) {
    const std::size_t s = hierarchy.stride(level);
    Shape rdims;
    std::vector<char> reach;
    if (level == L) {
      // Finest lattice: dilate the RoI nodes directly by 2R.
      rdims = dims;
      reach = roi;
      for (std::size_t a = 0; a < rank; ++a) reach = window_or(reach, rdims, a, dims[a], 1, -w, w);
    } else {
      if (level == L - 1) {
        blk = roi;
        for (std::size_t a = 0; a < rank; ++a) blk = window_or(blk, bdims, a, (dims[a] - 1) / 2, 2, 0, 2);
      } else {
        for (std::size_t a = 0; a < rank; ++a) blk = window_or(blk, bdims, a, bdims[a] / 2, 2, 0, 1);
      }
      rdims = bdims;
      reach = blk;
      for (std::size_t a = 0; a < rank; ++a) reach = window_or(reach, rdims, a, bdims[a] + 1, 1, -w, w - 1);
    }

    // Level 1 also labels N_0, which shares its lattice and radius.
    std::array<std::size_t, kMaxRank> ext{1, 1, 1}, st{0, 0, 0};
    const std::size_t shift = kMaxRank - rank;
    for (std::size_t a = 0; a < rank; ++a) {
      ext[a + shift] = rdims[a];
      st[a + shift] = s * strides[a];
    }
    std::size_t k = 0;
    for (std::size_t c0 = 0; c0 < ext[0]; ++c0) {
      for (std::size_t c1 = 0; c1 < ext[1]; ++c1) {
        const bool odd01 = ((c0 | c1) & 1) != 0;
        const std::size_t row = c0 * st[0] + c1 * st[1];
        // Background (0) becomes Buffer (1); Roi nodes are masked out.
        const std::uint8_t all = odd01 || level == 1;
        for (std::size_t c2 = 0; c2 < ext[2]; ++c2, ++k) {
          const std::size_t fine = row + c2 * st[2];
          labels[fine] |= static_cast<std::uint8_t>(reach[k] & (all | (c2 & 1)) & (roi[fine] ^ 1));
        }
      }
    }
  }
  return RegionMask(dims, std::move(labels));
}

std::size_t count_roi_components(const RegionMask& mask) {
  const Shape& dims = mask.dims();
  const Shape strides = strides_of(dims);
  const std::size_t n = mask.size();
  std::vector<std::size_t> root(n);
  std::iota(root.begin(), root.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (root[x] != x) x = root[x] = root[root[x]];
    return x;
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (mask[i] != Label::Roi) continue;
    const Shape c = unflatten(i, dims);
    for (std::size_t a = 0; a < dims.size(); ++a) {
      if (c[a] + 1 >= dims[a] || mask[i + strides[a]] != Label::Roi) continue;
      root[find(i + strides[a])] = find(i);
    }
  }
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (mask[i] == Label::Roi && find(i) == i) ++count;
  return count;
}

}  // namespace stra
