#include "stra/track.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>

#include "stra/errors.hpp"
#include "stra/roi.hpp"

namespace stra {

namespace {

// Vertex of the parabola through (-1, lo), (0, mid), (1, hi), kept within half a node.
double parabola_offset(double lo, double mid, double hi) {
  const double curv = lo - 2.0 * mid + hi;
  if (!(curv > 0.0)) return 0.0;
  return std::clamp(0.5 * (lo - hi) / curv, -0.5, 0.5);
}

}  // namespace

std::vector<Candidate> detect_candidates(const Field& slice, double depth_threshold,
                                         const CandidateOptions& options) {
  if (slice.rank() != 2) throw InvalidInput("candidate detection needs a 2D slice");
  const std::size_t nx = slice.dims()[0], ny = slice.dims()[1];
  const auto v = slice.values();
  const double cut = percentile_nearest_rank(std::vector<double>(v.begin(), v.end()), 50.0) - depth_threshold;

  struct Found {
    std::size_t index;
    Candidate c;
    double value;
  };
  std::vector<Found> found;
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < ny; ++j) {
      const std::size_t k = i * ny + j;
      const double f = v[k];
      if (!(f <= cut)) continue;
      bool minimum = true;
      for (int di = -1; di <= 1 && minimum; ++di) {
        for (int dj = -1; dj <= 1; ++dj) {
          if (di == 0 && dj == 0) continue;
          const std::ptrdiff_t a = static_cast<std::ptrdiff_t>(i) + di, b = static_cast<std::ptrdiff_t>(j) + dj;
          if (a < 0 || b < 0 || a >= static_cast<std::ptrdiff_t>(nx) || b >= static_cast<std::ptrdiff_t>(ny)) continue;
          const std::size_t m = static_cast<std::size_t>(a) * ny + static_cast<std::size_t>(b);
          // Equal values: the lower flat index wins.
          if (v[m] < f || (v[m] == f && m < k)) {
            minimum = false;
            break;
          }
        }
      }
      if (!minimum) continue;
      Candidate c{static_cast<double>(i), static_cast<double>(j), cut + depth_threshold - f};
      if (options.subpixel) {
        if (i > 0 && i + 1 < nx) c.x += parabola_offset(v[k - ny], f, v[k + ny]);
        if (j > 0 && j + 1 < ny) c.y += parabola_offset(v[k - 1], f, v[k + 1]);
      }
      found.push_back({k, c, f});
    }
  }

  if (options.merge_radius > 0.0 && found.size() > 1) {
    std::vector<std::size_t> order(found.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return std::tie(found[a].value, found[a].index) < std::tie(found[b].value, found[b].index);
    });
    const double r2 = options.merge_radius * options.merge_radius;
    std::vector<bool> keep(found.size(), false);
    std::vector<std::size_t> kept;
    for (std::size_t a : order) {
      bool clear = true;
      for (std::size_t b : kept) {
        const double dx = found[a].c.x - found[b].c.x, dy = found[a].c.y - found[b].c.y;
        if (dx * dx + dy * dy < r2) {
          clear = false;
          break;
        }
      }
      if (clear) {
        keep[a] = true;
        kept.push_back(a);
      }
    }
    std::vector<Found> merged;
    for (std::size_t a = 0; a < found.size(); ++a)
      if (keep[a]) merged.push_back(found[a]);
    found = std::move(merged);
  }

  std::vector<Candidate> out;
  out.reserve(found.size());
  for (const Found& f : found) out.push_back(f.c);
  return out;
}

std::vector<Track> stitch_tracks(const std::vector<Frame>& frames, const StitchConfig& config) {
  if (config.max_gap < 0 || config.max_dist < 0) throw InvalidInput("stitch thresholds must be nonnegative");
  for (std::size_t f = 1; f < frames.size(); ++f)
    if (frames[f].t <= frames[f - 1].t) throw InvalidInput("frames must have increasing times");

  std::vector<Track> tracks;
  std::vector<std::size_t> active;
  struct Link {
    double dist;
    std::size_t track;
    std::size_t cand;
  };
  std::vector<Link> links;
  for (const Frame& frame : frames) {
    std::erase_if(active, [&](std::size_t k) { return frame.t - tracks[k].last_t() - 1 > config.max_gap; });
    links.clear();
    for (std::size_t k : active) {
      const TrackPoint& last = tracks[k].points.back();
      const double budget = config.max_dist * (frame.t - last.t);
      for (std::size_t c = 0; c < frame.candidates.size(); ++c) {
        const double d = std::hypot(frame.candidates[c].x - last.x, frame.candidates[c].y - last.y);
        if (d <= budget) links.push_back({d, k, c});
      }
    }
    std::sort(links.begin(), links.end(), [](const Link& a, const Link& b) {
      return std::tie(a.dist, a.track, a.cand) < std::tie(b.dist, b.track, b.cand);
    });
    std::vector<bool> cand_used(frame.candidates.size(), false);
    std::vector<std::size_t> extended;
    for (const Link& l : links) {
      if (cand_used[l.cand] || std::find(extended.begin(), extended.end(), l.track) != extended.end()) continue;
      cand_used[l.cand] = true;
      extended.push_back(l.track);
      const Candidate& c = frame.candidates[l.cand];
      tracks[l.track].points.push_back({frame.t, c.x, c.y, c.intensity});
    }
    for (std::size_t c = 0; c < frame.candidates.size(); ++c) {
      if (cand_used[c]) continue;
      const Candidate& cd = frame.candidates[c];
      tracks.push_back(Track{{{frame.t, cd.x, cd.y, cd.intensity}}});
      active.push_back(tracks.size() - 1);
    }
  }
  std::erase_if(tracks, [&](const Track& t) { return t.last_t() - t.first_t() < config.min_len; });
  return tracks;
}

void write_tracks(std::ostream& out, const std::vector<Track>& tracks) {
  char line[160];
  for (std::size_t k = 0; k < tracks.size(); ++k) {
    for (const TrackPoint& p : tracks[k].points) {
      std::snprintf(line, sizeof line, "%zu,%d,%.17g,%.17g,%.17g\n", k, p.t, p.x, p.y, p.intensity);
      out << line;
    }
  }
}

std::vector<Track> read_tracks(std::istream& in) {
  std::vector<Track> tracks;
  std::string line;
  long prev_id = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    long id = 0;
    TrackPoint p;
    char c1 = 0, c2 = 0, c3 = 0, c4 = 0;
    if (!(ls >> id >> c1 >> p.t >> c2 >> p.x >> c3 >> p.y >> c4 >> p.intensity) || c1 != ',' || c2 != ',' ||
        c3 != ',' || c4 != ',')
      throw InvalidInput("bad track record: " + line);
    if (id != prev_id) {
      tracks.emplace_back();
      prev_id = id;
    }
    tracks.back().points.push_back(p);
  }
  return tracks;
}

}  // namespace stra
