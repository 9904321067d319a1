#include "stra/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "stra/errors.hpp"

namespace stra {

double gcd(double lon1, double lat1, double lon2, double lat2) {
  constexpr double rad = std::numbers::pi / 180.0;
  const double p1 = lat1 * rad, p2 = lat2 * rad;
  const double c = std::sin(p1) * std::sin(p2) + std::cos(p1) * std::cos(p2) * std::cos((lon1 - lon2) * rad);
  return std::acos(std::clamp(c, -1.0, 1.0));
}

double point_distance(const TrackPoint& a, const TrackPoint& b, PointMetric metric) {
  if (metric == PointMetric::GreatCircle) return gcd(a.x, a.y, b.x, b.y);
  return std::hypot(a.x - b.x, a.y - b.y);
}

double frechet(const Track& a, const Track& b, PointMetric metric) {
  if (a.empty() || b.empty()) throw InvalidInput("frechet needs nonempty tracks");
  const std::size_t n = a.size(), m = b.size();
  std::vector<double> prev(m), cur(m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double d = point_distance(a.points[i], b.points[j], metric);
      double reach;
      if (i == 0 && j == 0) reach = 0.0;
      else if (i == 0) reach = cur[j - 1];
      else if (j == 0) reach = prev[j];
      else reach = std::min({prev[j], prev[j - 1], cur[j - 1]});
      cur[j] = std::max(d, reach);
    }
    std::swap(prev, cur);
  }
  return prev[m - 1];
}

namespace {

class ArcCurve {
 public:
  ArcCurve(const Track& t, PointMetric metric) : track_(t), s_(t.size(), 0.0) {
    for (std::size_t i = 1; i < t.size(); ++i)
      s_[i] = s_[i - 1] + point_distance(t.points[i - 1], t.points[i], metric);
  }

  double length() const { return s_.back(); }

  TrackPoint at(double s) const {
    if (s <= 0.0 || track_.size() == 1) return track_.points.front();
    if (s >= length()) return track_.points.back();
    const std::size_t k = static_cast<std::size_t>(std::upper_bound(s_.begin(), s_.end(), s) - s_.begin());
    const TrackPoint& p = track_.points[k - 1];
    const TrackPoint& q = track_.points[k];
    const double w = s_[k] > s_[k - 1] ? (s - s_[k - 1]) / (s_[k] - s_[k - 1]) : 0.0;
    return {p.t, p.x + w * (q.x - p.x), p.y + w * (q.y - p.y), p.intensity + w * (q.intensity - p.intensity)};
  }

 private:
  const Track& track_;
  std::vector<double> s_;
};

}  // namespace

double pcm(const Track& a, const Track& b, PointMetric metric) {
  if (a.empty() || b.empty()) throw InvalidInput("pcm needs nonempty tracks");
  ArcCurve ca(a, metric), cb(b, metric);
  const ArcCurve& lng = ca.length() >= cb.length() ? ca : cb;
  const ArcCurve& sht = ca.length() >= cb.length() ? cb : ca;
  const double window = sht.length();
  const double slack = lng.length() - window;

  std::vector<TrackPoint> fixed(kPcmSamples);
  for (std::size_t i = 0; i < kPcmSamples; ++i) fixed[i] = sht.at(window * i / (kPcmSamples - 1));
  auto cost = [&](double offset) {
    double sum = 0.0;
    for (std::size_t i = 0; i < kPcmSamples; ++i)
      sum += point_distance(lng.at(offset + window * i / (kPcmSamples - 1)), fixed[i], metric);
    return sum / kPcmSamples;
  };
  if (!(slack > 0.0)) return cost(0.0);

  // Coarse scan of window offsets, then golden-section refinement around the best.
  constexpr int kScan = 128;
  int best_k = 0;
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= kScan; ++k) {
    const double c = cost(slack * k / kScan);
    if (c < best) {
      best = c;
      best_k = k;
    }
  }
  double lo = slack * std::max(0, best_k - 1) / kScan, hi = slack * std::min(kScan, best_k + 1) / kScan;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = cost(x1), f2 = cost(x2);
  for (int it = 0; it < 60; ++it) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = cost(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = cost(x2);
    }
  }
  return std::min({best, f1, f2});
}

std::vector<TrackScore> classify(const std::vector<Track>& reduced, const std::vector<Track>& truth,
                                 const ClassifyThresholds& th) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<TrackScore> scores(truth.size());
  for (std::size_t k = 0; k < truth.size(); ++k) {
    TrackScore& s = scores[k];
    s.frechet = s.pcm = inf;
    for (std::size_t r = 0; r < reduced.size(); ++r) {
      const double f = frechet(truth[k], reduced[r], th.metric);
      if (f < s.frechet) {
        s.frechet = f;
        s.match = static_cast<int>(r);
      }
    }
    if (s.match < 0) continue;
    const Track& m = reduced[static_cast<std::size_t>(s.match)];
    s.pcm = pcm(truth[k], m, th.metric);
    if (s.frechet <= th.matched_frechet && s.pcm <= th.matched_pcm) s.cls = TrackClass::Matched;
    else if (s.pcm <= th.partial_pcm) s.cls = TrackClass::Partial;
    else s.cls = TrackClass::Missed;

    // Mean distance over points that share a time.
    double sum = 0.0;
    std::size_t n = 0, i = 0, j = 0;
    const auto& p = truth[k].points;
    const auto& q = m.points;
    while (i < p.size() && j < q.size()) {
      if (p[i].t < q[j].t) ++i;
      else if (q[j].t < p[i].t) ++j;
      else {
        sum += point_distance(p[i++], q[j++], th.metric);
        ++n;
      }
    }
    if (n > 0) {
      s.mean_gcd = sum / static_cast<double>(n);
      s.range = s.mean_gcd == 0.0               ? ErrorRange::Zero
                : s.mean_gcd <= th.grid_spacing ? ErrorRange::WithinGrid
                                                : ErrorRange::BeyondGrid;
    }
  }
  return scores;
}

ClassCounts tally(const std::vector<TrackScore>& scores) {
  ClassCounts c;
  for (const TrackScore& s : scores) {
    if (s.cls == TrackClass::Matched) ++c.matched;
    else if (s.cls == TrackClass::Partial) ++c.partial;
    else ++c.missed;
    if (s.cls == TrackClass::Missed) continue;
    if (s.range == ErrorRange::Zero) ++c.range0;
    else if (s.range == ErrorRange::WithinGrid) ++c.range_mid;
    else if (s.range == ErrorRange::BeyondGrid) ++c.range_inf;
    if (s.cls == TrackClass::Matched && s.range == ErrorRange::Zero) ++c.exact;
  }
  return c;
}

}  // namespace stra
