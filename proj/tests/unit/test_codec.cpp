#include <doctest.h>

#include <zlib.h>

#include <cmath>
#include <map>
#include <queue>
#include <random>

#include "stra/calibration.hpp"
#include "stra/codec.hpp"
#include "stra/errors.hpp"
#include "stra/huffman.hpp"

using namespace stra;

namespace {

Field smooth_field(const Shape& dims, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 6.28);
  const double p0 = u(rng), p1 = u(rng), p2 = u(rng);
  std::normal_distribution<double> g(0.0, 0.01);
  const Shape st = strides_of(dims);
  std::vector<double> v(element_count(dims));
  for (std::size_t i = 0; i < v.size(); ++i) {
    double s = 0.0;
    const double ph[3] = {p0, p1, p2};
    for (std::size_t a = 0, rem = i; a < dims.size(); ++a) {
      s += std::sin(0.3 * double(rem / st[a]) + ph[a]);
      rem %= st[a];
    }
    v[i] = s + g(rng);
  }
  return Field(dims, v);
}

double max_error(const Field& a, const Field& b) {
  double e = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, std::abs(a[i] - b[i]));
  return e;
}

void rewrite_crc(std::vector<std::uint8_t>& b) {
  uLong crc = crc32(0L, b.data(), 6);
  crc = crc32(crc, b.data() + 10, static_cast<uInt>(b.size() - 10));
  for (int k = 0; k < 4; ++k) b[6 + k] = static_cast<std::uint8_t>(crc >> (8 * k));
}

// Cost of an optimal prefix code, by the textbook merge of the two lightest.
std::uint64_t huffman_cost(const std::vector<std::uint64_t>& freqs) {
  std::priority_queue<std::uint64_t, std::vector<std::uint64_t>, std::greater<>> q;
  for (auto f : freqs)
    if (f) q.push(f);
  if (q.size() < 2) return 0;
  std::uint64_t cost = 0;
  while (q.size() > 1) {
    const auto a = q.top();
    q.pop();
    const auto b = q.top();
    q.pop();
    cost += a + b;
    q.push(a + b);
  }
  return cost;
}

}  // namespace

TEST_CASE("huffman code lengths are optimal and prefix-free") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::uint64_t> f(2 + rng() % 40);
    for (auto& x : f) x = rng() % 3 ? 1 + rng() % 1000 : 0;
    f[0] = 1 + f[0];
    f[1] = 1 + f[1];
    const auto len = huffman_code_lengths(f);
    std::uint64_t cost = 0;
    double kraft = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (!f[i]) continue;
      cost += f[i] * len[i];
      kraft += std::ldexp(1.0, -len[i]);
    }
    CHECK(cost == huffman_cost(f));
    CHECK(kraft <= 1.0);
  }
}

TEST_CASE("huffman length limit") {
  std::vector<std::uint64_t> fib{1, 1};
  while (fib.size() < 30) fib.push_back(fib[fib.size() - 1] + fib[fib.size() - 2]);
  const auto len = huffman_code_lengths(fib, 12);
  double kraft = 0.0;
  for (auto l : len) {
    CHECK(l <= 12);
    CHECK(l >= 1);
    kraft += std::ldexp(1.0, -l);
  }
  CHECK(kraft <= 1.0);
}

TEST_CASE("huffman roundtrip") {
  std::mt19937_64 rng(5);
  std::geometric_distribution<int> geo(0.3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::int64_t> s(rng() % 5000);
    for (auto& x : s) x = (rng() & 1 ? 1 : -1) * geo(rng);
    if (trial % 10 == 0 && !s.empty()) s[0] = std::numeric_limits<std::int64_t>::min() / 4;
    CHECK(huffman_decode(huffman_encode(s), s.size()) == s);
  }
  const std::vector<std::int64_t> same(100, -7);
  CHECK(huffman_decode(huffman_encode(same), same.size()) == same);
  CHECK(huffman_decode(huffman_encode({}), 0).empty());
}

TEST_CASE("huffman rejects truncated streams") {
  std::vector<std::int64_t> s;
  for (int i = 0; i < 1000; ++i) s.push_back(i % 17 - 8);
  auto bytes = huffman_encode(s);
  bytes.resize(bytes.size() / 2);
  CHECK_THROWS_AS(huffman_decode(bytes, s.size()), FormatError);
}

TEST_CASE("bin widths") {
  CHECK(bin_width(1e-3, 4, NormMode::Max, 1.25) == doctest::Approx(2e-3 / (1.25 * 5)));
  CHECK(bin_width(1e-3, 4, NormMode::Rms, 1.25) == doctest::Approx(2 * std::sqrt(3.0) * 1e-3 / std::sqrt(5.0)));
}

TEST_CASE("quantization error is at most half a bin") {
  const Field f = smooth_field({17, 33}, 1);
  const CoeffPyramid p = decompose(f);
  RegionMask m(f.dims());
  for (std::size_t i = 0; i < m.size(); i += 3) m.set(i, Label::Roi);
  const QuantizedPyramid q = quantize(p, m, 1e-3, 1e-1);
  const CoeffPyramid back = dequantize(q, m, f.spacing());
  const auto level = p.hierarchy().level_map();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double bin = m.is_protected(i) || level[i] == 0 ? 1e-3 : 1e-1;
    CHECK(std::abs(back[i] - p[i]) <= bin / 2 * (1 + 1e-12));
  }
  CHECK_THROWS_AS(quantize(p, m, 0.0, 1.0), ConfigError);
}

TEST_CASE("backends roundtrip") {
  std::vector<std::uint8_t> data(10000);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<std::uint8_t>(i * i % 251);
  for (Backend b : {Backend::None, Backend::Zlib}) CHECK(backend_unpack(backend_pack(data, b), b) == data);
  CHECK_THROWS_AS(backend_pack(data, static_cast<Backend>(7)), FormatError);
}

TEST_CASE("uniform mode honours the max bound") {
  for (const Shape& dims : {Shape{100}, Shape{40, 50}, Shape{17, 20, 9}})
    for (double tau : {1e-1, 1e-3, 1e-5}) {
      const Field f = smooth_field(dims, dims.size());
      CompressConfig c;
      c.tau0 = tau;
      c.adaptive = false;
      const CompressResult r = compress(TemporalStack({f}), c);
      const TemporalStack back = decompress(r.blob);
      REQUIRE(back.timesteps() == 1);
      REQUIRE(back[0].dims() == dims);
      CHECK(max_error(back[0], f) <= tau);
      CHECK(r.stats.ratio() > 1.0);
    }
}

TEST_CASE("all-RoI mask is byte-identical to uniform") {
  const Field f = smooth_field({33, 33}, 9);
  CompressConfig u;
  u.adaptive = false;
  CompressConfig a;
  a.mask = RegionMask(f.dims(), Label::Roi);
  CHECK(compress(TemporalStack({f}), u).blob == compress(TemporalStack({f}), a).blob);
}

TEST_CASE("temporal stacks") {
  std::vector<Field> slices;
  for (int t = 0; t < 5; ++t) slices.push_back(smooth_field({9, 12}, t));
  const TemporalStack s(slices);
  const Field joint = s.to_field();
  CHECK(joint.dims() == Shape{9, 12, 5});
  CHECK(joint[(3 * 12 + 4) * 5 + 2] == slices[2][3 * 12 + 4]);
  const TemporalStack back = TemporalStack::from_field(joint, 5);
  for (int t = 0; t < 5; ++t) CHECK(max_error(back[t], slices[t]) == 0.0);

  CompressConfig c;
  c.tau0 = 1e-3;
  const CompressResult r = compress(s, c);
  const TemporalStack d = decompress(r.blob);
  REQUIRE(d.timesteps() == 5);
  for (int t = 0; t < 5; ++t) CHECK(d[t].dims() == Shape{9, 12});

  CHECK_THROWS_AS(TemporalStack({smooth_field({5, 5, 5}, 1), smooth_field({5, 5, 5}, 2)}), InvalidInput);
  CHECK_THROWS_AS(TemporalStack({smooth_field({5, 5}, 1), smooth_field({5, 6}, 2)}), InvalidInput);
}

TEST_CASE("tau1 request above the cap is lowered") {
  const Field f = smooth_field({65, 65}, 4);
  CompressConfig c;
  c.tau0 = 1e-3;
  c.buffer_width = 1;
  c.refinement = RefinementConfig{{{8, 90, 99}}};
  c.tau1 = 10.0;
  const CompressResult r = compress(TemporalStack({f}), c);
  REQUIRE(r.stats.roi_nodes + r.stats.buffer_nodes < 65 * 65);
  CHECK(r.stats.tau1_capped);
  CHECK(r.stats.tau1 == tau1_cap(1e-3, 1, cached_calibration().scale_for(2)));
  c.tau1 = 2e-3;
  const CompressResult low = compress(TemporalStack({f}), c);
  CHECK_FALSE(low.stats.tau1_capped);
  CHECK(low.stats.tau1 == 2e-3);
  c.tau1 = 1e-4;
  CHECK_THROWS_AS(compress(TemporalStack({f}), c), ConfigError);
}

TEST_CASE("blob roundtrip and corruption") {
  const Field f = smooth_field({33, 17}, 6);
  CompressConfig c;
  const std::vector<std::uint8_t> blob = compress(TemporalStack({f}), c).blob;
  const CompressedBlob parsed = parse_blob(blob);
  CHECK(serialize_blob(parsed) == blob);
  CHECK(parsed.header.orig_dims == Shape{33, 17});
  CHECK(parsed.header.tau0 == c.tau0);

  auto flip = blob;
  flip[blob.size() / 2] ^= 0x10;
  try {
    parse_blob(flip);
    FAIL("corrupted blob parsed");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::Checksum);
  }

  auto ver = blob;
  ver[4] = 9;
  rewrite_crc(ver);
  try {
    parse_blob(ver);
    FAIL("unknown version parsed");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::Unsupported);
  }

  auto magic = blob;
  magic[0] = 'X';
  rewrite_crc(magic);
  CHECK_THROWS_AS(parse_blob(magic), FormatError);

  auto cut = std::vector<std::uint8_t>(blob.begin(), blob.begin() + 40);
  rewrite_crc(cut);
  try {
    parse_blob(cut);
    FAIL("truncated blob parsed");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::Framing);
  }
  CHECK_THROWS_AS(parse_blob(std::vector<std::uint8_t>{'S', 'T'}), FormatError);
}

TEST_CASE("ratio search reaches the target") {
  const Field f = smooth_field({65, 65}, 12);
  CompressConfig c;
  c.adaptive = false;
  const std::vector<Analysis> a{analyze(TemporalStack({f}), c)};
  for (double target : {5.0, 20.0}) {
    const RatioSearch s = search_ratio(a, c, target);
    CHECK(s.ratio >= target);
    c.tau0 = s.tau0 * 0.9;
    CHECK(encode_analysis(a[0], c).stats.ratio() < s.ratio * 1.0001);
  }
}
