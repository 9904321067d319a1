#include <doctest.h>

#include <cmath>
#include <random>

#include "stra/errors.hpp"
#include "stra/transform.hpp"

using namespace stra;

namespace {

using Matrix = std::vector<std::vector<double>>;

// Hat function of the node at `centre` with half-width `s`, sampled at integer x.
double hat(long x, long centre, long s) {
  const long d = std::labs(x - centre);
  return d >= s ? 0.0 : 1.0 - static_cast<double>(d) / static_cast<double>(s);
}

// Exact integral of the product of two functions that are linear on every
// unit element of [0, n-1], given by their samples.
double integrate(const std::vector<double>& a, const std::vector<double>& b, double h) {
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < a.size(); ++k)
    s += h / 6.0 * (2 * a[k] * b[k] + a[k] * b[k + 1] + a[k + 1] * b[k] + 2 * a[k + 1] * b[k + 1]);
  return s;
}

std::vector<double> solve(Matrix m, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(m[r][c]) > std::abs(m[p][c])) p = r;
    std::swap(m[c], m[p]);
    std::swap(b[c], b[p]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = m[r][c] / m[c][c];
      for (std::size_t k = c; k < n; ++k) m[r][k] -= f * m[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t c = n; c-- > 0;) {
    double s = b[c];
    for (std::size_t k = c + 1; k < n; ++k) s -= m[c][k] * x[k];
    x[c] = s / m[c][c];
  }
  return x;
}

// L2 projection from the fine P1 space of n nodes onto the P1 space on every
// s-th node, as a dense (n_c x n) matrix.
Matrix projection(std::size_t n, std::size_t s, double h) {
  const std::size_t nc = (n - 1) / s + 1;
  std::vector<std::vector<double>> coarse(nc, std::vector<double>(n)), fine(n, std::vector<double>(n));
  for (std::size_t i = 0; i < nc; ++i)
    for (std::size_t x = 0; x < n; ++x) coarse[i][x] = hat(long(x), long(i * s), long(s));
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t x = 0; x < n; ++x) fine[j][x] = hat(long(x), long(j), 1);
  Matrix mc(nc, std::vector<double>(nc));
  for (std::size_t i = 0; i < nc; ++i)
    for (std::size_t k = 0; k < nc; ++k) mc[i][k] = integrate(coarse[i], coarse[k], h);
  Matrix p(nc, std::vector<double>(n));
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> load(nc);
    for (std::size_t i = 0; i < nc; ++i) load[i] = integrate(coarse[i], fine[j], h);
    const std::vector<double> col = solve(mc, load);
    for (std::size_t i = 0; i < nc; ++i) p[i][j] = col[i];
  }
  return p;
}

// Applies a (m x dims[axis]) matrix along one axis of a row-major array.
std::vector<double> apply_axis(const std::vector<double>& v, Shape& dims, std::size_t axis, const Matrix& m) {
  Shape out_dims = dims;
  out_dims[axis] = m.size();
  const Shape is = strides_of(dims), os = strides_of(out_dims);
  std::vector<double> out(element_count(out_dims), 0.0);
  for (std::size_t o = 0; o < out.size(); ++o) {
    std::size_t base = 0, row = 0;
    for (std::size_t a = 0, rem = o; a < dims.size(); ++a) {
      const std::size_t c = rem / os[a];
      rem %= os[a];
      if (a == axis) row = c;
      else base += c * is[a];
    }
    for (std::size_t j = 0; j < dims[axis]; ++j) out[o] += m[row][j] * v[base + j * is[axis]];
  }
  dims = out_dims;
  return out;
}

// Multilinear interpolation of the even nodes of a level grid at every node.
double interp_even(const std::vector<double>& v, const Shape& dims, const Shape& c) {
  const Shape st = strides_of(dims);
  double s = 0.0;
  const std::size_t r = dims.size();
  for (std::size_t corner = 0; corner < (std::size_t{1} << r); ++corner) {
    double w = 1.0;
    std::size_t off = 0;
    for (std::size_t a = 0; a < r; ++a) {
      std::size_t x = c[a];
      if (c[a] % 2) {
        x = (corner >> a & 1) ? c[a] + 1 : c[a] - 1;
        w *= 0.5;
      } else if (corner >> a & 1) {
        w = 0.0;
      }
      off += x * st[a];
    }
    if (w != 0.0) s += w * v[off];
  }
  return s;
}

// Coefficients by definition: V_l = Q_l u on every level, then the level-l
// coefficient is V_l minus the interpolant of V_l's even nodes.
std::vector<double> oracle_decompose(const Field& f) {
  const GridHierarchy h(f.dims());
  const int L = h.levels();
  const Shape fst = strides_of(f.dims());
  std::vector<double> coeffs(f.size(), 0.0);
  for (int l = 0; l <= L; ++l) {
    const std::size_t s = h.stride(l);
    Shape dims = f.dims();
    std::vector<double> v(f.values().begin(), f.values().end());
    for (std::size_t a = 0; a < dims.size(); ++a) v = apply_axis(v, dims, a, projection(f.dims()[a], s, 1.0));
    const Shape st = strides_of(dims);
    for (std::size_t k = 0; k < v.size(); ++k) {
      Shape c(dims.size());
      std::size_t fine = 0;
      bool odd = false;
      for (std::size_t a = 0, rem = k; a < dims.size(); ++a) {
        c[a] = rem / st[a];
        rem %= st[a];
        fine += c[a] * s * fst[a];
        odd = odd || c[a] % 2;
      }
      if (l == 0) coeffs[fine] = v[k];
      else if (odd) coeffs[fine] = v[k] - interp_even(v, dims, c);
    }
  }
  return coeffs;
}

Field random_field(const Shape& dims, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> v(element_count(dims));
  for (double& x : v) x = g(rng);
  return Field(dims, v);
}

}  // namespace

TEST_CASE("coefficients match the projection definition") {
  for (const Shape& dims : {Shape{17}, Shape{33}, Shape{9, 9}, Shape{5, 17}, Shape{9, 5, 9}}) {
    const Field f = random_field(dims, dims.size() * 31 + dims[0]);
    const CoeffPyramid p = decompose(f);
    const std::vector<double> ref = oracle_decompose(f);
    double worst = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(p[i] - ref[i]));
    INFO("dims rank " << dims.size() << " n0 " << dims[0]);
    CHECK(worst < 1e-11);
  }
}

TEST_CASE("single 1D level step") {
  SUBCASE("details are the midpoint residuals") {
    const std::vector<double> v{1.0, 4.0, 2.0, 2.0, 0.0};
    const LevelSplit s = decompose_1d_level(v, 1.0);
    CHECK(s.details == std::vector<double>{0.0, 2.5, 0.0, 1.0, 0.0});
    REQUIRE(s.coarse.size() == 3);
  }
  SUBCASE("coarse values are the L2 projection") {
    const Field f = random_field({33}, 5);
    const std::vector<double> v(f.values().begin(), f.values().end());
    for (double h : {1.0, 0.25}) {
      const LevelSplit s = decompose_1d_level(v, h);
      const Matrix p = projection(33, 2, h);
      for (std::size_t i = 0; i < s.coarse.size(); ++i) {
        double ref = 0.0;
        for (std::size_t j = 0; j < v.size(); ++j) ref += p[i][j] * v[j];
        CHECK(s.coarse[i] == doctest::Approx(ref).epsilon(1e-12));
      }
    }
  }
  SUBCASE("linear data has zero details and unchanged coarse values") {
    std::vector<double> v(9);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 3.0 - 0.5 * double(i);
    const LevelSplit s = decompose_1d_level(v, 1.0);
    for (double d : s.details) CHECK(d == doctest::Approx(0.0));
    for (std::size_t i = 0; i < s.coarse.size(); ++i) CHECK(s.coarse[i] == doctest::Approx(v[2 * i]));
  }
  CHECK_THROWS_AS(decompose_1d_level(std::vector<double>{1, 2}, 1.0), InvalidInput);
}

TEST_CASE("mass solve and load transfer match dense operators") {
  const std::size_t n = 17;
  const Field f = random_field({n}, 9);
  const std::vector<double> v(f.values().begin(), f.values().end());
  const std::vector<double> load = detail::transfer_axis(v, Shape{n}, 0, 0.5);
  for (std::size_t i = 0; i < load.size(); ++i) {
    std::vector<double> ci(n), fv(v);
    for (std::size_t x = 0; x < n; ++x) ci[x] = hat(long(x), long(2 * i), 2);
    CHECK(load[i] == doctest::Approx(integrate(ci, fv, 0.5)).epsilon(1e-12));
  }
  // M x for a known x, then solve back.
  const std::size_t nc = 9;
  std::vector<double> x(nc), b(nc, 0.0);
  for (std::size_t i = 0; i < nc; ++i) x[i] = std::sin(double(i));
  const double h = 2.0;
  for (std::size_t i = 0; i < nc; ++i) {
    const bool end = i == 0 || i + 1 == nc;
    b[i] = (end ? h / 3 : 2 * h / 3) * x[i];
    if (i > 0) b[i] += h / 6 * x[i - 1];
    if (i + 1 < nc) b[i] += h / 6 * x[i + 1];
  }
  detail::mass_solve_axis(b, Shape{nc}, 0, h);
  for (std::size_t i = 0; i < nc; ++i) CHECK(b[i] == doctest::Approx(x[i]).epsilon(1e-12));
}

TEST_CASE("multilinear fields have no detail coefficients") {
  const Shape dims{9, 5, 17};
  std::vector<double> v(element_count(dims));
  const Shape st = strides_of(dims);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = double(i / st[0]), y = double(i % st[0] / st[1]), z = double(i % st[1]);
    v[i] = 1.0 + 0.5 * x - y + 0.25 * z + 0.1 * x * y * z;
  }
  const CoeffPyramid p = decompose(Field(dims, v));
  const auto levels = p.hierarchy().level_map();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (levels[i] == 0) CHECK(p[i] == doctest::Approx(v[i]));
    else CHECK(std::abs(p[i]) < 1e-12);
  }
}

TEST_CASE("recompose inverts decompose") {
  for (const Shape& dims : {Shape{65}, Shape{17, 33}, Shape{9, 9, 17}}) {
    const Field f = random_field(dims, 77);
    const Field back = recompose(decompose(f));
    REQUIRE(back.dims() == dims);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(back[i] == doctest::Approx(f[i]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(decompose(random_field({6}, 1)), InvalidInput);
}

TEST_CASE("impulse response is the recomposed unit coefficient") {
  const Shape dims{17, 17};
  const GridHierarchy h(dims);
  const Shape node{5, 8};
  const int level = h.level_of(node);
  const Field k = impulse_response(dims, level, node);
  std::vector<double> c(element_count(dims), 0.0);
  c[5 * 17 + 8] = 1.0;
  const Field ref = recompose(CoeffPyramid(h, c));
  for (std::size_t i = 0; i < ref.size(); ++i) CHECK(k[i] == doctest::Approx(ref[i]).epsilon(1e-14));
  CHECK_THROWS(impulse_response(dims, level + 1, node));
}
