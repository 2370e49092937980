#include <cmath>
#include <complex>

#include "degenmix/fft.hpp"
#include "degenmix/rng.hpp"
#include "degenmix/stats.hpp"
#include "degenmix/util.hpp"
#include "doctest.h"

using namespace degenmix;
using Complex = std::complex<double>;

TEST_CASE("fft round trip and delta spectrum") {
  Fft fft(16);
  std::vector<Complex> x(16), orig;
  RngKey key = RngKey::root(7);
  for (int i = 0; i < 16; ++i) x[static_cast<std::size_t>(i)] = {key.sym(2 * i), key.sym(2 * i + 1)};
  orig = x;
  fft.forward(x.data());
  fft.inverse(x.data());
  for (int i = 0; i < 16; ++i) CHECK(std::abs(x[static_cast<std::size_t>(i)] - orig[static_cast<std::size_t>(i)]) < 1e-13);

  // e^{2pi i 3 j / 16} concentrates on bin 3 under the forward transform sign convention.
  for (int i = 0; i < 16; ++i) {
    double ang = 2.0 * M_PI * 3.0 * i / 16.0;
    x[static_cast<std::size_t>(i)] = {std::cos(ang), std::sin(ang)};
  }
  fft.forward(x.data());
  CHECK(std::abs(x[3] - Complex(16, 0)) < 1e-12);
  for (int k = 0; k < 16; ++k)
    if (k != 3) CHECK(std::abs(x[static_cast<std::size_t>(k)]) < 1e-12);
}

TEST_CASE("fftnd matches nested 1d transforms on a 2d array") {
  int m = 8;
  FftNd fft2(2, static_cast<std::size_t>(m));
  Fft fft1(static_cast<std::size_t>(m));
  std::vector<Complex> a(static_cast<std::size_t>(m * m));
  RngKey key = RngKey::root(11);
  for (int i = 0; i < m * m; ++i) a[static_cast<std::size_t>(i)] = {key.sym(2 * i), key.sym(2 * i + 1)};
  std::vector<Complex> b = a;
  fft2.forward(a.data());
  for (int r = 0; r < m; ++r) fft1.forward(b.data() + r * m, 1);
  for (int c = 0; c < m; ++c) fft1.forward(b.data() + c, static_cast<std::size_t>(m));
  for (int i = 0; i < m * m; ++i) CHECK(std::abs(a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)]) < 1e-11);
}

TEST_CASE("counter rng is reproducible and stream-separated") {
  RngKey a = RngKey::root(42).sub("x").sub(3);
  RngKey b = RngKey::root(42).sub("x").sub(3);
  RngKey c = RngKey::root(42).sub("x").sub(4);
  CHECK(a.u64(17) == b.u64(17));
  CHECK(a.u64(17) != c.u64(17));
  double u = a.u53(5);
  CHECK(u >= 0.0);
  CHECK(u < 1.0);
}

TEST_CASE("xi law sampling matches the density") {
  // CDF quantile round trip and support.
  for (double u : {0.01, 0.3, 0.5, 0.77, 0.99}) {
    double x = XiLaw::quantile(u);
    CHECK(x > -1.0);
    CHECK(x < 1.0);
    CHECK(XiLaw::cdf(x) == doctest::Approx(u).epsilon(1e-12));
  }
  // Moments of rho(x) = 3/4 (1 - x^2): mean 0, variance 1/5.
  RngKey key = RngKey::root(1234);
  int n = 200000;
  double s1 = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    double x = XiLaw::sample(key, static_cast<std::uint64_t>(i));
    s1 += x;
    s2 += x * x;
  }
  CHECK(std::abs(s1 / n) < 5e-3);
  CHECK(s2 / n == doctest::Approx(0.2).epsilon(0.02));
}

TEST_CASE("line fit recovers a known slope") {
  std::vector<double> x, y;
  for (int i = 0; i < 20; ++i) {
    x.push_back(i);
    y.push_back(3.0 - 0.7 * i);
  }
  LineFit f = fit_line(x, y);
  CHECK(f.slope == doctest::Approx(-0.7).epsilon(1e-12));
  CHECK(f.intercept == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(f.slope_se < 1e-12);
}

TEST_CASE("chi-square independence accepts independent pairs") {
  RngKey key = RngKey::root(99);
  int n = 10000;
  std::vector<double> x(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    x[static_cast<std::size_t>(i)] = XiLaw::sample(key.sub("x"), static_cast<std::uint64_t>(i));
    y[static_cast<std::size_t>(i)] = XiLaw::sample(key.sub("y"), static_cast<std::uint64_t>(i));
  }
  // 4x4 grid: 9 dof; 1% critical value 21.666.
  CHECK(chi2_independence(x, y, 4) < 21.666);
  // Strongly dependent pairs must reject.
  for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)];
  CHECK(chi2_independence(x, y, 4) > 21.666);
}

TEST_CASE("fmt_double round trips") {
  for (double v : {0.1, 1.0 / 3.0, 2.0, 1e-17, 123456.789, -0.0078125}) {
    double back = std::stod(fmt_double(v));
    CHECK(back == v);
  }
}
