#include "degenmix/saturation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "degenmix/util.hpp"

namespace degenmix {

Rational::Rational(long long n, long long d) : num(n), den(d) {
  DGM_REQUIRE(d != 0, "Rational: zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  long long g = std::gcd(std::llabs(num), den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
}

Rational Rational::operator+(const Rational& o) const {
  return Rational(num * o.den + o.num * den, den * o.den);
}
Rational Rational::operator-(const Rational& o) const {
  return Rational(num * o.den - o.num * den, den * o.den);
}
Rational Rational::operator*(const Rational& o) const { return Rational(num * o.num, den * o.den); }
Rational Rational::operator/(const Rational& o) const {
  DGM_REQUIRE(o.num != 0, "Rational: division by zero");
  return Rational(num * o.den, den * o.num);
}

std::optional<Rational> rationalize(double x, long long max_den, double tol) {
  long long p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  double v = x;
  for (int it = 0; it < 64; ++it) {
    double fl = std::floor(v);
    long long a = static_cast<long long>(fl);
    long long p2 = a * p1 + p0;
    long long q2 = a * q1 + q0;
    if (q2 > max_den) break;
    p0 = p1;
    q0 = q1;
    p1 = p2;
    q1 = q2;
    if (std::abs(static_cast<double>(p1) / static_cast<double>(q1) - x) < tol)
      return Rational(p1, q1);
    double frac = v - fl;
    if (frac < 1e-15) break;
    v = 1.0 / frac;
  }
  if (q1 != 0 && std::abs(static_cast<double>(p1) / static_cast<double>(q1) - x) < tol)
    return Rational(p1, q1);
  return std::nullopt;
}

bool ModeSet::symmetric() const {
  for (const auto& v : elems)
    if (!contains(-v)) return false;
  return true;
}

bool ModeSet::contains(const WaveVector& v) const {
  return std::find(elems.begin(), elems.end(), v) != elems.end();
}

std::vector<long long> smith_diagonal(std::vector<std::array<long long, 3>> rows, int dims) {
  int n = static_cast<int>(rows.size());
  std::vector<long long> diag;
  int r0 = 0, c0 = 0;
  while (r0 < n && c0 < dims) {
    // Find the smallest nonzero pivot in the active block.
    int pr = -1, pc = -1;
    long long best = 0;
    for (int i = r0; i < n; ++i)
      for (int j = c0; j < dims; ++j) {
        long long v = std::llabs(rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
        if (v != 0 && (best == 0 || v < best)) {
          best = v;
          pr = i;
          pc = j;
        }
      }
    if (pr < 0) break;  // all-zero block
    std::swap(rows[static_cast<std::size_t>(r0)], rows[static_cast<std::size_t>(pr)]);
    for (int i = 0; i < n; ++i) std::swap(rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c0)],
                                          rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(pc)]);
    long long p = rows[static_cast<std::size_t>(r0)][static_cast<std::size_t>(c0)];
    bool clean = true;
    for (int i = r0 + 1; i < n; ++i) {
      long long q = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c0)] / p;
      if (q != 0)
        for (int j = c0; j < dims; ++j)
          rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] -=
              q * rows[static_cast<std::size_t>(r0)][static_cast<std::size_t>(j)];
      if (rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c0)] != 0) clean = false;
    }
    for (int j = c0 + 1; j < dims; ++j) {
      long long q = rows[static_cast<std::size_t>(r0)][static_cast<std::size_t>(j)] / p;
      if (q != 0)
        for (int i = r0; i < n; ++i)
          rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] -=
              q * rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c0)];
      if (rows[static_cast<std::size_t>(r0)][static_cast<std::size_t>(j)] != 0) clean = false;
    }
    if (!clean) continue;  // remainders became new smaller pivots
    diag.push_back(std::llabs(p));
    ++r0;
    ++c0;
  }
  return diag;
}

bool is_generator(const ModeSet& set) {
  DGM_REQUIRE(!set.elems.empty(), "is_generator: empty set");
  std::vector<std::array<long long, 3>> rows;
  for (const auto& v : set.elems)
    rows.push_back({static_cast<long long>(v[0]), static_cast<long long>(v[1]),
                    static_cast<long long>(v[2])});
  auto diag = smith_diagonal(std::move(rows), set.dims);
  if (static_cast<int>(diag.size()) < set.dims) return false;
  for (long long d : diag)
    if (d != 1) return false;
  return true;
}

namespace {

// <x,y>_a = sum x_i y_i / a_i and |l^{perp_a}|^2 = l1^2/a1^2 + l2^2/a2^2
// in exact arithmetic.
Rational perp_norm2(const std::array<Rational, 2>& a, const WaveVector& l) {
  Rational t0 = Rational(l[0]) / a[0];
  Rational t1 = Rational(l[1]) / a[1];
  return t0 * t0 + t1 * t1;
}

Rational dot_a_perp(const std::array<Rational, 2>& a, const WaveVector& l, const WaveVector& r) {
  // <l^{perp_a}, r>_a with l^{perp_a} = (-l2/a2, l1/a1).
  Rational p0 = Rational(-l[1]) / a[1];
  Rational p1 = Rational(l[0]) / a[0];
  return p0 * Rational(r[0]) / a[0] + p1 * Rational(r[1]) / a[1];
}

bool parallel2(const WaveVector& l, const WaveVector& r) {
  return static_cast<long long>(l[0]) * r[1] - static_cast<long long>(l[1]) * r[0] == 0;
}

}  // namespace

Rational interaction_coefficient(const std::array<Rational, 2>& a, const WaveVector& l,
                                 const WaveVector& r) {
  WaveVector diff = l - r;
  DGM_REQUIRE(!diff.is_zero(), "interaction_coefficient: l = r");
  Rational denom = perp_norm2(a, diff);
  Rational factor = perp_norm2(a, l) - perp_norm2(a, r);
  return dot_a_perp(a, l, r) * factor / denom;
}

double interaction_coefficient(const TorusSpec& torus, const WaveVector& l, const WaveVector& r) {
  auto a0 = rationalize(torus.a[0]);
  auto a1 = rationalize(torus.a[1]);
  if (a0 && a1) return interaction_coefficient({*a0, *a1}, l, r).to_double();
  WaveVector diff = l - r;
  DGM_REQUIRE(!diff.is_zero(), "interaction_coefficient: l = r");
  auto pl = perp_a(torus, l);
  auto pr = perp_a(torus, r);
  auto pd = perp_a(torus, diff);
  double dot = pl[0] * r[0] / torus.a[0] + pl[1] * r[1] / torus.a[1];
  double nl = pl[0] * pl[0] + pl[1] * pl[1];
  double nr = pr[0] * pr[0] + pr[1] * pr[1];
  double nd = pd[0] * pd[0] + pd[1] * pd[1];
  return dot * (nl - nr) / nd;
}

SaturationResult saturate_ns(const TorusSpec& torus, const ModeSet& set, int window) {
  DGM_REQUIRE(set.dims == 2, "saturate_ns: 2D mode sets");
  DGM_REQUIRE(set.symmetric(), "saturate_ns: mode set must be symmetric");
  for (const auto& v : set.elems) DGM_REQUIRE(!v.is_zero(), "saturate_ns: l = 0 not allowed");

  SaturationResult res;
  auto ra0 = rationalize(torus.a[0]);
  auto ra1 = rationalize(torus.a[1]);
  res.used_rational = ra0.has_value() && ra1.has_value();

  auto norm2_d = [&](const WaveVector& l) {
    auto p = perp_a(torus, l);
    return p[0] * p[0] + p[1] * p[1];
  };
  auto norms_differ = [&](const WaveVector& l, const WaveVector& r) {
    if (res.used_rational) return perp_norm2({*ra0, *ra1}, l) != perp_norm2({*ra0, *ra1}, r);
    double nl = norm2_d(l), nr = norm2_d(r);
    double rel = std::abs(nl - nr) / std::max(1.0, std::max(nl, nr));
    if (rel > 1e-12 && rel < 1e-6) res.near_tie_warning = true;
    return rel > 1e-9;
  };

  // Closed form: generator with a non-parallel pair of distinct norms.
  bool pair_ok = false;
  for (std::size_t i = 0; i < set.elems.size() && !pair_ok; ++i)
    for (std::size_t j = i + 1; j < set.elems.size() && !pair_ok; ++j) {
      const auto& m = set.elems[i];
      const auto& n = set.elems[j];
      if (!parallel2(m, n) && norms_differ(m, n)) pair_ok = true;
    }
  res.verdict = pair_ok && is_generator(set);

  // Windowed interaction recursion from Eq-level combination rules.
  std::set<WaveVector> cov(set.elems.begin(), set.elems.end());
  res.coverage.push_back(cov);
  bool grew = true;
  while (grew) {
    grew = false;
    std::set<WaveVector> next = cov;
    for (const auto& l : cov)
      for (const auto& r : set.elems) {
        if (parallel2(l, r) || !norms_differ(l, r)) continue;
        WaveVector sum = l + r;
        if (!sum.is_zero() && std::abs(sum[0]) <= window && std::abs(sum[1]) <= window)
          next.insert(sum);
      }
    if (next.size() != cov.size()) {
      grew = true;
      cov = std::move(next);
      res.coverage.push_back(cov);
    }
    ++res.iterations;
    DGM_REQUIRE(res.iterations < 4096, "saturate_ns: runaway recursion");
  }
  std::size_t full = static_cast<std::size_t>(2 * window + 1) * static_cast<std::size_t>(2 * window + 1) - 1;
  res.window_full = cov.size() == full;
  res.agrees = res.window_full == res.verdict;
  return res;
}

SaturationResult saturate_cgl(const ModeSet& set, int window) {
  DGM_REQUIRE(set.dims == 3, "saturate_cgl: 3D mode sets");
  DGM_REQUIRE(set.symmetric(), "saturate_cgl: mode set must be symmetric");
  DGM_REQUIRE(set.contains(WaveVector(0, 0, 0)),
              "saturate_cgl: the constant mode (l = 0) is required");

  SaturationResult res;
  res.verdict = is_generator(set);

  std::set<WaveVector> cov(set.elems.begin(), set.elems.end());
  res.coverage.push_back(cov);
  bool grew = true;
  while (grew) {
    grew = false;
    std::set<WaveVector> next = cov;
    for (const auto& l : cov)
      for (const auto& r : set.elems)
        for (const WaveVector& cand : {l + r, l - r}) {
          if (std::abs(cand[0]) <= window && std::abs(cand[1]) <= window &&
              std::abs(cand[2]) <= window)
            next.insert(cand);
        }
    if (next.size() != cov.size()) {
      grew = true;
      cov = std::move(next);
      res.coverage.push_back(cov);
    }
    ++res.iterations;
    DGM_REQUIRE(res.iterations < 4096, "saturate_cgl: runaway recursion");
  }
  std::size_t side = static_cast<std::size_t>(2 * window + 1);
  res.window_full = cov.size() == side * side * side;
  res.agrees = res.window_full == res.verdict;
  return res;
}

}  // namespace degenmix
