#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "degenmix/rng.hpp"

namespace degenmix {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;  // OLS standard error of the slope
  int n = 0;

  double slope_ci_half(double z = 1.959963984540054) const { return z * slope_se; }
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_line: bad sizes");
  int n = static_cast<int>(x.size());
  double sx = 0, sy = 0;
  for (int i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
  }
  double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0) throw std::invalid_argument("fit_line: degenerate abscissae");
  LineFit f;
  f.n = n;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0;
  for (int i = 0; i < n; ++i) {
    double r = y[i] - (f.intercept + f.slope * x[i]);
    rss += r * r;
  }
  f.slope_se = (n > 2) ? std::sqrt(rss / (n - 2) / sxx) : 0.0;
  return f;
}

// Empirical quantile (linear interpolation on the sorted sample).
inline double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw std::invalid_argument("quantile: empty sample");
  std::sort(v.begin(), v.end());
  double pos = p * (static_cast<double>(v.size()) - 1.0);
  std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= v.size()) return v.back();
  double w = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - w) + v[lo + 1] * w;
}

inline double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

struct BootstrapCi {
  double lo = 0.0;
  double hi = 0.0;
};

// Percentile bootstrap for a statistic of a scalar sample.
template <typename Stat>
BootstrapCi bootstrap_ci(const std::vector<double>& sample, Stat stat, int reps, RngKey key,
                         double level = 0.95) {
  std::vector<double> stats(reps);
  std::vector<double> resample(sample.size());
  std::uint64_t ctr = 0;
  for (int r = 0; r < reps; ++r) {
    for (std::size_t i = 0; i < sample.size(); ++i)
      resample[i] = sample[key.below(sample.size(), ctr++)];
    stats[r] = stat(resample);
  }
  double alpha = 1.0 - level;
  return {quantile(stats, alpha / 2), quantile(stats, 1.0 - alpha / 2)};
}

// Energy distance between two samples of R^d points (rows, flattened).
// D^2 = 2 E|X-Y| - E|X-X'| - E|Y-Y'|.
inline double energy_distance(const std::vector<std::vector<double>>& a,
                              const std::vector<std::vector<double>>& b) {
  auto dist = [](const std::vector<double>& x, const std::vector<double>& y) {
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
    return std::sqrt(s);
  };
  double ab = 0, aa = 0, bb = 0;
  for (const auto& x : a)
    for (const auto& y : b) ab += dist(x, y);
  for (const auto& x : a)
    for (const auto& y : a) aa += dist(x, y);
  for (const auto& x : b)
    for (const auto& y : b) bb += dist(x, y);
  double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  double d2 = 2.0 * ab / (na * nb) - aa / (na * na) - bb / (nb * nb);
  return d2 > 0 ? std::sqrt(d2) : 0.0;
}

// Permutation two-sample test on the energy-distance statistic.
// Returns the p-value estimate.
inline double energy_test_pvalue(const std::vector<std::vector<double>>& a,
                                 const std::vector<std::vector<double>>& b, int n_perm,
                                 RngKey key) {
  double observed = energy_distance(a, b);
  std::vector<std::vector<double>> pool = a;
  pool.insert(pool.end(), b.begin(), b.end());
  int exceed = 0;
  std::uint64_t ctr = 0;
  for (int p = 0; p < n_perm; ++p) {
    std::vector<std::vector<double>> perm = pool;
    for (std::size_t i = perm.size(); i > 1; --i)
      std::swap(perm[i - 1], perm[key.below(i, ctr++)]);
    std::vector<std::vector<double>> pa(perm.begin(), perm.begin() + a.size());
    std::vector<std::vector<double>> pb(perm.begin() + a.size(), perm.end());
    if (energy_distance(pa, pb) >= observed) ++exceed;
  }
  return (exceed + 1.0) / (n_perm + 1.0);
}

// Pearson chi-square independence test for two scalar samples on a
// k x k grid of equiprobable bins. Returns the test statistic; the
// caller compares against the chi-square quantile for (k-1)^2 dof.
inline double chi2_independence(const std::vector<double>& x, const std::vector<double>& y,
                                int k) {
  if (x.size() != y.size() || x.empty()) throw std::invalid_argument("chi2: bad sizes");
  auto edges = [&](const std::vector<double>& v) {
    std::vector<double> e(k - 1);
    for (int i = 1; i < k; ++i) e[i - 1] = quantile(v, static_cast<double>(i) / k);
    return e;
  };
  auto ex = edges(x), ey = edges(y);
  auto bin = [&](double v, const std::vector<double>& e) {
    int b = 0;
    while (b < k - 1 && v > e[b]) ++b;
    return b;
  };
  std::vector<double> counts(static_cast<std::size_t>(k) * k, 0.0);
  std::vector<double> rx(k, 0.0), ry(k, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    int bx = bin(x[i], ex), by = bin(y[i], ey);
    counts[static_cast<std::size_t>(bx) * k + by] += 1;
    rx[bx] += 1;
    ry[by] += 1;
  }
  double n = static_cast<double>(x.size());
  double stat = 0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      double expect = rx[i] * ry[j] / n;
      if (expect > 0) {
        double d = counts[static_cast<std::size_t>(i) * k + j] - expect;
        stat += d * d / expect;
      }
    }
  return stat;
}

}  // namespace degenmix
