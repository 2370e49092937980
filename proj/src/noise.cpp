#include "degenmix/noise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "degenmix/stats.hpp"
#include "degenmix/util.hpp"

namespace degenmix {

double haar_eval(int j, int l, double t) {
  if (j == 0) {
    return (t >= 0.0 && t < 1.0) ? 1.0 : 0.0;
  }
  DGM_REQUIRE(j >= 1 && j < 63, "haar_eval: level out of range");
  DGM_REQUIRE(l >= 0 && l < (1 << j), "haar_eval: shift out of range");
  double w = std::ldexp(1.0, -j);  // 2^-j, exact
  double lo = l * w;
  double mid = (l + 0.5) * w;
  double hi = (l + 1) * w;
  if (t < lo || t >= hi) return 0.0;
  return t < mid ? 1.0 : -1.0;
}

double TemporalModel::cj(int j) const {
  DGM_REQUIRE(j >= 1, "cj: j >= 1");
  switch (kind) {
    case TemporalKind::HaarExp:
      return std::pow(A, -j);
    case TemporalKind::HaarAlg:
      return C * std::pow(static_cast<double>(j), -q);
    case TemporalKind::JumpShiftedHaar:
      return std::pow(A, -j);
  }
  return 0.0;
}

double NoiseSpec::cj_sum() const {
  double s = 0;
  for (int j = 1; j <= j_max; ++j) s += temporal.cj(j);
  return s;
}

double NoiseSpec::sup_bound() const {
  double cs = cj_sum();
  double s = 0;
  for (const auto& ch : channels) s += std::abs(ch.b) * (1.0 + cs);
  return s;
}

SpectralField NoiseSpec::phi(int i) const {
  const NoiseChannel& ch = channels[static_cast<std::size_t>(i)];
  SpectralField f = (kind == FieldKind::DivFree2D)
                        ? ns_basis_field(torus, cutoff, ch.l)
                        : cgl_basis_field(torus, cutoff, ch.l, ch.imaginary);
  double n = hnorm(f);
  DGM_REQUIRE(n > 0, "NoiseSpec::phi: degenerate basis field");
  f *= 1.0 / n;
  return f;
}

void NoiseSpec::validate() const {
  DGM_REQUIRE(!channels.empty(), "NoiseSpec: no channels");
  DGM_REQUIRE(j_max >= 0 && j_max <= 24, "NoiseSpec: j_max out of range");
  for (const auto& ch : channels) DGM_REQUIRE(ch.b != 0.0, "NoiseSpec: b_i must be nonzero");
  switch (temporal.kind) {
    case TemporalKind::HaarExp:
      DGM_REQUIRE(temporal.A > 1.0, "NoiseSpec: haar_exp requires A > 1");
      break;
    case TemporalKind::HaarAlg:
      DGM_REQUIRE(temporal.C > 0.0 && temporal.q > 1.0, "NoiseSpec: haar_alg requires C>0, q>1");
      break;
    case TemporalKind::JumpShiftedHaar:
      DGM_REQUIRE(temporal.A > 1.0, "NoiseSpec: jump model requires A > 1");
      DGM_REQUIRE(temporal.shifts.size() == channels.size(),
                  "NoiseSpec: jump model needs one shift per channel");
      break;
  }
  if (kind == FieldKind::DivFree2D)
    for (const auto& ch : channels) DGM_REQUIRE(!ch.l.is_zero(), "NoiseSpec: NS channel l != 0");
}

namespace {

// Coefficient slots per channel: 0 -> xi_0, 2^j + l -> xi_{jl}.
std::uint64_t xi_counter(int j, int l) {
  if (j == 0) return 0;
  return (std::uint64_t(1) << j) + static_cast<std::uint64_t>(l);
}

double xi_draw(const NoiseSpec& spec, RngKey stream, int i, int j, int l) {
  std::uint64_t cap = std::uint64_t(1) << (spec.j_max + 1);
  std::uint64_t ctr = static_cast<std::uint64_t>(i) * cap + xi_counter(j, l);
  return XiLaw::sample(stream, ctr);
}

// Coefficient form of the jump of the scalar channel at the level-j
// midpoint tau^j_l, truncated at j_max. The Haar branch table (left half
// +1, right half -1) gives
//   Delta = -2 c_j xi_{jl} + sum_r c_{j+r} (xi_{j+r, m} + xi_{j+r, m-1}),
// m = (2l+1) 2^{r-1}. Accumulation runs level by level, matching the
// evaluator limit route bit for bit.
double jump_coefficient_form(const NoiseSpec& spec, RngKey stream, int i, int j, int l) {
  double acc = -2.0 * (spec.temporal.cj(j) * xi_draw(spec, stream, i, j, l));
  for (int r = 1; j + r <= spec.j_max; ++r) {
    int m = (2 * l + 1) << (r - 1);
    double c = spec.temporal.cj(j + r);
    acc += c * xi_draw(spec, stream, i, j + r, m) + c * xi_draw(spec, stream, i, j + r, m - 1);
  }
  return acc;
}

double wrap01(double t) { return t - std::floor(t); }

}  // namespace

NoisePath::NoisePath(const NoiseSpec* spec, RngKey stream) : spec_(spec), stream_(stream) {
  spec_->validate();
  materialize();
}

double NoisePath::xi(int i, int j, int l) const { return xi_draw(*spec_, stream_, i, j, l); }

void NoisePath::materialize() {
  int n = spec_->n_channels();
  int cells = n_cells();
  double w = std::ldexp(1.0, -(spec_->j_max + 1));
  cells_.assign(static_cast<std::size_t>(n),
                std::vector<double>(static_cast<std::size_t>(cells), 0.0));
  prefix_.assign(static_cast<std::size_t>(n),
                 std::vector<double>(static_cast<std::size_t>(cells) + 1, 0.0));
  for (int i = 0; i < n; ++i) {
    auto& cv = cells_[static_cast<std::size_t>(i)];
    double x0 = xi(i, 0, 0);
    for (int k = 0; k < cells; ++k) cv[static_cast<std::size_t>(k)] = x0;
    for (int j = 1; j <= spec_->j_max; ++j) {
      double cj = spec_->temporal.cj(j);
      int half = 1 << (spec_->j_max - j);  // cells per half-support of h_{jl}
      for (int l = 0; l < (1 << j); ++l) {
        double v = cj * xi(i, j, l);
        int base = l * 2 * half;
        for (int k = 0; k < half; ++k) cv[static_cast<std::size_t>(base + k)] += v;
        for (int k = 0; k < half; ++k) cv[static_cast<std::size_t>(base + half + k)] -= v;
      }
    }
    auto& pf = prefix_[static_cast<std::size_t>(i)];
    for (int k = 0; k < cells; ++k)
      pf[static_cast<std::size_t>(k) + 1] =
          pf[static_cast<std::size_t>(k)] + cv[static_cast<std::size_t>(k)] * w;
  }
}

double NoisePath::scalar(int i, double t) const {
  if (spec_->temporal.kind == TemporalKind::JumpShiftedHaar)
    t = wrap01(t - spec_->temporal.shifts[static_cast<std::size_t>(i)]);
  if (t < 0.0 || t >= 1.0) return 0.0;
  int cells = n_cells();
  int k = std::min(cells - 1, static_cast<int>(t * cells));
  return cells_[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
}

double NoisePath::scalar_integral_base(int i, double t0, double t1) const {
  const auto& pf = prefix_[static_cast<std::size_t>(i)];
  const auto& cv = cells_[static_cast<std::size_t>(i)];
  int cells = n_cells();
  double w = std::ldexp(1.0, -(spec_->j_max + 1));
  auto value_at = [&](double t) {
    double x = t * cells;
    int k = std::min(cells - 1, std::max(0, static_cast<int>(x)));
    return pf[static_cast<std::size_t>(k)] + cv[static_cast<std::size_t>(k)] * (t - k * w);
  };
  return value_at(t1) - value_at(t0);
}

double NoisePath::scalar_integral(int i, double t0, double t1) const {
  DGM_REQUIRE(t1 >= t0, "scalar_integral: reversed interval");
  if (spec_->temporal.kind == TemporalKind::JumpShiftedHaar) {
    double s = spec_->temporal.shifts[static_cast<std::size_t>(i)];
    double a = t0 - s, b = t1 - s;
    double fa = std::floor(a);
    a -= fa;
    b -= fa;
    double total = 0.0;
    while (b > 1e-15) {
      double hi = std::min(b, 1.0);
      if (a < 1.0) total += scalar_integral_base(i, std::max(a, 0.0), hi);
      a -= 1.0;
      b -= 1.0;
    }
    return total;
  }
  return scalar_integral_base(i, std::clamp(t0, 0.0, 1.0), std::clamp(t1, 0.0, 1.0));
}

double NoisePath::scalar_jump(int i, double t) const {
  if (spec_->temporal.kind == TemporalKind::JumpShiftedHaar)
    t = wrap01(t - spec_->temporal.shifts[static_cast<std::size_t>(i)]);
  double acc = 0.0;
  // h0 has no interior jump; each level contributes its own one-sided limit
  // difference, and untouched levels contribute an exact zero.
  double w_fine = std::ldexp(1.0, -(spec_->j_max + 2));
  double tl = t - w_fine;
  for (int j = 1; j <= spec_->j_max; ++j) {
    double cj = spec_->temporal.cj(j);
    double scale = std::ldexp(1.0, j);
    int lr = static_cast<int>(std::floor(t * scale));
    int ll = static_cast<int>(std::floor(tl * scale));
    double right = (lr >= 0 && lr < (1 << j)) ? cj * xi(i, j, lr) * haar_eval(j, lr, t) : 0.0;
    double left = (ll >= 0 && ll < (1 << j)) ? cj * xi(i, j, ll) * haar_eval(j, ll, tl) : 0.0;
    acc += right - left;
  }
  return acc;
}

SpectralField NoisePath::eval(double t) const {
  SpectralField f(spec_->kind, spec_->torus, spec_->cutoff);
  for (int i = 0; i < spec_->n_channels(); ++i) {
    double v = spec_->channels[static_cast<std::size_t>(i)].b * scalar(i, t);
    f.add_scaled(spec_->phi(i), v);
  }
  return f;
}

std::vector<double> NoisePath::channel_averages(double t0, double t1) const {
  std::vector<double> out(static_cast<std::size_t>(spec_->n_channels()), 0.0);
  double len = t1 - t0;
  DGM_REQUIRE(len > 0, "channel_averages: empty interval");
  for (int i = 0; i < spec_->n_channels(); ++i)
    out[static_cast<std::size_t>(i)] =
        spec_->channels[static_cast<std::size_t>(i)].b * scalar_integral(i, t0, t1) / len;
  return out;
}

double NoisePath::sup_norm() const {
  int cells = n_cells();
  double worst = 0.0;
  for (int k = 0; k < cells; ++k) {
    double s = 0.0;
    for (int i = 0; i < spec_->n_channels(); ++i) {
      double v = spec_->channels[static_cast<std::size_t>(i)].b *
                 cells_[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
      s += v * v;  // spatial channels are orthonormal in H
    }
    worst = std::max(worst, std::sqrt(s));
  }
  return worst;
}

std::optional<std::pair<int, int>> jump_level(double s, double eps, int n, int j_cap) {
  for (int j = 1; j <= j_cap; ++j) {
    double scale = std::ldexp(1.0, j);
    int l_first = static_cast<int>(std::ceil((s - eps) * scale - 0.5));
    l_first = std::max(l_first, 0);
    int l_last = l_first + n - 1;
    if (l_last > (1 << j) - 1) continue;
    double first_mid = (l_first + 0.5) / scale;
    double last_mid = (l_last + 0.5) / scale;
    if (first_mid >= s - eps && last_mid <= s + eps) return std::make_pair(j, l_first - 1);
  }
  return std::nullopt;
}

JumpMatrix jump_matrix(const NoisePath& path, double s, double eps, int n) {
  const auto& spec = path.spec();
  DGM_REQUIRE(spec.temporal.shares_dyadic_jumps(),
              "jump_matrix: requires a Haar model with shared dyadic jump points");
  DGM_REQUIRE(n >= 1 && n <= spec.n_channels(), "jump_matrix: N out of range");
  auto sel = jump_level(s, eps, n, spec.j_max);
  DGM_REQUIRE(sel.has_value(), "jump_matrix: eps too small for available dyadic levels");
  auto [j, l0] = *sel;
  JumpMatrix out;
  out.s = s;
  out.eps = eps;
  out.level = j;
  out.l0 = l0;
  out.entries.resize(n, n);
  for (int i = 0; i < n; ++i) {
    double b = spec.channels[static_cast<std::size_t>(i)].b;
    for (int m = 1; m <= n; ++m)
      out.entries(i, m - 1) = b * jump_coefficient_form(spec, path.stream(), i, j, l0 + m);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(out.entries);
  double smin = svd.singularValues()(n - 1);
  out.det = out.entries.determinant();
  if (smin <= 0.0 || !std::isfinite(1.0 / smin)) {
    out.singular = true;
    out.inv_norm = std::numeric_limits<double>::infinity();
  } else {
    out.inv_norm = 1.0 / smin;
  }
  return out;
}

ObservabilityReport observability_statistic(const NoiseSpec& spec, int n_samples, double s,
                                            const std::vector<double>& eps_grid, RngKey key) {
  spec.validate();
  DGM_REQUIRE(spec.temporal.shares_dyadic_jumps(),
              "observability_statistic: Haar models only");
  int n = spec.n_channels();
  ObservabilityReport rep;
  std::vector<double> log_inv_med, log_inv_q95, log_inv_eps;
  for (std::size_t e = 0; e < eps_grid.size(); ++e) {
    double eps = eps_grid[e];
    auto sel = jump_level(s, eps, n, spec.j_max);
    DGM_REQUIRE(sel.has_value(), "observability_statistic: eps too small for j_max");
    auto [j, l0] = *sel;
    std::vector<double> inv_norms;
    inv_norms.reserve(static_cast<std::size_t>(n_samples));
    int singular = 0;
    Eigen::MatrixXd mat(n, n);
    for (int k = 0; k < n_samples; ++k) {
      RngKey stream = key.sub("obs").sub(e).sub(static_cast<std::uint64_t>(k));
      for (int i = 0; i < n; ++i) {
        double b = spec.channels[static_cast<std::size_t>(i)].b;
        for (int m = 1; m <= n; ++m)
          mat(i, m - 1) = b * jump_coefficient_form(spec, stream, i, j, l0 + m);
      }
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(mat);
      double smin = svd.singularValues()(n - 1);
      if (smin <= 1e-300) {
        ++singular;
      } else {
        inv_norms.push_back(1.0 / smin);
      }
    }
    ObservabilityRow row;
    row.eps = eps;
    row.level = j;
    row.singular_rate = static_cast<double>(singular) / n_samples;
    row.median_inv_norm = inv_norms.empty() ? 0.0 : quantile(inv_norms, 0.5);
    row.q95_inv_norm = inv_norms.empty() ? 0.0 : quantile(inv_norms, 0.95);
    rep.rows.push_back(row);
    if (!inv_norms.empty()) {
      log_inv_eps.push_back(std::log(1.0 / eps));
      log_inv_med.push_back(std::log(row.median_inv_norm));
      log_inv_q95.push_back(std::log(row.q95_inv_norm));
    }
  }
  rep.theta_median = fit_line(log_inv_eps, log_inv_med).slope;
  rep.theta_q95 = fit_line(log_inv_eps, log_inv_q95).slope;
  rep.pass = rep.theta_q95 < 1.0;
  return rep;
}

std::vector<SmallBallFit> small_ball_curve(const NoiseSpec& spec, const std::vector<int>& j_list,
                                           int n_samples, RngKey key) {
  spec.validate();
  DGM_REQUIRE(spec.temporal.shares_dyadic_jumps(), "small_ball_curve: Haar models only");
  int n = spec.n_channels();
  std::vector<SmallBallFit> fits;
  for (std::size_t jj = 0; jj < j_list.size(); ++jj) {
    int j = j_list[jj];
    DGM_REQUIRE(j >= 1 && j <= spec.j_max, "small_ball_curve: level outside [1, j_max]");
    DGM_REQUIRE(n <= (1 << j), "small_ball_curve: too few midpoints at level j");
    std::vector<double> dets(static_cast<std::size_t>(n_samples));
    double cj = spec.temporal.cj(j);
    Eigen::MatrixXd zeta(n, n);
    for (int k = 0; k < n_samples; ++k) {
      RngKey stream = key.sub("smallball").sub(jj).sub(static_cast<std::uint64_t>(k));
      for (int i = 0; i < n; ++i)
        for (int m = 0; m < n; ++m)
          zeta(i, m) = jump_coefficient_form(spec, stream, i, j, m) / cj;
      dets[static_cast<std::size_t>(k)] = std::abs(zeta.determinant());
    }
    SmallBallFit fit;
    fit.level = j;
    std::vector<double> logs_r, logs_p;
    for (double p : {0.002, 0.004, 0.008, 0.016, 0.032, 0.064}) {
      double r = quantile(dets, p);
      if (r <= 0) continue;
      fit.r.push_back(r);
      fit.p.push_back(p);
      logs_r.push_back(std::log(r));
      logs_p.push_back(std::log(p));
    }
    DGM_REQUIRE(logs_r.size() >= 3, "small_ball_curve: degenerate determinant sample");
    LineFit lf = fit_line(logs_r, logs_p);
    fit.c_hat = lf.slope;
    fit.c_ci_lo = lf.slope - lf.slope_ci_half();
    fit.c_ci_hi = lf.slope + lf.slope_ci_half();
    fits.push_back(std::move(fit));
  }
  return fits;
}

}  // namespace degenmix
