#include "degenmix/coupling.hpp"

#include <cmath>
#include <map>

#include "degenmix/stats.hpp"
#include "degenmix/util.hpp"

namespace degenmix {

int CouplingConfig::levels_n() const {
  int n = 1;
  double bn = b();
  while (bn * R > 0.5 * d) {
    bn *= b();
    ++n;
    DGM_REQUIRE(n < 10000, "CouplingConfig: N runaway (d too small or b ~ 1)");
  }
  return n;
}

double CouplingConfig::eps_weight() const {
  int n = levels_n();
  double bb = big_b();
  return std::pow(bb, -n) * std::pow(d, 0.5 * gamma) * std::min(p / (1.0 - p), bb);
}

double CouplingConfig::m_k(int k) const {
  int n = levels_n();
  DGM_REQUIRE(k >= -n && k <= -1, "CouplingConfig::m_k: k outside [-N,-1]");
  double bb = big_b();
  return 2.0 * std::pow(d, 0.5 * gamma) +
         eps_weight() * (std::pow(bb, n - 1) - std::pow(bb, n + k));
}

void CouplingConfig::validate() const {
  DGM_REQUIRE(d > 0 && R > 0, "CouplingConfig: d, R positive");
  DGM_REQUIRE(q > 0 && q <= 0.5, "CouplingConfig: q in (0, 1/2]");
  DGM_REQUIRE(a > 0 && a < 1, "CouplingConfig: a in (0,1)");
  DGM_REQUIRE(gamma > 0 && gamma <= 1, "CouplingConfig: gamma in (0,1]");
  DGM_REQUIRE(p > 0 && p < 1, "CouplingConfig: p in (0,1)");
  double qg = std::pow(q, 0.5 * gamma);
  DGM_REQUIRE(qg + nu / qg < 1, "CouplingConfig: q^{g/2} + q^{-g/2} nu must be < 1");
  DGM_REQUIRE(qg + 3 * nu < 1, "CouplingConfig: q^{g/2} + 3 nu must be < 1");
  DGM_REQUIRE(m_k(-levels_n()) <= 3 * std::pow(d, 0.5 * gamma) + 1e-12,
              "CouplingConfig: M_{-N} plateau exceeds 3 d^{g/2}");
}

PairLevel classify_pair(const SpectralField& u, const SpectralField& uprime,
                        const CouplingConfig& cfg) {
  SpectralField diff = u;
  diff -= uprime;
  double dist = delta_norm(diff, cfg.delta);
  PairLevel lvl;
  if (dist == 0.0) {
    lvl.infinite = true;
    return lvl;
  }
  if (dist <= cfg.d) {
    // q^{n+1} d < dist <= q^n d; strict lower, inclusive upper.
    int n = 0;
    double bound = cfg.q * cfg.d;
    while (dist <= bound && n < 2000) {
      bound *= cfg.q;
      ++n;
    }
    lvl.n = n;
    return lvl;
  }
  double norm = std::max(delta_norm(u, cfg.delta), delta_norm(uprime, cfg.delta));
  if (norm > cfg.R)
    throw std::domain_error("classify_pair: pair outside the R-ball of the coupling domain");
  int nlev = cfg.levels_n();
  double hi = cfg.R;  // ring k = -N has (R b, R]
  for (int k = -nlev; k <= -1; ++k) {
    double lo = hi * cfg.b();
    if (norm > lo && norm <= hi) {
      lvl.n = k;
      return lvl;
    }
    hi = lo;
  }
  // dist > d forces norm >= d/2 > R b^N, so the rings are exhaustive.
  throw std::domain_error("classify_pair: far pair below the lowest ring (inconsistent config)");
}

double coupling_weight(const CouplingConfig& cfg, const PairLevel& lvl) {
  if (lvl.infinite) return 0.0;
  if (lvl.n >= 0) return std::pow(std::pow(cfg.q, lvl.n) * cfg.d, 0.5 * cfg.gamma);
  return cfg.m_k(lvl.n);
}

PhiResult phi_map(const PhiContext& ctx, const SpectralField& u, const SpectralField& uprime,
                  const NoisePath& eta, std::shared_ptr<LinearizedSystem> reuse,
                  std::shared_ptr<StateTrajectory> reuse_traj) {
  PhiResult out;
  std::shared_ptr<StateTrajectory> traj = reuse_traj;
  if (!traj) {
    auto res = resolve(ctx.params, ctx.cfg, u, &eta);
    traj = std::make_shared<StateTrajectory>(std::move(res.traj));
  }
  out.traj = traj;
  std::shared_ptr<LinearizedSystem> sys = reuse;
  if (!sys)
    sys = std::make_shared<LinearizedSystem>(*traj, ctx.obs, *ctx.noise, ctx.ctrl, ctx.horizon,
                                             ctx.threads);
  out.sys = sys;

  out.f_gamma = sys->residual_functional(ctx.gamma_tik);
  out.cls = classify_residual(out.f_gamma, ctx.thresholds);
  out.cutoff = smooth_cutoff(out.f_gamma, ctx.thresholds.nu());

  SpectralField dir = uprime;
  dir -= u;
  double dist = hnorm(dir);
  if (out.cutoff == 0.0 || dist == 0.0) {
    out.zero = true;
    out.coords = Eigen::VectorXd::Zero(ctx.ctrl.dim());
    return out;
  }

  // Homological target f = -(D_u S)(u, eta)(u' - u).
  SpectralField f_field = tangent_solve(sys->workspace(), &dir, nullptr, traj->t0,
                                        traj->t0 + ctx.horizon);
  f_field *= -1.0;
  Eigen::VectorXd f = sys->h_coords(f_field);
  SpectralField f_in = sys->from_h_coords(f);
  SpectralField f_rem = f_field;
  f_rem -= f_in;
  out.f_out = hnorm(f_rem);

  RightInverse ri = sys->right_inverse(ctx.gamma_tik);
  out.coords = out.cutoff * (ri.r * f);
  out.residual = (sys->a_m() * (ri.r * f) - f).norm();
  ControlPath path = sys->control_path(out.coords);
  out.norm_e = path.l2_norm();
  out.zero = false;
  return out;
}

StepOutcome coupled_step(const PhiContext& ctx, const CouplingConfig& cfg, const SpectralField& u,
                         const SpectralField& uprime, RngKey step_key) {
  StepOutcome out;
  out.level_before = classify_pair(u, uprime, cfg);
  SpectralField d0 = u;
  d0 -= uprime;
  out.dist_before = delta_norm(d0, cfg.delta);

  NoisePath eta(ctx.noise, step_key.sub("eta"));
  if (out.level_before.infinite || out.level_before.n < 0) {
    // Identical or far pair: ride the same realisation.
    auto r1 = resolve(ctx.params, ctx.cfg, u, &eta, nullptr, {0.0, 1.0, false});
    out.v = r1.u1;
    if (out.level_before.infinite) {
      out.vprime = out.v;
    } else {
      auto r2 = resolve(ctx.params, ctx.cfg, uprime, &eta, nullptr, {0.0, 1.0, false});
      out.vprime = r2.u1;
    }
    out.branch = Branch::TrivialFar;
  } else {
    PhiResult phi = phi_map(ctx, u, uprime, eta);
    out.phi_norm = phi.norm_e;
    out.residual = phi.residual;
    out.f_gamma = phi.f_gamma;
    out.v = phi.traj->final_state();
    if (phi.zero) {
      out.branch = Branch::IdentityBad;
      out.omega = 3;
      auto r2 = resolve(ctx.params, ctx.cfg, uprime, &eta, nullptr, {0.0, 1.0, false});
      out.vprime = r2.u1;
    } else {
      out.branch = Branch::TransformedGood;
      out.omega = 1;
      ControlPath path = phi.sys->control_path(phi.coords);
      auto r2 = resolve(ctx.params, ctx.cfg, uprime, &eta, &path, {0.0, 1.0, false});
      out.vprime = r2.u1;
    }
  }

  SpectralField d1 = out.v;
  d1 -= out.vprime;
  out.dist_after = delta_norm(d1, cfg.delta);
  try {
    out.level_after = classify_pair(out.v, out.vprime, cfg);
    out.after_in_domain = true;
  } catch (const std::domain_error&) {
    out.after_in_domain = false;
  }
  return out;
}

double kantorovich_functional(
    const std::vector<SpectralField>& mu, const std::vector<SpectralField>& nu,
    const std::function<double(const SpectralField&, const SpectralField&)>& cost) {
  DGM_REQUIRE(!mu.empty() && mu.size() == nu.size(),
              "kantorovich_functional: equal nonempty sample sizes required");
  Eigen::MatrixXd c(mu.size(), nu.size());
  for (std::size_t i = 0; i < mu.size(); ++i)
    for (std::size_t j = 0; j < nu.size(); ++j)
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cost(mu[i], nu[j]);
  return kantorovich_value(c);
}

namespace {

double slice_density(const Eigen::VectorXd& v, const std::vector<double>& beta) {
  double rho = 1.0;
  for (int k = 0; k < v.size(); ++k) {
    double b = beta[static_cast<std::size_t>(k)];
    rho *= XiLaw::density(v(k) / b) / b;
  }
  return rho;
}

struct PushEval {
  double value = 0.0;  // pushforward density at v
  bool ok = false;
};

PushEval push_density(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& phi,
                      const std::vector<double>& beta, const Eigen::VectorXd& v, double fd_h) {
  int m = v.size();
  // Preimage y of v under y + phi(y), by fixed point (phi is a contraction
  // perturbation on the good set).
  Eigen::VectorXd y = v;
  bool converged = false;
  for (int it = 0; it < 40; ++it) {
    Eigen::VectorXd y_next = v - phi(y);
    double step = (y_next - y).norm();
    y = y_next;
    if (step < 1e-12 * (1.0 + v.norm())) {
      converged = true;
      break;
    }
  }
  PushEval out;
  if (!converged) return out;
  Eigen::VectorXd phi_y = phi(y);
  if ((y + phi_y - v).norm() > 1e-8 * (1.0 + v.norm())) return out;
  // Forward-difference Jacobian of phi at y.
  Eigen::MatrixXd jac(m, m);
  for (int k = 0; k < m; ++k) {
    Eigen::VectorXd yk = y;
    yk(k) += fd_h;
    jac.col(k) = (phi(yk) - phi_y) / fd_h;
  }
  double det = (Eigen::MatrixXd::Identity(m, m) + jac).determinant();
  if (std::abs(det) < 1e-9 || jac.norm() >= 1.0) return out;
  out.value = slice_density(y, beta) / std::abs(det);
  out.ok = true;
  return out;
}

}  // namespace

TvEstimate tv_slice_estimate(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& phi,
                             const std::vector<double>& beta, int n_mc, RngKey key) {
  int m = static_cast<int>(beta.size());
  double fd_h = 1e-5;
  for (double b : beta) fd_h = std::min(fd_h, 1e-4 * std::abs(b));
  TvEstimate est;
  double acc = 0.0;
  int fails = 0;
  std::uint64_t ctr = 0;
  for (int s = 0; s < n_mc; ++s) {
    Eigen::VectorXd v(m);
    for (int k = 0; k < m; ++k)
      v(k) = beta[static_cast<std::size_t>(k)] * XiLaw::sample(key.sub("v"), ctr++);
    double rho = slice_density(v, beta);
    if (rho <= 0) continue;
    PushEval pe = push_density(phi, beta, v, fd_h);
    if (!pe.ok) {
      ++fails;
      continue;
    }
    acc += std::abs(1.0 - pe.value / rho);
  }
  // Mass pushed outside the support of the slice marginal.
  int out_hits = 0;
  for (int s = 0; s < n_mc; ++s) {
    Eigen::VectorXd y(m);
    for (int k = 0; k < m; ++k)
      y(k) = beta[static_cast<std::size_t>(k)] * XiLaw::sample(key.sub("y"), ctr++);
    Eigen::VectorXd img = y + phi(y);
    if (slice_density(img, beta) <= 0.0) ++out_hits;
  }
  est.fail_rate = static_cast<double>(fails) / n_mc;
  est.out_mass = static_cast<double>(out_hits) / n_mc;
  est.tv = 0.5 * (acc / n_mc + est.out_mass);
  if (est.fail_rate > 0.05) {
    TvEstimate fb = tv_binned_l1(phi, beta, n_mc * 4, m <= 2 ? 24 : 8, key.sub("fallback"));
    fb.fail_rate = est.fail_rate;
    return fb;
  }
  return est;
}

TvEstimate tv_slice_quadrature(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& phi,
                               const std::vector<double>& beta, int grid_per_dim) {
  int m = static_cast<int>(beta.size());
  DGM_REQUIRE(m >= 1 && m <= 2, "tv_slice_quadrature: oracle route supports M <= 2");
  double fd_h = 1e-6 * std::abs(beta[0]);
  // Tensor midpoint rule over the slab [-1.5 beta, 1.5 beta]^m (the image
  // of the support under a small perturbation stays inside).
  std::vector<double> lo(static_cast<std::size_t>(m)), w(static_cast<std::size_t>(m));
  std::size_t total = 1;
  for (int k = 0; k < m; ++k) {
    lo[static_cast<std::size_t>(k)] = -1.5 * std::abs(beta[static_cast<std::size_t>(k)]);
    w[static_cast<std::size_t>(k)] = 3.0 * std::abs(beta[static_cast<std::size_t>(k)]) / grid_per_dim;
    total *= static_cast<std::size_t>(grid_per_dim);
  }
  double acc = 0.0;
  TvEstimate est;
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rem = idx;
    Eigen::VectorXd v(m);
    double cell = 1.0;
    for (int k = 0; k < m; ++k) {
      std::size_t g = rem % static_cast<std::size_t>(grid_per_dim);
      rem /= static_cast<std::size_t>(grid_per_dim);
      v(k) = lo[static_cast<std::size_t>(k)] + (static_cast<double>(g) + 0.5) * w[static_cast<std::size_t>(k)];
      cell *= w[static_cast<std::size_t>(k)];
    }
    double rho = slice_density(v, beta);
    PushEval pe = push_density(phi, beta, v, fd_h);
    double push = pe.ok ? pe.value : 0.0;
    acc += std::abs(rho - push) * cell;
  }
  est.tv = 0.5 * acc;
  return est;
}

TvEstimate tv_binned_l1(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& phi,
                        const std::vector<double>& beta, int n_mc, int bins_per_dim, RngKey key) {
  int m = static_cast<int>(beta.size());
  DGM_REQUIRE(m <= 3, "tv_binned_l1: fallback limited to M <= 3");
  std::size_t total = 1;
  for (int k = 0; k < m; ++k) total *= static_cast<std::size_t>(bins_per_dim);
  std::vector<double> pa(total, 0.0), pb(total, 0.0);
  auto bin_of = [&](const Eigen::VectorXd& x) -> long {
    std::size_t idx = 0;
    for (int k = 0; k < m; ++k) {
      double b = 1.5 * std::abs(beta[static_cast<std::size_t>(k)]);
      double t = (x(k) + b) / (2 * b);
      if (t < 0 || t >= 1) return -1;
      idx = idx * static_cast<std::size_t>(bins_per_dim) +
            static_cast<std::size_t>(t * bins_per_dim);
    }
    return static_cast<long>(idx);
  };
  std::uint64_t ctr = 0;
  for (int s = 0; s < n_mc; ++s) {
    Eigen::VectorXd y(m);
    for (int k = 0; k < m; ++k)
      y(k) = beta[static_cast<std::size_t>(k)] * XiLaw::sample(key.sub("a"), ctr++);
    long ba = bin_of(y);
    if (ba >= 0) pa[static_cast<std::size_t>(ba)] += 1.0 / n_mc;
    Eigen::VectorXd img = y + phi(y);
    long bb = bin_of(img);
    if (bb >= 0) pb[static_cast<std::size_t>(bb)] += 1.0 / n_mc;
  }
  TvEstimate est;
  est.fallback = true;
  double l1 = 0.0;
  for (std::size_t i = 0; i < total; ++i) l1 += std::abs(pa[i] - pb[i]);
  est.tv = 0.5 * l1;
  return est;
}

TvSlopeReport tv_distance_estimate(const PhiContext& ctx, const SpectralField& u,
                                   const SpectralField& dir_unit,
                                   const std::vector<double>& deltas, int n_eta, int n_mc,
                                   RngKey key) {
  TvSlopeReport rep;
  rep.deltas = deltas;
  int m = ctx.ctrl.dim();
  DGM_REQUIRE(m >= 1, "tv_distance_estimate: empty control basis");

  // Coordinate scales of the slice: the eta-coordinate on the k-th tensor
  // basis function is beta_k xi with beta = b_i c_j 2^{-j/2} (b_i for h0).
  std::vector<double> beta;
  int tdim = ctx.ctrl.time_dim();
  for (int ch : ctx.ctrl.channels) {
    double b = ctx.noise->channels[static_cast<std::size_t>(ch)].b;
    beta.push_back(b);  // h0 slot
    int j = 1, count = 1;
    while (count < tdim) {
      double scale = b * ctx.noise->temporal.cj(j) * std::pow(2.0, -0.5 * j);
      for (int l = 0; l < (1 << j) && count < tdim; ++l, ++count) beta.push_back(scale);
      ++j;
    }
  }

  for (std::size_t di = 0; di < deltas.size(); ++di) {
    double dlt = deltas[di];
    SpectralField uprime = u;
    uprime.add_scaled(dir_unit, dlt);
    double acc = 0.0;
    for (int e = 0; e < n_eta; ++e) {
      RngKey eta_key = key.sub("tv").sub(di).sub(static_cast<std::uint64_t>(e));
      NoisePath eta(ctx.noise, eta_key);
      // Base coordinates of eta on the control tensor basis: b_i xi for the
      // h0 slot and b_i c_j 2^{-j/2} xi_{jl} at level j.
      Eigen::VectorXd base(m);
      {
        int idx = 0;
        for (int ch : ctx.ctrl.channels) {
          double b = ctx.noise->channels[static_cast<std::size_t>(ch)].b;
          base(idx++) = b * eta.xi(ch, 0, 0);
          int count = 1;
          for (int j = 1; count < tdim; ++j) {
            double scale = b * ctx.noise->temporal.cj(j) * std::pow(2.0, -0.5 * j);
            for (int l = 0; l < (1 << j) && count < tdim; ++l, ++count)
              base(idx++) = scale * eta.xi(ch, j, l);
          }
        }
      }
      auto make_overlay = [&](const Eigen::VectorXd& shift) {
        int steps = ctx.cfg.steps_per_unit;
        ControlPath g;
        g.t0 = 0.0;
        g.dt = ctx.cfg.dt();
        g.basis = ctx.ctrl.fields;
        g.values = Eigen::MatrixXd::Zero(ctx.ctrl.fields.size(), steps);
        std::vector<double> profile(static_cast<std::size_t>(steps));
        for (int k = 0; k < m; ++k) {
          int ch = k / tdim;
          int tk = k % tdim;
          control_time_profile(tk, steps, profile.data());
          for (int n = 0; n < steps; ++n)
            g.values(ch, n) += shift(k) * profile[static_cast<std::size_t>(n)];
        }
        return g;
      };
      auto phi_of_slice = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
        ControlPath overlay = make_overlay(v - base);
        auto res = resolve(ctx.params, ctx.cfg, u, &eta, &overlay);
        auto traj = std::make_shared<StateTrajectory>(std::move(res.traj));
        PhiResult pr = phi_map(ctx, u, uprime, eta, nullptr, traj);
        return pr.coords;
      };
      TvEstimate est = tv_slice_estimate(phi_of_slice, beta, n_mc, eta_key.sub("mc"));
      acc += est.tv;
    }
    rep.tv.push_back(acc / n_eta);
  }
  for (std::size_t i = 1; i < rep.tv.size(); ++i)
    if (rep.tv[i] > rep.tv[i - 1] + 1e-12) rep.monotone = false;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < rep.tv.size(); ++i)
    if (rep.tv[i] > 0) {
      lx.push_back(std::log(rep.deltas[i]));
      ly.push_back(std::log(rep.tv[i]));
    }
  if (lx.size() >= 3) {
    LineFit lf = fit_line(lx, ly);
    rep.beta_hat = lf.slope;
    rep.beta_ci_lo = lf.slope - lf.slope_ci_half();
    rep.beta_ci_hi = lf.slope + lf.slope_ci_half();
  }
  return rep;
}

namespace {

int level_key(const PairLevel& l) { return l.infinite ? INT32_MAX : l.n; }

}  // namespace

ContractionReport contraction_from_samples(const CouplingConfig& cfg,
                                           std::vector<ContractionSample> samples,
                                           int bootstrap_reps, RngKey key) {
  ContractionReport rep;
  rep.samples = samples;
  std::map<int, std::vector<const ContractionSample*>> by_level;
  for (const auto& s : samples) by_level[level_key(s.before)].push_back(&s);

  for (auto& [lvl, group] : by_level) {
    LevelStats st;
    st.level = lvl;
    st.count = static_cast<int>(group.size());
    int up = 0, drop2 = 0;
    double ratio_acc = 0.0;
    for (const auto* s : group) {
      int before = level_key(s->before);
      int after = s->after_known ? level_key(s->after) : before - 1000;
      if (after >= before + 1) ++up;
      if (after <= before - 2) ++drop2;
      ratio_acc += s->f_before > 0 ? s->f_after / s->f_before : 0.0;
    }
    st.p_up = static_cast<double>(up) / st.count;
    st.p_drop2 = static_cast<double>(drop2) / st.count;
    st.mean_ratio = ratio_acc / st.count;
    rep.levels.push_back(st);
    rep.kappa_hat = std::max(rep.kappa_hat, st.mean_ratio);
  }
  int nlev = cfg.levels_n();
  for (int k = -nlev; k <= -1; ++k)
    if (!by_level.count(k)) rep.empty_levels.push_back(k);

  // Bootstrap the per-level means, then take the max over levels.
  std::vector<double> kappa_boot(static_cast<std::size_t>(bootstrap_reps), 0.0);
  std::uint64_t ctr = 0;
  for (int r = 0; r < bootstrap_reps; ++r) {
    double worst = 0.0;
    for (auto& [lvl, group] : by_level) {
      double acc = 0.0;
      for (std::size_t i = 0; i < group.size(); ++i) {
        const auto* s = group[key.below(group.size(), ctr++)];
        acc += s->f_before > 0 ? s->f_after / s->f_before : 0.0;
      }
      worst = std::max(worst, acc / static_cast<double>(group.size()));
    }
    kappa_boot[static_cast<std::size_t>(r)] = worst;
  }
  rep.kappa_ci_hi = bootstrap_reps > 0 ? quantile(kappa_boot, 0.975) : rep.kappa_hat;
  return rep;
}

ContractionReport contraction_estimate(
    const PhiContext& ctx, const CouplingConfig& cfg,
    const std::vector<std::pair<SpectralField, SpectralField>>& pairs, RngKey key,
    int bootstrap_reps) {
  cfg.validate();
  std::vector<ContractionSample> samples(pairs.size());
  parallel_for(pairs.size(), ctx.threads, [&](std::size_t i) {
    PhiContext local = ctx;
    local.threads = 1;  // the outer loop already saturates the pool
    StepOutcome so = coupled_step(local, cfg, pairs[i].first, pairs[i].second,
                                  key.sub("pair").sub(i));
    ContractionSample cs;
    cs.before = so.level_before;
    cs.after = so.level_after;
    cs.after_known = so.after_in_domain;
    cs.f_before = coupling_weight(cfg, so.level_before);
    cs.f_after = so.after_in_domain ? coupling_weight(cfg, so.level_after)
                                    : cfg.m_k(-cfg.levels_n());
    samples[i] = cs;
  });
  return contraction_from_samples(cfg, std::move(samples), bootstrap_reps, key.sub("boot"));
}

}  // namespace degenmix
