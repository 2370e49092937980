#include "degenmix/dynamics.hpp"

#include <cmath>

#include "degenmix/util.hpp"

namespace degenmix {

void ModelParams::validate() const {
  DGM_REQUIRE(nu > 0, "ModelParams: nu must be positive");
  if (model == Model::CGL3D) {
    DGM_REQUIRE(gamma > 0 && c > 0, "ModelParams: gamma, c must be positive");
    DGM_REQUIRE(m == 1 || m == 2, "ModelParams: m in {1,2}");
  }
}

void SolverConfig::validate(const ModelParams& p) const {
  p.validate();
  DGM_REQUIRE(grid >= dealias_grid(cutoff, p.nonlinearity_degree()),
              "SolverConfig: grid below the dealiasing requirement");
  DGM_REQUIRE((grid & (grid - 1)) == 0, "SolverConfig: grid must be a power of 2");
  DGM_REQUIRE(steps_per_unit > 0 && (steps_per_unit & (steps_per_unit - 1)) == 0,
              "SolverConfig: steps_per_unit must be a power of 2");
}

double ControlPath::l2_norm() const {
  double s = 0;
  for (int i = 0; i < n_channels(); ++i) {
    double bnorm2 = hdot(basis[static_cast<std::size_t>(i)], basis[static_cast<std::size_t>(i)]);
    for (int n = 0; n < n_steps(); ++n) s += values(i, n) * values(i, n) * dt * bnorm2;
  }
  return std::sqrt(s);
}

int StateTrajectory::step_of(double t) const {
  double x = (t - t0) / dt();
  int n = static_cast<int>(std::lround(x));
  DGM_REQUIRE(std::abs(x - n) < 1e-9, "StateTrajectory: time not on the step grid");
  DGM_REQUIRE(n >= 0 && n <= n_steps(), "StateTrajectory: time outside stored range");
  return n;
}

namespace {

// Linear symbol mu_l: nu*lambda (NS) or (nu+i)*lambda + gamma (CGL).
std::vector<Complex> linear_symbol(const ModelParams& p, const SpectralField& proto) {
  std::vector<Complex> mu(proto.n_modes());
  for (std::size_t i = 0; i < proto.n_modes(); ++i) {
    double lam = laplace_eigenvalue(proto.torus(), proto.mode_at(i));
    mu[i] = p.model == Model::NS2D ? Complex(p.nu * lam, 0)
                                   : Complex(p.nu * lam + p.gamma, lam);
  }
  return mu;
}

void apply_diag(SpectralField& f, const std::vector<Complex>& d) {
  int nc = f.ncomp();
  auto& raw = f.raw();
  for (std::size_t i = 0; i < f.n_modes(); ++i)
    for (int comp = 0; comp < nc; ++comp) raw[i * static_cast<std::size_t>(nc) + comp] *= d[i];
}

SpectralField nonlinear_term(NonlinearEvaluator& ev, const ModelParams& p, const SpectralField& u) {
  return p.model == Model::NS2D ? ev.ns_b(u) : ev.cgl_b(u, p.c, p.m);
}

// phi1(z) = (e^z - 1)/z, phi2(z) = (e^z - z - 1)/z^2, series for small |z|.
Complex phi1(Complex z) {
  if (std::abs(z) < 1e-4) return 1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0;
  return (std::exp(z) - 1.0) / z;
}
Complex phi2(Complex z) {
  if (std::abs(z) < 1e-4) return 0.5 + z / 6.0 + z * z / 24.0 + z * z * z / 120.0;
  return (std::exp(z) - z - 1.0) / (z * z);
}

}  // namespace

ResolveResult resolve(const ModelParams& params, const SolverConfig& cfg, const SpectralField& u0,
                      const NoisePath* eta, const ControlPath* extra, ResolveOptions opts) {
  cfg.validate(params);
  DGM_REQUIRE(u0.kind() == params.field_kind(), "resolve: state kind mismatch");
  DGM_REQUIRE(u0.cutoff() == cfg.cutoff, "resolve: state cutoff mismatch");
  DGM_REQUIRE(opts.t1 > opts.t0, "resolve: empty time interval");
  DGM_REQUIRE(u0.finite(), "resolve: non-finite initial state");

  double dt = cfg.dt();
  double span = opts.t1 - opts.t0;
  int n_steps = static_cast<int>(std::lround(span / dt));
  DGM_REQUIRE(std::abs(n_steps * dt - span) < 1e-12, "resolve: interval not step-aligned");

  NonlinearEvaluator ev(params.field_kind(), u0.torus(), cfg.cutoff, cfg.grid);
  std::vector<Complex> mu = linear_symbol(params, u0);

  // Crank-Nicolson factors.
  std::vector<Complex> cfac(mu.size()), dfac(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    cfac[i] = 1.0 / (1.0 + 0.5 * dt * mu[i]);
    dfac[i] = 1.0 - 0.5 * dt * mu[i];
  }
  // ETDRK2 factors.
  std::vector<Complex> efac(mu.size()), p1fac(mu.size()), p2fac(mu.size());
  if (cfg.integrator == Integrator::Etdrk2) {
    for (std::size_t i = 0; i < mu.size(); ++i) {
      Complex z = -dt * mu[i];
      efac[i] = std::exp(z);
      p1fac[i] = phi1(z);
      p2fac[i] = phi2(z);
    }
  }

  // Cached spatial channels of the noise.
  std::vector<SpectralField> noise_phi;
  if (eta) {
    for (int i = 0; i < eta->spec().n_channels(); ++i) noise_phi.push_back(eta->spec().phi(i));
  }
  auto forcing_avg = [&](int step) {
    SpectralField f(params.field_kind(), u0.torus(), cfg.cutoff);
    double a = opts.t0 + step * dt, b = a + dt;
    if (eta) {
      auto avg = eta->channel_averages(a, b);
      for (std::size_t i = 0; i < noise_phi.size(); ++i) f.add_scaled(noise_phi[i], avg[i]);
    }
    if (extra) {
      DGM_REQUIRE(std::abs(extra->dt - dt) < 1e-15 && std::abs(extra->t0 - opts.t0) < 1e-12,
                  "resolve: control path grid mismatch");
      DGM_REQUIRE(extra->n_steps() >= n_steps, "resolve: control path too short");
      for (int c = 0; c < extra->n_channels(); ++c)
        f.add_scaled(extra->basis[static_cast<std::size_t>(c)], extra->values(c, step));
    }
    return f;
  };

  StateTrajectory traj;
  traj.params = params;
  traj.cfg = cfg;
  traj.t0 = opts.t0;
  if (opts.keep_trajectory) {
    traj.states.reserve(static_cast<std::size_t>(n_steps) + 1);
    traj.states.push_back(u0);
  }

  SpectralField u = u0;
  SpectralField b_prev = nonlinear_term(ev, params, u);
  for (int n = 0; n < n_steps; ++n) {
    SpectralField b_cur = (n == 0) ? b_prev : nonlinear_term(ev, params, u);
    SpectralField force = forcing_avg(n);
    SpectralField next = u;
    if (cfg.integrator == Integrator::ImexCn) {
      apply_diag(next, dfac);
      next.add_scaled(b_cur, -1.5 * dt);
      next.add_scaled(b_prev, 0.5 * dt);
      next.add_scaled(force, dt);
      apply_diag(next, cfac);
    } else {
      // ETDRK2 (Cox-Matthews): predictor with phi1, corrector with phi2.
      SpectralField nl = force;
      nl.add_scaled(b_cur, -1.0);
      SpectralField stage = u;
      apply_diag(stage, efac);
      SpectralField nl1 = nl;
      apply_diag(nl1, p1fac);
      stage.add_scaled(nl1, dt);
      SpectralField b_stage = nonlinear_term(ev, params, stage);
      SpectralField corr = b_cur;
      corr.add_scaled(b_stage, -1.0);  // N(stage)-N(u) = -(B(stage)-B(u))
      corr *= -1.0;
      apply_diag(corr, p2fac);
      stage.add_scaled(corr, dt);
      next = stage;
    }
    b_prev = b_cur;
    u = next;

    double nrm = hnorm(u);
    if (!(nrm < cfg.blowup_threshold) || !u.finite())
      throw SolverFailure("resolve: blow-up guard tripped at step " + std::to_string(n) +
                          " (norm " + std::to_string(nrm) + ")");
    if ((n & 15) == 0) {
      double stiff;
      if (params.model == Model::NS2D) {
        double kmax = cfg.cutoff / std::min(u0.torus().a[0], u0.torus().a[1]);
        stiff = ev.ns_max_speed(u) * kmax;
      } else {
        double amp = ev.mean_abs_pow(u, 2 * params.m);  // ~ |u|^{2m} scale
        stiff = params.c * amp;
      }
      if (stiff * dt > cfg.cfl_limit)
        throw SolverFailure("resolve: CFL violation at step " + std::to_string(n) +
                            " (dt*stiffness " + std::to_string(stiff * dt) + ")");
    }
    if (opts.keep_trajectory) traj.states.push_back(u);
  }

  return ResolveResult{u, std::move(traj)};
}

double delta_norm(const SpectralField& u, double delta) {
  double h0 = sobolev_dot(u, u, 0);
  if (delta == 0.0) return std::sqrt(std::max(0.0, h0));
  double h1 = sobolev_dot(u, u, 1);
  return std::sqrt(std::max(0.0, h0 + delta * h1));
}

DissipativityReport dissipativity_constant(const ModelParams& params, const SolverConfig& cfg,
                                           const std::vector<SpectralField>& sample) {
  DissipativityReport rep;
  if (params.model == Model::NS2D) {
    rep.delta = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
      double n0 = hnorm(sample[i]);
      if (n0 < 1e-12) continue;  // ratio defined as 0 at the fixed point
      auto res = resolve(params, cfg, sample[i], nullptr, nullptr, {0.0, 1.0, false});
      double ratio = hnorm(res.u1) / n0;
      if (ratio > rep.a_hat) {
        rep.a_hat = ratio;
        rep.witness = static_cast<int>(i);
      }
    }
  } else {
    // Paper recipe: measure q and C_B on the sample, then pick delta with
    // q^2 + delta C_B^2 < 1 and verify contraction in the delta-norm.
    std::vector<SpectralField> images;
    images.reserve(sample.size());
    for (const auto& u : sample)
      images.push_back(resolve(params, cfg, u, nullptr, nullptr, {0.0, 1.0, false}).u1);
    for (std::size_t i = 0; i < sample.size(); ++i) {
      double n0 = hnorm(sample[i]);
      if (n0 < 1e-12) continue;
      rep.q_hat = std::max(rep.q_hat, hnorm(images[i]) / n0);
      rep.c_b = std::max(rep.c_b, sobolev_norm(images[i], 1) / n0);
    }
    DGM_REQUIRE(rep.q_hat < 1.0, "dissipativity_constant: CGL L2 contraction failed");
    rep.delta = 0.5 * (1.0 - rep.q_hat * rep.q_hat) / std::max(rep.c_b * rep.c_b, 1e-12);
    for (std::size_t i = 0; i < sample.size(); ++i) {
      double n0 = delta_norm(sample[i], rep.delta);
      if (n0 < 1e-12) continue;
      double ratio = delta_norm(images[i], rep.delta) / n0;
      if (ratio > rep.a_hat) {
        rep.a_hat = ratio;
        rep.witness = static_cast<int>(i);
      }
    }
  }
  rep.pass = rep.a_hat < 1.0;
  if (rep.pass) rep.witness = -1;
  return rep;
}

LipschitzReport lipschitz_constant(const ModelParams& params, const SolverConfig& cfg,
                                   const std::vector<std::pair<SpectralField, SpectralField>>& pairs,
                                   const std::vector<NoisePath>& noises, double delta) {
  LipschitzReport rep;
  for (const auto& pr : pairs) {
    SpectralField diff0 = pr.first;
    diff0 -= pr.second;
    double d0 = delta_norm(diff0, delta);
    if (d0 < 1e-14) continue;  // 0/0 pairs are excluded from the max
    for (const auto& z : noises) {
      auto r1 = resolve(params, cfg, pr.first, &z, nullptr, {0.0, 1.0, false});
      auto r2 = resolve(params, cfg, pr.second, &z, nullptr, {0.0, 1.0, false});
      SpectralField diff = r1.u1;
      diff -= r2.u1;
      rep.lip_hat = std::max(rep.lip_hat, delta_norm(diff, delta) / d0);
    }
  }
  rep.q = std::min(0.5, rep.lip_hat > 0 ? 1.0 / rep.lip_hat : 0.5);
  return rep;
}

AbsorbingReport absorbing_radius(const ModelParams& params, const SolverConfig& cfg,
                                 const NoiseSpec& noise, int n_traj, int n_burnin, int n_check,
                                 RngKey key, double delta) {
  AbsorbingReport rep;
  NonlinearEvaluator ev(params.field_kind(), noise.torus, cfg.cutoff, cfg.grid);
  double ham_delta_grid[] = {0.1, 0.2, 0.4, 0.8, 1.6};
  std::vector<double> best_c1_fit;

  struct HamTrace {
    std::vector<double> ham;       // H(u(k)) at integer times
    std::vector<double> eta_h1;    // per-step ||eta||_1 averages
  };
  std::vector<HamTrace> traces;

  double r_h = 0.0, r_v = 0.0;
  bool exited = false;
  int enter = n_burnin;
  auto ham = [&](const SpectralField& u) {
    double grad2 = 0.0;
    for (std::size_t i = 0; i < u.n_modes(); ++i) {
      double lam = laplace_eigenvalue(u.torus(), u.mode_at(i));
      grad2 += lam * std::norm(u.raw()[i]);
    }
    return 0.5 * grad2 + params.c / 6.0 * ev.mean_abs_pow(u, 6);
  };

  for (int t = 0; t < n_traj; ++t) {
    SpectralField u(params.field_kind(), noise.torus, cfg.cutoff);
    // Spread of deterministic starts: scaled basis bumps.
    if (t > 0) {
      WaveVector l = params.model == Model::NS2D ? WaveVector(1, 0) : WaveVector(1, 0, 0);
      SpectralField bump = params.model == Model::NS2D
                               ? ns_basis_field(noise.torus, cfg.cutoff, l)
                               : cgl_basis_field(noise.torus, cfg.cutoff, l);
      u.add_scaled(bump, 0.5 * t);
    }
    HamTrace trace;
    if (params.model == Model::CGL3D) trace.ham.push_back(ham(u));
    for (int k = 0; k < n_burnin + n_check; ++k) {
      NoisePath path(&noise, key.sub("absorb").sub(t).sub(static_cast<std::uint64_t>(k)));
      auto res = resolve(params, cfg, u, &path, nullptr, {0.0, 1.0, false});
      u = res.u1;
      double nh = delta_norm(u, delta);
      double nv = sobolev_norm(u, 2);
      if (k >= n_burnin) {
        if (nh > r_h * 1.5 && r_h > 0 && k > n_burnin) exited = true;
        r_h = std::max(r_h, nh);
        r_v = std::max(r_v, nv);
      }
      if (params.model == Model::CGL3D) {
        trace.ham.push_back(ham(u));
        double h1 = 0.0;
        for (int i = 0; i < noise.n_channels(); ++i) {
          double v = noise.channels[static_cast<std::size_t>(i)].b * path.scalar_integral(i, 0.0, 1.0);
          double phi_h1 = sobolev_norm(noise.phi(i), 1);
          h1 += v * v * phi_h1 * phi_h1;
        }
        trace.eta_h1.push_back(std::sqrt(h1));
      }
    }
    if (params.model == Model::CGL3D) traces.push_back(std::move(trace));
  }
  rep.radius_h = r_h;
  rep.radius_v = r_v;
  rep.enter_step = enter;
  rep.absorbed = !exited;

  if (params.model == Model::CGL3D && !traces.empty()) {
    // Fit (C1, delta) on the first half of the trajectories, validate the
    // Gronwall-type envelope on the second half.
    auto envelope = [&](const HamTrace& tr, double c1, double dlt, std::size_t k) {
      double integral = 0.0;
      for (std::size_t s = 0; s < k; ++s) {
        double w = std::exp(-dlt * (static_cast<double>(k - s) - 0.5) / 6.0);
        integral += w * (tr.eta_h1[s] + tr.eta_h1[s] * tr.eta_h1[s]);
      }
      double base = 1.0 + integral;
      return c1 * std::exp(-dlt * static_cast<double>(k)) * (tr.ham[0] + 1.0) +
             c1 * std::pow(base, 6.0);
    };
    std::size_t half = traces.size() / 2;
    double best_c1 = 1e300, best_delta = ham_delta_grid[0];
    for (double dlt : ham_delta_grid) {
      double c1 = 0.0;
      for (std::size_t t = 0; t < std::max<std::size_t>(half, 1); ++t) {
        const auto& tr = traces[t];
        for (std::size_t k = 1; k < tr.ham.size(); ++k) {
          double env1 = envelope(tr, 1.0, dlt, k);
          c1 = std::max(c1, tr.ham[k] / env1);
        }
      }
      if (c1 < best_c1) {
        best_c1 = c1;
        best_delta = dlt;
      }
    }
    rep.ham_c1 = best_c1 * 1.05;  // small headroom for the validation half
    rep.ham_delta = best_delta;
    rep.ham_bound_holds = true;
    for (std::size_t t = half; t < traces.size(); ++t) {
      const auto& tr = traces[t];
      for (std::size_t k = 1; k < tr.ham.size(); ++k)
        if (tr.ham[k] > envelope(tr, rep.ham_c1, rep.ham_delta, k)) rep.ham_bound_holds = false;
    }
  }
  (void)best_c1_fit;
  return rep;
}

std::vector<SpectralField> sample_absorbing_states(const ModelParams& params,
                                                   const SolverConfig& cfg, const NoiseSpec& noise,
                                                   int n_states, int n_burnin, RngKey key) {
  std::vector<SpectralField> out;
  out.reserve(static_cast<std::size_t>(n_states));
  for (int t = 0; t < n_states; ++t) {
    SpectralField u(params.field_kind(), noise.torus, cfg.cutoff);
    for (int k = 0; k < n_burnin; ++k) {
      NoisePath path(&noise, key.sub("absorbsample").sub(t).sub(static_cast<std::uint64_t>(k)));
      u = resolve(params, cfg, u, &path, nullptr, {0.0, 1.0, false}).u1;
    }
    out.push_back(std::move(u));
  }
  return out;
}

}  // namespace degenmix
