#include "degenmix/linearization.hpp"

#include <cmath>

#include "degenmix/util.hpp"

namespace degenmix {

namespace {

std::vector<Complex> linear_symbol(const ModelParams& p, const SpectralField& proto) {
  std::vector<Complex> mu(proto.n_modes());
  for (std::size_t i = 0; i < proto.n_modes(); ++i) {
    double lam = laplace_eigenvalue(proto.torus(), proto.mode_at(i));
    mu[i] = p.model == Model::NS2D ? Complex(p.nu * lam, 0) : Complex(p.nu * lam + p.gamma, lam);
  }
  return mu;
}

void apply_diag(SpectralField& f, const std::vector<Complex>& d, bool conjugate) {
  int nc = f.ncomp();
  auto& raw = f.raw();
  for (std::size_t i = 0; i < f.n_modes(); ++i) {
    Complex m = conjugate ? std::conj(d[i]) : d[i];
    for (int comp = 0; comp < nc; ++comp) raw[i * static_cast<std::size_t>(nc) + comp] *= m;
  }
}

}  // namespace

struct TangentWorkspace::StepData {
  // NS: u grids and the four derivative grids of the base state.
  // CGL: pointwise factors of Q(u)v = i c ((m+1)|u|^{2m} v + m |u|^{2m-2} u^2 vbar).
  std::vector<Complex> u0, u1, du00, du01, du10, du11;
  std::vector<Complex> alpha, beta;
};

TangentWorkspace::~TangentWorkspace() = default;
TangentWorkspace::TangentWorkspace(TangentWorkspace&&) noexcept = default;

TangentWorkspace::TangentWorkspace(const StateTrajectory& traj) : traj_(&traj) {
  DGM_REQUIRE(!traj.states.empty(), "TangentWorkspace: empty trajectory");
  DGM_REQUIRE(traj.cfg.integrator == Integrator::ImexCn,
              "TangentWorkspace: tangent/adjoint stepping is defined for imex_cn");
  const SpectralField& proto = traj.states.front();
  ev_ = std::make_unique<NonlinearEvaluator>(proto.kind(), proto.torus(), traj.cfg.cutoff,
                                             traj.cfg.grid);
  // Physical-space data of the base state at every step start.
  int s = n_steps();
  steps_.resize(static_cast<std::size_t>(s));
  const ModelParams& p = traj.params;
  for (int n = 0; n < s; ++n) {
    const SpectralField& u = traj.at_step(n);
    StepData& d = steps_[static_cast<std::size_t>(n)];
    if (p.model == Model::NS2D) {
      ev_->grid_of(u, 0, d.u0);
      ev_->grid_of(u, 1, d.u1);
      ev_->grid_deriv_of(u, 0, 0, d.du00);
      ev_->grid_deriv_of(u, 0, 1, d.du01);
      ev_->grid_deriv_of(u, 1, 0, d.du10);
      ev_->grid_deriv_of(u, 1, 1, d.du11);
    } else {
      std::vector<Complex> ug;
      ev_->grid_of(u, 0, ug);
      d.alpha.resize(ug.size());
      d.beta.resize(ug.size());
      const Complex ic(0, p.c);
      for (std::size_t i = 0; i < ug.size(); ++i) {
        double a2 = std::norm(ug[i]);
        double am = 1.0;
        for (int k = 0; k < p.m - 1; ++k) am *= a2;
        d.alpha[i] = ic * ((p.m + 1.0) * am * a2);
        d.beta[i] = ic * (static_cast<double>(p.m) * am * ug[i] * ug[i]);
      }
    }
  }
}

SpectralField TangentWorkspace::q_apply(int n, const SpectralField& v) const {
  const StepData& d = steps_[static_cast<std::size_t>(n)];
  const ModelParams& p = traj_->params;
  if (p.model == Model::NS2D) {
    std::vector<Complex> v0, v1, dv00, dv01, dv10, dv11;
    ev_->grid_of(v, 0, v0);
    ev_->grid_of(v, 1, v1);
    ev_->grid_deriv_of(v, 0, 0, dv00);
    ev_->grid_deriv_of(v, 0, 1, dv01);
    ev_->grid_deriv_of(v, 1, 0, dv10);
    ev_->grid_deriv_of(v, 1, 1, dv11);
    std::vector<Complex> r0(v0.size()), r1(v0.size());
    for (std::size_t i = 0; i < r0.size(); ++i) {
      r0[i] = d.u0[i] * dv00[i] + d.u1[i] * dv01[i] + v0[i] * d.du00[i] + v1[i] * d.du01[i];
      r1[i] = d.u0[i] * dv10[i] + d.u1[i] * dv11[i] + v0[i] * d.du10[i] + v1[i] * d.du11[i];
    }
    SpectralField out(FieldKind::DivFree2D, v.torus(), v.cutoff());
    ev_->field_of(r0, out, 0);
    ev_->field_of(r1, out, 1);
    return leray_project(out);
  }
  std::vector<Complex> vg;
  ev_->grid_of(v, 0, vg);
  std::vector<Complex> r(vg.size());
  for (std::size_t i = 0; i < r.size(); ++i)
    r[i] = d.alpha[i] * vg[i] + d.beta[i] * std::conj(vg[i]);
  SpectralField out(FieldKind::Complex3D, v.torus(), v.cutoff());
  ev_->field_of(r, out, 0);
  return out;
}

SpectralField TangentWorkspace::q_adjoint(int n, const SpectralField& w) const {
  const StepData& d = steps_[static_cast<std::size_t>(n)];
  const ModelParams& p = traj_->params;
  if (p.model == Model::NS2D) {
    std::vector<Complex> dw00, dw01, dw10, dw11;
    ev_->grid_deriv_of(w, 0, 0, dw00);
    ev_->grid_deriv_of(w, 0, 1, dw01);
    ev_->grid_deriv_of(w, 1, 0, dw10);
    ev_->grid_deriv_of(w, 1, 1, dw11);
    std::vector<Complex> r0(dw00.size()), r1(dw00.size());
    for (std::size_t i = 0; i < r0.size(); ++i) {
      r0[i] = -(d.u0[i] * dw00[i] + d.u1[i] * dw01[i]) - (d.u0[i] * dw00[i] + d.u1[i] * dw10[i]);
      r1[i] = -(d.u0[i] * dw10[i] + d.u1[i] * dw11[i]) - (d.u0[i] * dw01[i] + d.u1[i] * dw11[i]);
    }
    SpectralField out(FieldKind::DivFree2D, w.torus(), w.cutoff());
    ev_->field_of(r0, out, 0);
    ev_->field_of(r1, out, 1);
    return leray_project(out);
  }
  std::vector<Complex> wg;
  ev_->grid_of(w, 0, wg);
  std::vector<Complex> r(wg.size());
  for (std::size_t i = 0; i < r.size(); ++i)
    r[i] = std::conj(d.alpha[i]) * wg[i] + d.beta[i] * std::conj(wg[i]);
  SpectralField out(FieldKind::Complex3D, w.torus(), w.cutoff());
  ev_->field_of(r, out, 0);
  return out;
}

SpectralField tangent_solve(const TangentWorkspace& ws, const SpectralField* v0,
                            const ControlPath* g, double s, double t) {
  const StateTrajectory& traj = ws.traj();
  int lo = traj.step_of(s), hi = traj.step_of(t);
  DGM_REQUIRE(lo < hi, "tangent_solve: empty interval");
  double dt = traj.dt();
  const SpectralField& proto = traj.states.front();
  std::vector<Complex> mu = linear_symbol(traj.params, proto);
  std::vector<Complex> cfac(mu.size()), dfac(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    cfac[i] = 1.0 / (1.0 + 0.5 * dt * mu[i]);
    dfac[i] = 1.0 - 0.5 * dt * mu[i];
  }

  SpectralField v = v0 ? *v0 : SpectralField(proto.kind(), proto.torus(), proto.cutoff());
  SpectralField q_prev = ws.q_apply(lo, v);  // Q_{lo-1} v^{lo-1} tie: Q_lo v^lo
  for (int n = lo; n < hi; ++n) {
    SpectralField q_cur = (n == lo) ? q_prev : ws.q_apply(n, v);
    SpectralField next = v;
    apply_diag(next, dfac, false);
    next.add_scaled(q_cur, -1.5 * dt);
    next.add_scaled(q_prev, 0.5 * dt);
    if (g) {
      DGM_REQUIRE(std::abs(g->dt - dt) < 1e-15, "tangent_solve: control grid mismatch");
      int gstep = n - static_cast<int>(std::lround((g->t0 - traj.t0) / dt));
      if (gstep >= 0 && gstep < g->n_steps())
        for (int c = 0; c < g->n_channels(); ++c)
          next.add_scaled(g->basis[static_cast<std::size_t>(c)], g->values(c, gstep) * dt);
    }
    apply_diag(next, cfac, false);
    q_prev = q_cur;
    v = next;
  }
  return v;
}

AdjointSolution adjoint_solve(const TangentWorkspace& ws, const SpectralField& w1, double s,
                              double t, bool record_cells) {
  const StateTrajectory& traj = ws.traj();
  int lo = traj.step_of(s), hi = traj.step_of(t);
  DGM_REQUIRE(lo < hi, "adjoint_solve: empty interval");
  double dt = traj.dt();
  const SpectralField& proto = traj.states.front();
  std::vector<Complex> mu = linear_symbol(traj.params, proto);
  std::vector<Complex> cfac(mu.size()), dfac(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    cfac[i] = 1.0 / (1.0 + 0.5 * dt * mu[i]);
    dfac[i] = 1.0 - 0.5 * dt * mu[i];
  }

  AdjointSolution sol;
  if (record_cells) sol.w_cells.resize(static_cast<std::size_t>(hi - lo));

  // Transpose of the tangent recurrence. p1 tracks p^{n+1}, y_prev tracks
  // C^{-*} p^{n+2}; the start-up tie v^{lo-1} = v^{lo} folds the half-weight
  // of Q_{lo} back into step lo.
  SpectralField p1 = w1;
  SpectralField y_prev(proto.kind(), proto.torus(), proto.cutoff());
  bool have_y_prev = false;
  for (int n = hi - 1; n >= lo; --n) {
    SpectralField y = p1;
    apply_diag(y, cfac, true);
    if (record_cells) sol.w_cells[static_cast<std::size_t>(n - lo)] = y;
    SpectralField qin = y;
    double wcur = (n == lo) ? 1.0 : 1.5;
    qin *= wcur;
    if (have_y_prev) qin.add_scaled(y_prev, -0.5);
    SpectralField pn = y;
    apply_diag(pn, dfac, true);
    pn.add_scaled(ws.q_adjoint(n, qin), -dt);
    y_prev = y;
    have_y_prev = true;
    p1 = pn;
  }
  sol.p0 = p1;
  return sol;
}

SpectralField dus_adjoint(const TangentWorkspace& ws, const SpectralField& w1, double s, double t,
                          int order) {
  if (order == 0) return adjoint_solve(ws, w1, s, t, false).p0;
  // H^order adjoint = W^-1 (L^2 adjoint) W with the diagonal Sobolev weight.
  SpectralField in = w1;
  auto& raw = in.raw();
  int nc = in.ncomp();
  for (std::size_t i = 0; i < in.n_modes(); ++i) {
    double w = std::pow(1.0 + laplace_eigenvalue(in.torus(), in.mode_at(i)), order);
    for (int comp = 0; comp < nc; ++comp) raw[i * static_cast<std::size_t>(nc) + comp] *= w;
  }
  SpectralField out = adjoint_solve(ws, in, s, t, false).p0;
  auto& oraw = out.raw();
  for (std::size_t i = 0; i < out.n_modes(); ++i) {
    double w = std::pow(1.0 + laplace_eigenvalue(out.torus(), out.mode_at(i)), order);
    for (int comp = 0; comp < nc; ++comp) oraw[i * static_cast<std::size_t>(nc) + comp] /= w;
  }
  return out;
}

namespace {

std::vector<WaveVector> window_modes(int dims, int k_obs) {
  std::vector<WaveVector> out;
  if (dims == 2) {
    for (int l0 = -k_obs; l0 <= k_obs; ++l0)
      for (int l1 = -k_obs; l1 <= k_obs; ++l1) out.emplace_back(l0, l1);
  } else {
    for (int l0 = -k_obs; l0 <= k_obs; ++l0)
      for (int l1 = -k_obs; l1 <= k_obs; ++l1)
        for (int l2 = -k_obs; l2 <= k_obs; ++l2) out.emplace_back(l0, l1, l2);
  }
  return out;
}

}  // namespace

ObservationBasis ns_observation_basis(const TorusSpec& torus, int cutoff, int k_obs) {
  DGM_REQUIRE(k_obs <= cutoff, "ns_observation_basis: k_obs above cutoff");
  ObservationBasis basis;
  basis.v_order = 1;
  for (const auto& l : window_modes(2, k_obs)) {
    if (l.is_zero()) continue;
    SpectralField f = ns_basis_field(torus, cutoff, l);
    double n = hnorm(f);
    f *= 1.0 / n;
    basis.fields.push_back(std::move(f));
    basis.lambda.push_back(laplace_eigenvalue(torus, l));
  }
  return basis;
}

ObservationBasis cgl_observation_basis(const TorusSpec& torus, int cutoff, int k_obs) {
  DGM_REQUIRE(k_obs <= cutoff, "cgl_observation_basis: k_obs above cutoff");
  ObservationBasis basis;
  basis.v_order = 2;
  for (const auto& l : window_modes(3, k_obs)) {
    for (bool imag : {false, true}) {
      SpectralField f = cgl_basis_field(torus, cutoff, l, imag);
      double n = hnorm(f);
      f *= 1.0 / n;
      basis.fields.push_back(std::move(f));
      basis.lambda.push_back(laplace_eigenvalue(torus, l));
    }
  }
  return basis;
}

GramianMatrix gramian(const TangentWorkspace& ws, const ObservationBasis& obs,
                      const std::vector<SpectralField>& h_channels, double horizon, int threads) {
  const StateTrajectory& traj = ws.traj();
  int lo = traj.step_of(traj.t0);
  int hi = traj.step_of(traj.t0 + horizon);
  int s = hi - lo;
  int n = obs.size();
  int nh = static_cast<int>(h_channels.size());
  double dt = traj.dt();

  GramianMatrix gm;
  gm.z.resize(static_cast<Eigen::Index>(s) * nh, n);
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t m) {
    AdjointSolution sol = adjoint_solve(ws, obs.fields[m], traj.t0, traj.t0 + horizon, true);
    for (int k = 0; k < s; ++k)
      for (int i = 0; i < nh; ++i)
        gm.z(static_cast<Eigen::Index>(k) * nh + i, static_cast<Eigen::Index>(m)) =
            std::sqrt(dt) * hdot(sol.w_cells[static_cast<std::size_t>(k)],
                                 h_channels[static_cast<std::size_t>(i)]);
  });
  gm.g = gm.z.transpose() * gm.z;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gm.g);
  gm.eigs = es.eigenvalues();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(gm.z);
  double smin = svd.singularValues()(std::min<Eigen::Index>(gm.z.rows(), gm.z.cols()) - 1);
  gm.min_eig = smin * smin;
  gm.trace = gm.g.trace();
  return gm;
}

void control_time_profile(int k, int steps, double* out) {
  // Index 0 is h0; then levels j = 1, 2, ... with 2^j shifts each,
  // L^2-normalised (factor 2^{j/2}).
  for (int n = 0; n < steps; ++n) out[n] = 0.0;
  if (k == 0) {
    for (int n = 0; n < steps; ++n) out[n] = 1.0;
    return;
  }
  int j = 1, base = 1;
  while (k >= base + (1 << j)) {
    base += 1 << j;
    ++j;
  }
  int l = k - base;
  DGM_REQUIRE(steps % (1 << (j + 1)) == 0, "control_time_profile: step grid coarser than level");
  int cells_per_half = steps / (1 << (j + 1));
  double amp = std::pow(2.0, 0.5 * j);
  int start = l * 2 * cells_per_half;
  for (int n = 0; n < cells_per_half; ++n) out[start + n] = amp;
  for (int n = 0; n < cells_per_half; ++n) out[start + cells_per_half + n] = -amp;
}

ControlBasis make_control_basis(const NoiseSpec& noise, std::vector<int> channels, int time_levels,
                                int cutoff) {
  ControlBasis cb;
  cb.channels = std::move(channels);
  cb.time_levels = time_levels;
  for (int c : cb.channels) {
    DGM_REQUIRE(c >= 0 && c < noise.n_channels(), "make_control_basis: bad channel index");
    SpectralField f = noise.phi(c);
    DGM_REQUIRE(f.cutoff() == cutoff, "make_control_basis: cutoff mismatch");
    cb.fields.push_back(std::move(f));
  }
  return cb;
}

LinearizedSystem::LinearizedSystem(const StateTrajectory& traj, const ObservationBasis& obs,
                                   const NoiseSpec& noise, const ControlBasis& ctrl, double horizon,
                                   int threads)
    : ws_(traj), obs_(obs), ctrl_(ctrl), horizon_(horizon) {
  std::vector<SpectralField> h_channels;
  for (int i = 0; i < noise.n_channels(); ++i) h_channels.push_back(noise.phi(i));
  gram_ = gramian(ws_, obs_, h_channels, horizon, threads);

  // Control columns A chi_k in observation coordinates.
  int steps = traj.step_of(traj.t0 + horizon) - traj.step_of(traj.t0);
  int tdim = ctrl_.time_dim();
  int m = ctrl_.dim();
  a_m_.resize(obs_.size(), m);
  std::vector<double> profile(static_cast<std::size_t>(steps));
  std::vector<Eigen::MatrixXd> time_values(static_cast<std::size_t>(tdim));
  for (int k = 0; k < tdim; ++k) {
    control_time_profile(k, steps, profile.data());
    time_values[static_cast<std::size_t>(k)] = Eigen::Map<Eigen::RowVectorXd>(profile.data(), steps);
  }
  parallel_for(static_cast<std::size_t>(m), threads, [&](std::size_t col) {
    int ch = static_cast<int>(col) / tdim;
    int k = static_cast<int>(col) % tdim;
    ControlPath g;
    g.basis = {ctrl_.fields[static_cast<std::size_t>(ch)]};
    g.values = time_values[static_cast<std::size_t>(k)];
    g.t0 = traj.t0;
    g.dt = traj.dt();
    SpectralField av = tangent_solve(ws_, nullptr, &g, traj.t0, traj.t0 + horizon);
    for (int row = 0; row < obs_.size(); ++row)
      a_m_(row, static_cast<Eigen::Index>(col)) = hdot(av, obs_.fields[static_cast<std::size_t>(row)]);
  });
}

Eigen::VectorXd LinearizedSystem::h_coords(const SpectralField& f) const {
  Eigen::VectorXd c(obs_.size());
  for (int m = 0; m < obs_.size(); ++m) c(m) = hdot(f, obs_.fields[static_cast<std::size_t>(m)]);
  return c;
}

SpectralField LinearizedSystem::from_h_coords(const Eigen::VectorXd& c) const {
  SpectralField f = obs_.fields.front();
  f.set_zero();
  for (int m = 0; m < obs_.size(); ++m) f.add_scaled(obs_.fields[static_cast<std::size_t>(m)], c(m));
  return f;
}

ControlPath LinearizedSystem::control_path(const Eigen::VectorXd& coords) const {
  const StateTrajectory& traj = ws_.traj();
  int steps = traj.step_of(traj.t0 + horizon_) - traj.step_of(traj.t0);
  int tdim = ctrl_.time_dim();
  ControlPath g;
  g.t0 = traj.t0;
  g.dt = traj.dt();
  g.basis = ctrl_.fields;
  g.values = Eigen::MatrixXd::Zero(ctrl_.fields.size(), steps);
  std::vector<double> profile(static_cast<std::size_t>(steps));
  for (int k = 0; k < coords.size(); ++k) {
    int ch = k / tdim;
    int tk = k % tdim;
    control_time_profile(tk, steps, profile.data());
    for (int n = 0; n < steps; ++n) g.values(ch, n) += coords(k) * profile[static_cast<std::size_t>(n)];
  }
  return g;
}

double LinearizedSystem::residual_functional(double gamma) const {
  DGM_REQUIRE(gamma > 0, "residual_functional: gamma must be positive");
  Eigen::MatrixXd reg = gram_.g;
  reg.diagonal().array() += gamma;
  Eigen::LLT<Eigen::MatrixXd> llt(reg);
  double acc = 0;
  for (int m = 0; m < obs_.size(); ++m) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(obs_.size());
    f(m) = 1.0 / obs_.v_norm_of_basis(m);
    Eigen::VectorXd x = llt.solve(f);
    acc += gamma * gamma * x.squaredNorm();
  }
  return acc;
}

double LinearizedSystem::full_residual(double gamma, const Eigen::VectorXd& f) const {
  Eigen::MatrixXd reg = gram_.g;
  reg.diagonal().array() += gamma;
  Eigen::VectorXd x = Eigen::LLT<Eigen::MatrixXd>(reg).solve(f);
  return (gram_.g * x - f).norm();
}

std::pair<double, double> LinearizedSystem::truncated_residual(double gamma,
                                                               const Eigen::VectorXd& f) const {
  Eigen::MatrixXd reg = gram_.g;
  reg.diagonal().array() += gamma;
  Eigen::VectorXd x = Eigen::LLT<Eigen::MatrixXd>(reg).solve(f);
  Eigen::VectorXd truncated = a_m_ * (a_m_.transpose() * x);
  double res = (truncated - f).norm();
  double trunc_term = (gram_.g * x - truncated).norm();
  return {res, trunc_term};
}

RightInverse LinearizedSystem::right_inverse(double gamma) const {
  RightInverse ri;
  ri.gamma = gamma;
  ri.m_ctrl = ctrl_.dim();
  Eigen::MatrixXd reg = gram_.g;
  reg.diagonal().array() += gamma;
  Eigen::LLT<Eigen::MatrixXd> llt(reg);
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(obs_.size(), obs_.size()));
  ri.r = a_m_.transpose() * inv;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(ri.r);
  ri.norm = svd.singularValues()(0);
  Eigen::JacobiSVD<Eigen::MatrixXd> svda(a_m_);
  ri.a_norm = svda.singularValues()(0);
  return ri;
}

Eigen::VectorXd LinearizedSystem::apply_right_inverse(const RightInverse& ri,
                                                      const Eigen::VectorXd& f) const {
  return ri.r * f;
}

double smooth_cutoff(double t, double nu) {
  double lo = 1.5 * nu, hi = 2.0 * nu;
  if (t <= lo) return 1.0;
  if (t >= hi) return 0.0;
  double s = (t - lo) / (hi - lo);
  double step = s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
  return 1.0 - step;
}

GammaSelection select_gamma(const std::vector<std::unique_ptr<LinearizedSystem>>& systems,
                            const GoodSetThresholds& th, double eps1, int max_iter) {
  DGM_REQUIRE(!systems.empty(), "select_gamma: no cached systems");
  auto mass_at = [&](double gamma) {
    int good = 0;
    for (const auto& sys : systems)
      if (sys->residual_functional(gamma) <= th.nu()) ++good;
    return static_cast<double>(good) / static_cast<double>(systems.size());
  };
  GammaSelection sel;
  // F_gamma decreases as gamma decreases, so walk down until the mass
  // target is met, then bisect for the largest admissible gamma.
  double hi = 1.0;
  double lo = hi;
  double target = 1.0 - eps1;
  for (int it = 0; it < max_iter; ++it) {
    double m = mass_at(lo);
    if (m >= target) {
      sel.converged = true;
      break;
    }
    lo *= 0.25;
    DGM_REQUIRE(lo > 1e-300, "select_gamma: gamma underflow before reaching the mass target");
  }
  if (!sel.converged) {
    sel.gamma = lo;
    sel.mass = mass_at(lo);
    return sel;
  }
  if (lo == hi) {
    sel.gamma = hi;
    sel.mass = mass_at(hi);
    return sel;
  }
  for (int it = 0; it < max_iter; ++it) {
    double mid = std::sqrt(lo * hi);
    if (mass_at(mid) >= target)
      lo = mid;
    else
      hi = mid;
  }
  sel.gamma = lo;
  sel.mass = mass_at(lo);
  return sel;
}

}  // namespace degenmix
