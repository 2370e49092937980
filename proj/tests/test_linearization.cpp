#include <cmath>

#include "degenmix/linearization.hpp"
#include "doctest.h"

using namespace degenmix;

namespace {

NoiseSpec ns_noise(int cutoff, double b = 0.3) {
  NoiseSpec spec;
  spec.kind = FieldKind::DivFree2D;
  spec.torus = TorusSpec::square2d();
  spec.cutoff = cutoff;
  spec.channels = {{WaveVector(1, 0), false, b},
                   {WaveVector(-1, 0), false, b},
                   {WaveVector(1, 1), false, b},
                   {WaveVector(-1, -1), false, b}};
  spec.temporal.kind = TemporalKind::HaarAlg;
  spec.temporal.C = 1.0;
  spec.temporal.q = 1.5;
  spec.j_max = 6;
  return spec;
}

ModelParams ns_params(double nu = 0.5) {
  ModelParams p;
  p.model = Model::NS2D;
  p.nu = nu;
  return p;
}

SolverConfig ns_solver(int cutoff = 5, int steps = 128) {
  SolverConfig c;
  c.cutoff = cutoff;
  c.grid = dealias_grid(cutoff, 2);
  c.steps_per_unit = steps;
  return c;
}

SpectralField random_div_free(const TorusSpec& torus, int cutoff, RngKey key) {
  SpectralField f(FieldKind::DivFree2D, torus, cutoff);
  std::uint64_t ctr = 0;
  for (std::size_t i = 0; i < f.n_modes(); ++i)
    for (int comp = 0; comp < 2; ++comp)
      f.at(f.mode_at(i), comp) = Complex(key.sym(ctr++), key.sym(ctr++));
  f.enforce_reality();
  return leray_project(f);
}

struct NsSetup {
  ModelParams params = ns_params();
  SolverConfig cfg = ns_solver();
  NoiseSpec noise = ns_noise(5);
  SpectralField u0;
  std::shared_ptr<NoisePath> path;
  std::shared_ptr<StateTrajectory> traj;

  explicit NsSetup(std::uint64_t seed) {
    u0 = random_div_free(TorusSpec::square2d(), cfg.cutoff, RngKey::root(seed));
    u0 *= 0.5;
    path = std::make_shared<NoisePath>(&noise, RngKey::root(seed).sub("eta"));
    auto res = resolve(params, cfg, u0, path.get());
    traj = std::make_shared<StateTrajectory>(std::move(res.traj));
  }
};

}  // namespace

TEST_CASE("tangent solve: zero data gives zero, linearity holds") {
  NsSetup s(11);
  TangentWorkspace ws(*s.traj);
  SpectralField z(FieldKind::DivFree2D, TorusSpec::square2d(), s.cfg.cutoff);
  SpectralField out = tangent_solve(ws, &z, nullptr, 0.0, 1.0);
  CHECK(hnorm(out) == 0.0);

  SpectralField v = random_div_free(TorusSpec::square2d(), s.cfg.cutoff, RngKey::root(12));
  SpectralField w = random_div_free(TorusSpec::square2d(), s.cfg.cutoff, RngKey::root(13));
  SpectralField lv = tangent_solve(ws, &v, nullptr, 0.0, 1.0);
  SpectralField lw = tangent_solve(ws, &w, nullptr, 0.0, 1.0);
  SpectralField combo = v;
  combo *= 0.3;
  combo.add_scaled(w, -1.7);
  SpectralField lcombo = tangent_solve(ws, &combo, nullptr, 0.0, 1.0);
  SpectralField expect = lv;
  expect *= 0.3;
  expect.add_scaled(lw, -1.7);
  expect -= lcombo;
  CHECK(hnorm(expect) < 1e-10 * std::max(1.0, hnorm(lcombo)));
}

TEST_CASE("tangent solve is the exact derivative of the discrete flow") {
  NsSetup s(21);
  TangentWorkspace ws(*s.traj);
  SpectralField v = random_div_free(TorusSpec::square2d(), s.cfg.cutoff, RngKey::root(22));
  SpectralField lin = tangent_solve(ws, &v, nullptr, 0.0, 1.0);
  std::vector<double> errs, hs;
  for (double h : {1e-2, 1e-3, 1e-4}) {
    SpectralField up = s.u0;
    up.add_scaled(v, h);
    auto res = resolve(s.params, s.cfg, up, s.path.get(), nullptr, {0.0, 1.0, false});
    SpectralField diff = res.u1;
    diff -= s.traj->final_state();
    diff.add_scaled(lin, -h);
    errs.push_back(hnorm(diff));
    hs.push_back(h);
  }
  double order = std::log(errs[0] / errs[2]) / std::log(hs[0] / hs[2]);
  CHECK(order >= 1.9);
}

TEST_CASE("heat oracle: tangent and adjoint reduce to diagonal decay on the zero trajectory") {
  ModelParams params = ns_params(0.7);
  SolverConfig cfg = ns_solver(4, 512);
  SpectralField zero(FieldKind::DivFree2D, TorusSpec::square2d(), 4);
  auto res = resolve(params, cfg, zero, nullptr);
  TangentWorkspace ws(res.traj);

  WaveVector l(2, 1);
  SpectralField v0 = ns_basis_field(TorusSpec::square2d(), 4, l);
  double lam = laplace_eigenvalue(TorusSpec::square2d(), l);
  SpectralField v1 = tangent_solve(ws, &v0, nullptr, 0.0, 1.0);
  CHECK(hnorm(v1) == doctest::Approx(std::exp(-params.nu * lam) * hnorm(v0)).epsilon(1e-5));

  AdjointSolution adj = adjoint_solve(ws, v0, 0.0, 1.0, false);
  CHECK(hnorm(adj.p0) == doctest::Approx(std::exp(-params.nu * lam) * hnorm(v0)).epsilon(1e-5));
}

TEST_CASE("duality: tangent and adjoint agree to round-off") {
  NsSetup s(31);
  TangentWorkspace ws(*s.traj);
  for (int rep = 0; rep < 25; ++rep) {
    SpectralField v0 = random_div_free(TorusSpec::square2d(), s.cfg.cutoff, RngKey::root(100 + rep));
    SpectralField w1 = random_div_free(TorusSpec::square2d(), s.cfg.cutoff, RngKey::root(200 + rep));
    SpectralField rv = tangent_solve(ws, &v0, nullptr, 0.0, 1.0);
    SpectralField rw = adjoint_solve(ws, w1, 0.0, 1.0, false).p0;
    double lhs = hdot(rv, w1);
    double rhs = hdot(v0, rw);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-11));
  }
  // Control pairing: <A zeta, w1> = sum_n dt <zeta_n, y_n>.
  ControlPath g;
  g.t0 = 0.0;
  g.dt = s.traj->dt();
  g.basis = {s.noise.phi(0), s.noise.phi(2)};
  g.values = Eigen::MatrixXd::Zero(2, s.traj->n_steps());
  RngKey gk = RngKey::root(999);
  for (int n = 0; n < s.traj->n_steps(); ++n) {
    g.values(0, n) = gk.sym(2 * n);
    g.values(1, n) = gk.sym(2 * n + 1);
  }
  SpectralField w1 = random_div_free(TorusSpec::square2d(), s.cfg.cutoff, RngKey::root(300));
  SpectralField av = tangent_solve(ws, nullptr, &g, 0.0, 1.0);
  AdjointSolution adj = adjoint_solve(ws, w1, 0.0, 1.0, true);
  double lhs = hdot(av, w1);
  double rhs = 0.0;
  for (int n = 0; n < s.traj->n_steps(); ++n) {
    SpectralField zn(FieldKind::DivFree2D, TorusSpec::square2d(), s.cfg.cutoff);
    zn.add_scaled(g.basis[0], g.values(0, n));
    zn.add_scaled(g.basis[1], g.values(1, n));
    rhs += s.traj->dt() * hdot(zn, adj.w_cells[static_cast<std::size_t>(n)]);
  }
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-11));
}

TEST_CASE("gramian: heat closed form, PSD, and Loewner monotonicity in the channels") {
  // Zero trajectory: G is diagonal with entries (1 - e^{-2 nu lam}) / (2 nu lam).
  ModelParams params = ns_params(0.6);
  SolverConfig cfg = ns_solver(3, 256);
  SpectralField zero(FieldKind::DivFree2D, TorusSpec::square2d(), 3);
  auto res = resolve(params, cfg, zero, nullptr);
  TangentWorkspace ws(res.traj);
  ObservationBasis obs = ns_observation_basis(TorusSpec::square2d(), 3, 2);

  // Full truncated space as the observed channels.
  std::vector<SpectralField> channels;
  for (const auto& f : obs.fields) channels.push_back(f);
  GramianMatrix gm = gramian(ws, obs, channels, 1.0, 2);
  for (int m = 0; m < obs.size(); ++m) {
    double lam = obs.lambda[static_cast<std::size_t>(m)];
    double expect = (1.0 - std::exp(-2.0 * params.nu * lam)) / (2.0 * params.nu * lam);
    CHECK(gm.g(m, m) == doctest::Approx(expect).epsilon(2e-3));
    for (int n = 0; n < obs.size(); ++n)
      if (n != m) CHECK(std::abs(gm.g(m, n)) < 1e-12);
  }
  CHECK(gm.min_eig >= 0.0);
  CHECK(gm.eigs(0) >= -1e-10 * gm.trace);

  // Enlarging the channel set never decreases eigenvalues.
  std::vector<SpectralField> fewer(channels.begin(), channels.begin() + 3);
  GramianMatrix gm_small = gramian(ws, obs, fewer, 1.0, 2);
  for (int i = 0; i < obs.size(); ++i) CHECK(gm_small.eigs(i) <= gm.eigs(i) + 1e-12);
}

TEST_CASE("tikhonov right inverse: resolvent bound, residual monotonicity, pseudo-inverse limit") {
  NsSetup s(41);
  ObservationBasis obs = ns_observation_basis(TorusSpec::square2d(), s.cfg.cutoff, 2);
  ControlBasis ctrl = make_control_basis(s.noise, {0, 1, 2, 3}, 2, s.cfg.cutoff);
  LinearizedSystem sys(*s.traj, obs, s.noise, ctrl, 1.0, 2);

  // ||R_{M,gamma}|| <= ||A|| / gamma.
  for (double gamma : {1e-1, 1e-2, 1e-3}) {
    RightInverse ri = sys.right_inverse(gamma);
    CHECK(ri.norm <= ri.a_norm / gamma * (1 + 1e-9));
  }
  // gamma large: ||R f|| -> 0 like 1/gamma.
  Eigen::VectorXd f = Eigen::VectorXd::Zero(obs.size());
  f(0) = 1.0;
  RightInverse r1 = sys.right_inverse(1e3);
  CHECK((r1.r * f).norm() < 1e-3);

  // Residual ||G(G+gamma)^-1 f - f|| is non-increasing as gamma decreases.
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::VectorXd fr(obs.size());
    RngKey key = RngKey::root(4000 + rep);
    for (int i = 0; i < fr.size(); ++i) fr(i) = key.sym(static_cast<std::uint64_t>(i));
    double prev = 1e300;
    for (double gamma : {1.0, 1e-1, 1e-2, 1e-3, 1e-4}) {
      double cur = sys.full_residual(gamma, fr);
      CHECK(cur <= prev + 1e-12);
      prev = cur;
    }
  }
  // F_gamma is monotone too.
  CHECK(sys.residual_functional(1e-2) <= sys.residual_functional(1e-1) + 1e-12);
}

TEST_CASE("tikhonov limit recovers the pseudo-inverse on a full-rank toy operator") {
  // Random 8 x 12 full-row-rank A: as gamma -> 0 with the full control
  // space, A^T (A A^T + gamma)^-1 f -> A^+ f and the residual vanishes.
  Eigen::MatrixXd a(8, 12);
  RngKey key = RngKey::root(77);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 12; ++j) a(i, j) = key.sym(static_cast<std::uint64_t>(i * 12 + j));
  Eigen::MatrixXd g = a * a.transpose();
  Eigen::VectorXd f(8);
  for (int i = 0; i < 8; ++i) f(i) = key.sym(1000 + static_cast<std::uint64_t>(i));
  Eigen::MatrixXd pinv = a.transpose() * g.inverse();  // Moore-Penrose for full row rank
  for (double gamma : {1e-6, 1e-9}) {
    Eigen::MatrixXd reg = g;
    reg.diagonal().array() += gamma;
    Eigen::VectorXd x = a.transpose() * reg.llt().solve(f);
    CHECK((x - pinv * f).norm() < 1e-4 * pinv.norm());
    CHECK((a * x - f).norm() < 1e-5);
  }
}

TEST_CASE("residual functional thresholds and the smooth cutoff plateaus") {
  GoodSetThresholds th;
  th.eps2 = 0.1;
  CHECK(th.nu() == doctest::Approx(3.125e-4));
  CHECK(classify_residual(0.5 * th.nu(), th) == GoodSetClass::Good);
  CHECK(classify_residual(1.5 * th.nu(), th) == GoodSetClass::Boundary);
  CHECK(classify_residual(3.0 * th.nu(), th) == GoodSetClass::Bad);
  double nu = th.nu();
  CHECK(smooth_cutoff(0.0, nu) == 1.0);
  CHECK(smooth_cutoff(1.49 * nu, nu) == 1.0);
  CHECK(smooth_cutoff(2.01 * nu, nu) == 0.0);
  double mid = smooth_cutoff(1.75 * nu, nu);
  CHECK(mid > 0.0);
  CHECK(mid < 1.0);
  // Smooth: C^1 at the plateau edges (finite difference of the derivative).
  double h = 1e-7 * nu;
  CHECK(std::abs(smooth_cutoff(1.5 * nu + h, nu) - smooth_cutoff(1.5 * nu - h, nu)) < 1e-6);
}

TEST_CASE("cgl duality in H1 and the constant pairing invariant") {
  ModelParams params;
  params.model = Model::CGL3D;
  params.nu = 1.0;
  params.gamma = 1.0;
  params.c = 1.0;
  params.m = 2;
  SolverConfig cfg;
  cfg.cutoff = 1;
  cfg.grid = dealias_grid(1, 5);
  cfg.steps_per_unit = 128;
  TorusSpec torus = TorusSpec::cube3d();
  SpectralField u0(FieldKind::Complex3D, torus, 1);
  u0.at(WaveVector(0, 0, 0), 0) = Complex(0.4, 0.1);
  u0.at(WaveVector(1, 0, 0), 0) = Complex(0.2, -0.3);
  u0.at(WaveVector(-1, 0, 0), 0) = Complex(0.1, 0.2);
  auto res = resolve(params, cfg, u0, nullptr);
  TangentWorkspace ws(res.traj);

  SpectralField v0(FieldKind::Complex3D, torus, 1);
  v0.at(WaveVector(0, 1, 0), 0) = Complex(1.0, 0.5);
  SpectralField w1(FieldKind::Complex3D, torus, 1);
  w1.at(WaveVector(0, 0, 1), 0) = Complex(-0.3, 0.8);
  w1.at(WaveVector(0, 0, 0), 0) = Complex(0.2, 0.0);

  // L2 duality.
  SpectralField rv = tangent_solve(ws, &v0, nullptr, 0.0, 1.0);
  SpectralField rw = adjoint_solve(ws, w1, 0.0, 1.0, false).p0;
  CHECK(hdot(rv, w1) == doctest::Approx(hdot(v0, rw)).epsilon(1e-11));

  // H1 duality via the weighted adjoint.
  auto h1dot = [](const SpectralField& x, const SpectralField& y) { return sobolev_dot(x, y, 1); };
  SpectralField rw1 = dus_adjoint(ws, w1, 0.0, 1.0, 1);
  CHECK(h1dot(rv, w1) == doctest::Approx(h1dot(v0, rw1)).epsilon(1e-11));

  // (v(t), w(t))_1 does not depend on t: exact against the restarted
  // propagator (the transpose identity), and equal to the full-run pairing
  // up to the two-step restart error.
  double ref = h1dot(rv, w1);
  for (double t : {0.25, 0.5, 0.75}) {
    SpectralField vt = tangent_solve(ws, &v0, nullptr, 0.0, t);
    SpectralField wt = dus_adjoint(ws, w1, t, 1.0, 1);
    SpectralField v1r = tangent_solve(ws, &vt, nullptr, t, 1.0);
    CHECK(h1dot(vt, wt) == doctest::Approx(h1dot(v1r, w1)).epsilon(1e-10));
    CHECK(h1dot(vt, wt) == doctest::Approx(ref).epsilon(5e-3));
  }
}

TEST_CASE("select_gamma reaches the mass target on cached systems") {
  NsSetup s(51);
  ObservationBasis obs = ns_observation_basis(TorusSpec::square2d(), s.cfg.cutoff, 2);
  ControlBasis ctrl = make_control_basis(s.noise, {0, 1, 2, 3}, 1, s.cfg.cutoff);
  std::vector<std::unique_ptr<LinearizedSystem>> systems;
  for (int i = 0; i < 3; ++i) {
    NoisePath eta(&s.noise, RngKey::root(600 + i));
    auto res = resolve(s.params, s.cfg, s.u0, &eta);
    systems.push_back(std::make_unique<LinearizedSystem>(res.traj, obs, s.noise, ctrl, 1.0, 2));
  }
  GoodSetThresholds th;
  GammaSelection sel = select_gamma(systems, th, 0.2, 48);
  CHECK(sel.converged);
  CHECK(sel.mass >= 0.8);
  CHECK(sel.gamma > 0.0);
}
