#include "degenmix/scenarios.hpp"

#include <cmath>
#include <sstream>

#include "degenmix/stats.hpp"
#include "degenmix/util.hpp"

namespace degenmix {

ModelParams model_from_config(const Json& cfg) {
  ModelParams p;
  std::string kind = require_string(cfg, "model.kind");
  if (kind == "ns2d")
    p.model = Model::NS2D;
  else if (kind == "cgl3d")
    p.model = Model::CGL3D;
  else
    throw ConfigError("model.kind must be ns2d or cgl3d");
  p.nu = require_double(cfg, "model.nu");
  if (p.model == Model::CGL3D) {
    p.gamma = require_double(cfg, "model.gamma");
    p.c = require_double(cfg, "model.c");
    p.m = static_cast<int>(get_int(cfg, "model.m", 2));
  }
  p.validate();
  return p;
}

TorusSpec torus_from_config(const Json& cfg, int dims) {
  TorusSpec t;
  t.dims = dims;
  const Json* a = nullptr;
  if (cfg.contains("torus") && cfg["torus"].contains("a")) a = &cfg["torus"]["a"];
  for (int i = 0; i < dims; ++i) {
    t.a[static_cast<std::size_t>(i)] =
        a && a->is_array() && static_cast<int>(a->size()) > i ? (*a)[static_cast<std::size_t>(i)].get<double>() : 1.0;
    if (t.a[static_cast<std::size_t>(i)] <= 0) throw ConfigError("torus.a entries must be positive");
  }
  return t;
}

SolverConfig solver_from_config(const Json& cfg, const ModelParams& params) {
  SolverConfig sc;
  sc.cutoff = static_cast<int>(require_int(cfg, "solver.cutoff"));
  sc.grid = static_cast<int>(get_int(cfg, "solver.grid",
                                     dealias_grid(sc.cutoff, params.nonlinearity_degree())));
  sc.steps_per_unit = static_cast<int>(get_int(cfg, "solver.steps_per_unit", 256));
  std::string integ = get_string(cfg, "solver.integrator", "imex_cn");
  if (integ == "imex_cn")
    sc.integrator = Integrator::ImexCn;
  else if (integ == "etdrk2")
    sc.integrator = Integrator::Etdrk2;
  else
    throw ConfigError("solver.integrator must be imex_cn or etdrk2");
  try {
    sc.validate(params);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("solver: ") + e.what());
  }
  return sc;
}

NoiseSpec noise_from_config(const Json& cfg, const ModelParams& params, const TorusSpec& torus,
                            int cutoff) {
  NoiseSpec ns;
  ns.kind = params.field_kind();
  ns.torus = torus;
  ns.cutoff = cutoff;
  const Json& modes = require_field(cfg, "noise.modes");
  if (!modes.is_array() || modes.empty()) throw ConfigError("noise.modes must be a nonempty array");
  const Json& bs = require_field(cfg, "noise.b");
  if (!bs.is_array() || bs.size() != modes.size())
    throw ConfigError("noise.b must list one amplitude per mode");
  for (std::size_t i = 0; i < modes.size(); ++i) {
    NoiseChannel ch;
    const Json& m = modes[i];
    if (!m.is_array() || static_cast<int>(m.size()) < torus.dims)
      throw ConfigError("noise.modes entries must have torus dimension");
    for (int d = 0; d < torus.dims; ++d) ch.l[d] = m[static_cast<std::size_t>(d)].get<int>();
    ch.b = bs[i].get<double>();
    if (cfg.contains("noise") && cfg["noise"].contains("imaginary")) {
      const Json& im = cfg["noise"]["imaginary"];
      if (im.is_array() && i < im.size()) ch.imaginary = im[i].get<bool>();
    }
    ns.channels.push_back(ch);
  }
  std::string temporal = get_string(cfg, "noise.temporal", "haar_alg");
  if (temporal == "haar_exp") {
    ns.temporal.kind = TemporalKind::HaarExp;
    ns.temporal.A = require_double(cfg, "noise.A");
  } else if (temporal == "haar_alg") {
    ns.temporal.kind = TemporalKind::HaarAlg;
    ns.temporal.C = get_double(cfg, "noise.C", 1.0);
    ns.temporal.q = require_double(cfg, "noise.q");
  } else if (temporal == "jump") {
    ns.temporal.kind = TemporalKind::JumpShiftedHaar;
    ns.temporal.A = require_double(cfg, "noise.A");
    const Json& sh = require_field(cfg, "noise.shifts");
    for (const auto& s : sh) ns.temporal.shifts.push_back(s.get<double>());
  } else {
    throw ConfigError("noise.temporal must be haar_exp, haar_alg or jump");
  }
  ns.j_max = static_cast<int>(get_int(cfg, "noise.j_max", 10));
  try {
    ns.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("noise: ") + e.what());
  }
  return ns;
}

namespace {

std::vector<double> eps_grid_from(const Json& cfg) {
  std::vector<double> grid;
  if (cfg.contains("observability") && cfg["observability"].contains("eps_grid")) {
    for (const auto& v : cfg["observability"]["eps_grid"]) grid.push_back(v.get<double>());
  } else {
    int lo = static_cast<int>(get_int(cfg, "observability.eps_pow_lo", 4));
    int hi = static_cast<int>(get_int(cfg, "observability.eps_pow_hi", 9));
    for (int p = lo; p <= hi; ++p) grid.push_back(std::ldexp(1.0, -p));
  }
  return grid;
}

// Deterministic pseudo-random divergence-free (or complex) field with unit
// H-norm, supported on |l_i| <= k_span.
SpectralField random_unit_field(const ModelParams& params, const TorusSpec& torus, int cutoff,
                                int k_span, RngKey key) {
  ObservationBasis basis = params.model == Model::NS2D
                               ? ns_observation_basis(torus, cutoff, k_span)
                               : cgl_observation_basis(torus, cutoff, k_span);
  SpectralField f(params.field_kind(), torus, cutoff);
  for (int i = 0; i < basis.size(); ++i)
    f.add_scaled(basis.fields[static_cast<std::size_t>(i)], key.sym(static_cast<std::uint64_t>(i)));
  double n = hnorm(f);
  DGM_REQUIRE(n > 0, "random_unit_field: degenerate draw");
  f *= 1.0 / n;
  return f;
}

}  // namespace

ScenarioResult scenario_observability(const Json& cfg, RngKey key, int threads) {
  (void)threads;
  ScenarioResult out;
  ModelParams params = model_from_config(cfg);
  TorusSpec torus = torus_from_config(cfg, params.model == Model::NS2D ? 2 : 3);
  int cutoff = static_cast<int>(get_int(cfg, "solver.cutoff", 8));
  NoiseSpec noise = noise_from_config(cfg, params, torus, cutoff);
  int n_samples = static_cast<int>(require_int(cfg, "observability.n_samples"));
  double s = get_double(cfg, "observability.s", 0.5);
  auto grid = eps_grid_from(cfg);

  ObservabilityReport rep = observability_statistic(noise, n_samples, s, grid, key);

  std::string csv = "eps,level,median_inv_norm,q95_inv_norm,singular_rate\n";
  for (const auto& row : rep.rows) {
    csv += fmt_double(row.eps) + "," + std::to_string(row.level) + "," +
           fmt_double(row.median_inv_norm) + "," + fmt_double(row.q95_inv_norm) + "," +
           fmt_double(row.singular_rate) + "\n";
  }
  out.bundle.add_artifact("observability.csv", csv);
  out.bundle.summary["theta_median"] = rep.theta_median;
  out.bundle.summary["theta_q95"] = rep.theta_q95;
  out.bundle.summary["n_samples"] = n_samples;
  out.bundle.add_verdict("theta_q95_below_1", rep.pass);
  return out;
}

ScenarioResult scenario_smallball(const Json& cfg, RngKey key, int threads) {
  (void)threads;
  ScenarioResult out;
  ModelParams params = model_from_config(cfg);
  TorusSpec torus = torus_from_config(cfg, params.model == Model::NS2D ? 2 : 3);
  int cutoff = static_cast<int>(get_int(cfg, "solver.cutoff", 8));
  NoiseSpec noise = noise_from_config(cfg, params, torus, cutoff);
  int n_samples = static_cast<int>(require_int(cfg, "smallball.n_samples"));
  std::vector<int> j_list;
  for (const auto& j : require_field(cfg, "smallball.j_list")) j_list.push_back(j.get<int>());

  auto fits = small_ball_curve(noise, j_list, n_samples, key);
  std::string csv = "level,r,p\n";
  bool pass = true;
  Json levels = Json::array();
  for (const auto& fit : fits) {
    for (std::size_t i = 0; i < fit.r.size(); ++i)
      csv += std::to_string(fit.level) + "," + fmt_double(fit.r[i]) + "," + fmt_double(fit.p[i]) +
             "\n";
    Json lj;
    lj["level"] = fit.level;
    lj["c_hat"] = fit.c_hat;
    lj["ci_lo"] = fit.c_ci_lo;
    lj["ci_hi"] = fit.c_ci_hi;
    levels.push_back(lj);
    if (!(fit.c_ci_lo > 0)) pass = false;
  }
  out.bundle.add_artifact("smallball.csv", csv);
  out.bundle.summary["levels"] = levels;
  out.bundle.add_verdict("exponent_positive_ci", pass);
  return out;
}

ScenarioResult scenario_saturate(const Json& cfg, RngKey key, int threads) {
  (void)key;
  (void)threads;
  ScenarioResult out;
  std::string kind = get_string(cfg, "model.kind", "ns2d");
  int window = static_cast<int>(require_int(cfg, "saturate.K"));
  ModeSet set;
  set.dims = kind == "ns2d" ? 2 : 3;
  for (const auto& m : require_field(cfg, "saturate.I")) {
    WaveVector l;
    for (int d = 0; d < set.dims; ++d) l[d] = m[static_cast<std::size_t>(d)].get<int>();
    set.elems.push_back(l);
  }
  SaturationResult res;
  if (kind == "ns2d") {
    TorusSpec torus = torus_from_config(cfg, 2);
    res = saturate_ns(torus, set, window);
  } else {
    res = saturate_cgl(set, window);
  }
  std::string csv = set.dims == 2 ? "iteration,l1,l2\n" : "iteration,l1,l2,l3\n";
  for (std::size_t it = 0; it < res.coverage.size(); ++it)
    for (const auto& l : res.coverage[it]) {
      csv += std::to_string(it) + "," + std::to_string(l[0]) + "," + std::to_string(l[1]);
      if (set.dims == 3) csv += "," + std::to_string(l[2]);
      csv += "\n";
    }
  out.bundle.add_artifact("coverage.csv", csv);
  out.bundle.summary["verdict"] = res.verdict;
  out.bundle.summary["window_full"] = res.window_full;
  out.bundle.summary["iterations"] = res.iterations;
  out.bundle.summary["used_rational"] = res.used_rational;
  out.bundle.summary["near_tie_warning"] = res.near_tie_warning;
  out.bundle.add_verdict("closed_form_matches_coverage", res.agrees);
  return out;
}

ScenarioResult scenario_gramian(const Json& cfg, RngKey key, int threads) {
  ScenarioResult out;
  ModelParams params = model_from_config(cfg);
  TorusSpec torus = torus_from_config(cfg, params.model == Model::NS2D ? 2 : 3);
  SolverConfig solver = solver_from_config(cfg, params);
  NoiseSpec noise = noise_from_config(cfg, params, torus, solver.cutoff);
  int k_obs = static_cast<int>(require_int(cfg, "gramian.k_obs"));
  int n_samples = static_cast<int>(get_int(cfg, "gramian.n_samples", 8));
  int burnin = static_cast<int>(get_int(cfg, "gramian.burnin", 4));
  double horizon = get_double(cfg, "gramian.horizon", 1.0);

  ObservationBasis obs = params.model == Model::NS2D
                             ? ns_observation_basis(torus, solver.cutoff, k_obs)
                             : cgl_observation_basis(torus, solver.cutoff, k_obs);
  std::vector<int> all_channels(static_cast<std::size_t>(noise.n_channels()));
  for (int i = 0; i < noise.n_channels(); ++i) all_channels[static_cast<std::size_t>(i)] = i;
  ControlBasis ctrl = make_control_basis(noise, all_channels,
                                         static_cast<int>(get_int(cfg, "gramian.ctrl_time_levels", 1)),
                                         solver.cutoff);

  std::vector<double> gamma_grid;
  if (cfg.contains("gramian") && cfg["gramian"].contains("gamma_grid"))
    for (const auto& g : cfg["gramian"]["gamma_grid"]) gamma_grid.push_back(g.get<double>());
  else
    gamma_grid = {1e-1, 1e-2, 1e-3, 1e-4};

  std::string spectra = "sample,index,eigenvalue\n";
  std::string residual = "sample,gamma,f_gamma\n";
  double min_eig = 1e300;
  bool psd_ok = true, monotone_ok = true;
  auto states = sample_absorbing_states(params, solver, noise, n_samples, burnin, key.sub("g"));
  for (int s = 0; s < n_samples; ++s) {
    NoisePath eta(&noise, key.sub("geta").sub(static_cast<std::uint64_t>(s)));
    auto res = resolve(params, solver, states[static_cast<std::size_t>(s)], &eta);
    LinearizedSystem sys(res.traj, obs, noise, ctrl, horizon, threads);
    const GramianMatrix& gm = sys.gram();
    for (int i = 0; i < gm.eigs.size(); ++i)
      spectra += std::to_string(s) + "," + std::to_string(i) + "," + fmt_double(gm.eigs(i)) + "\n";
    min_eig = std::min(min_eig, gm.min_eig);
    if (gm.eigs(0) < -1e-10 * gm.trace) psd_ok = false;
    double prev = 1e300;
    for (double g : gamma_grid) {
      double f = sys.residual_functional(g);
      residual += std::to_string(s) + "," + fmt_double(g) + "," + fmt_double(f) + "\n";
      if (f > prev + 1e-12) monotone_ok = false;  // decreasing as gamma decreases
      prev = f;
    }
  }
  out.bundle.add_artifact("spectra.csv", spectra);
  out.bundle.add_artifact("residual.csv", residual);
  out.bundle.summary["min_eigenvalue"] = min_eig;
  out.bundle.add_verdict("gramian_psd", psd_ok);
  out.bundle.add_verdict("gramian_min_eig_positive", min_eig > 0);
  out.bundle.add_verdict("residual_monotone_in_gamma", monotone_ok);
  return out;
}

ScenarioResult scenario_couple(const Json& cfg, RngKey key, int threads) {
  ScenarioResult out;
  ModelParams params = model_from_config(cfg);
  TorusSpec torus = torus_from_config(cfg, params.model == Model::NS2D ? 2 : 3);
  SolverConfig solver = solver_from_config(cfg, params);
  NoiseSpec noise = noise_from_config(cfg, params, torus, solver.cutoff);

  CouplingConfig cpl;
  cpl.d = require_double(cfg, "coupling.d");
  cpl.q = get_double(cfg, "coupling.q", 0.5);
  cpl.gamma = get_double(cfg, "coupling.gamma", 0.8);
  cpl.nu = get_double(cfg, "coupling.nu", 0.05);
  cpl.p = get_double(cfg, "coupling.p", 0.25);
  cpl.eps2 = get_double(cfg, "coupling.eps2", 0.1);

  int burnin = static_cast<int>(get_int(cfg, "coupling.burnin", 6));
  int n_states = static_cast<int>(get_int(cfg, "coupling.n_states", 24));
  auto pool = sample_absorbing_states(params, solver, noise, n_states, burnin, key.sub("pool"));

  // Dissipation constant and radius estimates feed the level partition.
  DissipativityReport dis = dissipativity_constant(params, solver, pool);
  cpl.a = std::min(0.95, dis.a_hat * 1.02);
  double rmax = 0;
  for (const auto& u : pool) rmax = std::max(rmax, delta_norm(u, cpl.delta));
  cpl.R = get_double(cfg, "coupling.R", rmax * 1.5);
  cpl.validate();

  PhiContext ctx;
  ctx.params = params;
  ctx.cfg = solver;
  ctx.noise = &noise;
  int k_obs = static_cast<int>(get_int(cfg, "coupling.k_obs", 3));
  ctx.obs = params.model == Model::NS2D ? ns_observation_basis(torus, solver.cutoff, k_obs)
                                        : cgl_observation_basis(torus, solver.cutoff, k_obs);
  std::vector<int> channels;
  if (cfg.contains("coupling") && cfg["coupling"].contains("ctrl_channels"))
    for (const auto& c : cfg["coupling"]["ctrl_channels"]) channels.push_back(c.get<int>());
  else
    for (int i = 0; i < noise.n_channels(); ++i) channels.push_back(i);
  ctx.ctrl = make_control_basis(noise, channels,
                                static_cast<int>(get_int(cfg, "coupling.ctrl_time_levels", 2)),
                                solver.cutoff);
  ctx.thresholds.eps2 = cpl.eps2;
  ctx.threads = threads;

  // Tikhonov gamma: explicit value or bisected for the good-set mass.
  double eps1 = get_double(cfg, "coupling.eps1", 0.2);
  if (cfg.contains("coupling") && cfg["coupling"].contains("gamma_tik")) {
    ctx.gamma_tik = cfg["coupling"]["gamma_tik"].get<double>();
  } else {
    int n_cal = static_cast<int>(get_int(cfg, "coupling.n_cal", 16));
    std::vector<std::unique_ptr<LinearizedSystem>> systems;
    for (int s = 0; s < n_cal; ++s) {
      NoisePath eta(&noise, key.sub("cal").sub(static_cast<std::uint64_t>(s)));
      auto res = resolve(params, solver, pool[static_cast<std::size_t>(s % pool.size())], &eta);
      systems.push_back(std::make_unique<LinearizedSystem>(res.traj, ctx.obs, noise, ctx.ctrl,
                                                           ctx.horizon, threads));
    }
    GammaSelection sel = select_gamma(systems, ctx.thresholds, eps1);
    ctx.gamma_tik = sel.gamma;
    out.bundle.summary["gamma_bisect_mass"] = sel.mass;
    out.bundle.summary["gamma_bisect_converged"] = sel.converged;
  }
  out.bundle.summary["gamma_tik"] = ctx.gamma_tik;
  out.bundle.summary["coupling_a"] = cpl.a;
  out.bundle.summary["coupling_R"] = cpl.R;
  out.bundle.summary["levels_N"] = cpl.levels_n();

  // Pair ensemble across levels.
  int n_close = static_cast<int>(get_int(cfg, "coupling.n_close_pairs", 64));
  int n_far = static_cast<int>(get_int(cfg, "coupling.n_far_pairs", 64));
  std::vector<std::pair<SpectralField, SpectralField>> pairs;
  for (int i = 0; i < n_close; ++i) {
    const SpectralField& u = pool[static_cast<std::size_t>(i) % pool.size()];
    SpectralField dir = random_unit_field(params, torus, solver.cutoff,
                                          std::min(solver.cutoff, k_obs + 2), key.sub("dir").sub(i));
    int level = i % 4;
    double delta = cpl.d * std::pow(cpl.q, level) * 0.9;
    SpectralField uprime = u;
    uprime.add_scaled(dir, delta);
    pairs.emplace_back(u, uprime);
  }
  int nlev = cpl.levels_n();
  for (int i = 0; i < n_far; ++i) {
    const SpectralField& base = pool[static_cast<std::size_t>(i) % pool.size()];
    int ring = -(1 + i % nlev);
    double target = cpl.R * std::pow(cpl.b(), nlev + ring) * 0.9;
    double cur = delta_norm(base, cpl.delta);
    SpectralField u = base;
    if (cur > 1e-12) u *= target / cur;
    SpectralField dir = random_unit_field(params, torus, solver.cutoff, 2, key.sub("fdir").sub(i));
    SpectralField uprime = u;
    uprime.add_scaled(dir, std::min(2.0 * cpl.d + 0.2 * target, 0.5 * target));
    pairs.emplace_back(u, uprime);
  }

  ContractionReport rep = contraction_estimate(ctx, cpl, pairs, key.sub("steps"),
                                               static_cast<int>(get_int(cfg, "coupling.bootstrap", 200)));

  std::string levels_csv = "level,count,p_up,p_drop2,mean_ratio\n";
  for (const auto& st : rep.levels)
    levels_csv += (st.level == INT32_MAX ? std::string("inf") : std::to_string(st.level)) + "," +
                  std::to_string(st.count) + "," + fmt_double(st.p_up) + "," +
                  fmt_double(st.p_drop2) + "," + fmt_double(st.mean_ratio) + "\n";
  out.bundle.add_artifact("levels.csv", levels_csv);

  Json kappa;
  kappa["kappa_hat"] = rep.kappa_hat;
  kappa["kappa_ci_hi"] = rep.kappa_ci_hi;
  kappa["empty_levels"] = rep.empty_levels;
  out.bundle.summary["kappa"] = kappa;
  out.bundle.add_verdict("kappa_below_1", rep.kappa_ci_hi < 1.0);
  return out;
}

ScenarioResult scenario_mixing(const Json& cfg, RngKey key, int threads) {
  ScenarioResult out;
  ModelParams params = model_from_config(cfg);
  TorusSpec torus = torus_from_config(cfg, params.model == Model::NS2D ? 2 : 3);
  SolverConfig solver = solver_from_config(cfg, params);
  NoiseSpec noise = noise_from_config(cfg, params, torus, solver.cutoff);

  EnsembleConfig ecfg;
  ecfg.n_traj = static_cast<int>(require_int(cfg, "mixing.n_traj"));
  ecfg.k_max = static_cast<int>(require_int(cfg, "mixing.k_max"));
  ecfg.proj_modes = static_cast<int>(get_int(cfg, "mixing.proj_modes", 20));
  ecfg.quarter_times = get_bool(cfg, "mixing.quarter_times", false);
  int burnin = static_cast<int>(get_int(cfg, "mixing.burnin", 8));
  int n_perm = static_cast<int>(get_int(cfg, "mixing.n_perm", 200));
  int boot = static_cast<int>(get_int(cfg, "mixing.bootstrap", 16));

  ModeProjector proj = make_projector(params, torus, solver.cutoff, ecfg.proj_modes);

  // Initial laws: Dirac at 0 and Dirac at a displaced state.
  SpectralField zero(params.field_kind(), torus, solver.cutoff);
  SpectralField bump = zero;
  double amp = get_double(cfg, "mixing.bump_amplitude", 1.0);
  {
    WaveVector l1 = params.model == Model::NS2D ? WaveVector(1, 0) : WaveVector(1, 0, 0);
    WaveVector l2 = params.model == Model::NS2D ? WaveVector(1, 1) : WaveVector(0, 1, 0);
    SpectralField b1 = params.model == Model::NS2D ? ns_basis_field(torus, solver.cutoff, l1)
                                                   : cgl_basis_field(torus, solver.cutoff, l1);
    SpectralField b2 = params.model == Model::NS2D ? ns_basis_field(torus, solver.cutoff, l2)
                                                   : cgl_basis_field(torus, solver.cutoff, l2);
    bump.add_scaled(b1, amp / std::max(hnorm(b1), 1e-12));
    bump.add_scaled(b2, 0.5 * amp / std::max(hnorm(b2), 1e-12));
  }

  std::vector<SpectralField> initA(static_cast<std::size_t>(ecfg.n_traj), zero);
  std::vector<SpectralField> initB(static_cast<std::size_t>(ecfg.n_traj), bump);

  EnsembleRun runA = run_ensemble(params, solver, noise, initA, ecfg, proj, key.sub("A"), threads);
  EnsembleRun runB = run_ensemble(params, solver, noise, initB, ecfg, proj, key.sub("B"), threads);

  // Reference ensembles: pre-burned from law A under independent streams,
  // then evolved in step with the measured ensembles.
  auto burn = [&](RngKey k2) {
    std::vector<SpectralField> states(static_cast<std::size_t>(ecfg.n_traj), zero);
    parallel_for(static_cast<std::size_t>(ecfg.n_traj), threads, [&](std::size_t t) {
      SpectralField u = zero;
      for (int k = 0; k < burnin; ++k) {
        NoisePath path(&noise, k2.sub(t).sub(static_cast<std::uint64_t>(k)));
        u = resolve(params, solver, u, &path, nullptr, {0.0, 1.0, false}).u1;
      }
      states[t] = u;
    });
    return states;
  };
  EnsembleRun runR1 = run_ensemble(params, solver, noise, burn(key.sub("burnR1")), ecfg, proj,
                                   key.sub("R1"), threads);
  EnsembleRun runR2 = run_ensemble(params, solver, noise, burn(key.sub("burnR2")), ecfg, proj,
                                   key.sub("R2"), threads);

  // Distance series and point CIs by trajectory bootstrap.
  auto dist_series = [&](const EnsembleRun& x, const EnsembleRun& y) {
    std::vector<double> d(static_cast<std::size_t>(ecfg.k_max) + 1, 0.0);
    parallel_for(d.size(), threads, [&](std::size_t k) {
      d[k] = dual_lipschitz_distance(x.snapshots[k], y.snapshots[k]);
    });
    return d;
  };
  std::vector<double> dA = dist_series(runA, runR1);
  std::vector<double> dB = dist_series(runB, runR1);
  std::vector<double> dFloor = dist_series(runR2, runR1);

  auto boot_ci = [&](const EnsembleRun& x, const EnsembleRun& y, int k) -> BootstrapCi {
    std::vector<double> vals(static_cast<std::size_t>(boot));
    std::uint64_t ctr = 0;
    RngKey bk = key.sub("boot").sub(static_cast<std::uint64_t>(k));
    for (int r = 0; r < boot; ++r) {
      Eigen::MatrixXd xs(x.snapshots[static_cast<std::size_t>(k)].rows(),
                         x.snapshots[static_cast<std::size_t>(k)].cols());
      Eigen::MatrixXd ys = xs;
      for (Eigen::Index i = 0; i < xs.rows(); ++i) {
        xs.row(i) = x.snapshots[static_cast<std::size_t>(k)].row(
            static_cast<Eigen::Index>(bk.below(static_cast<std::uint64_t>(xs.rows()), ctr++)));
        ys.row(i) = y.snapshots[static_cast<std::size_t>(k)].row(
            static_cast<Eigen::Index>(bk.below(static_cast<std::uint64_t>(xs.rows()), ctr++)));
      }
      vals[static_cast<std::size_t>(r)] = dual_lipschitz_distance(xs, ys);
    }
    return {quantile(vals, 0.025), quantile(vals, 0.975)};
  };

  LongCsv distances;
  for (int k = 0; k <= ecfg.k_max; ++k) {
    BootstrapCi ca = boot > 0 ? boot_ci(runA, runR1, k) : BootstrapCi{dA[static_cast<std::size_t>(k)], dA[static_cast<std::size_t>(k)]};
    distances.add("lawA_vs_ref", k, dA[static_cast<std::size_t>(k)], ca.lo, ca.hi);
    distances.add("lawB_vs_ref", k, dB[static_cast<std::size_t>(k)], 0, 0);
    distances.add("floor", k, dFloor[static_cast<std::size_t>(k)], 0, 0);
  }
  out.bundle.add_artifact("distances.csv", distances.str());

  RateFit fitA = mixing_rate_fit(dA, dFloor);
  RateFit fitB = mixing_rate_fit(dB, dFloor);
  bool joint_agree = fitA.gamma_ci_lo <= fitB.gamma_ci_hi && fitB.gamma_ci_lo <= fitA.gamma_ci_hi;

  Json rate;
  rate["gamma_A"] = fitA.gamma_hat;
  rate["gamma_A_ci"] = {fitA.gamma_ci_lo, fitA.gamma_ci_hi};
  rate["gamma_B"] = fitB.gamma_hat;
  rate["gamma_B_ci"] = {fitB.gamma_ci_lo, fitB.gamma_ci_hi};
  rate["C_A"] = fitA.c_hat;
  rate["floor"] = fitA.floor;
  rate["window_A"] = fitA.window;
  rate["window_B"] = fitB.window;
  rate["measurable"] = fitA.measurable && fitB.measurable;
  rate["joint_agree"] = joint_agree;
  rate["surrogate"] = "W1 with metric min(d,2) on leading-mode projection";
  rate["proj_modes"] = ecfg.proj_modes;
  out.bundle.add_artifact("rate.json", rate.dump(2) + "\n");
  out.bundle.summary["rate"] = rate;

  // Stationarity post burn-in and the negative control at the start.
  int ks = std::min(burnin, ecfg.k_max - 1);
  StationarityResult st = stationarity_check(runR1.snapshots[static_cast<std::size_t>(ks)],
                                             runR1.snapshots[static_cast<std::size_t>(ks) + 1],
                                             n_perm, key.sub("stat"));
  StationarityResult neg = stationarity_check(runB.snapshots[0], runB.snapshots[1], n_perm,
                                              key.sub("neg"));
  Json stat;
  stat["post_burnin_pvalue"] = st.p_value;
  stat["negative_control_pvalue"] = neg.p_value;

  bool periodicity_ok = true;
  if (ecfg.quarter_times) {
    Json phases = Json::array();
    for (int qi = 0; qi < 3; ++qi) {
      StationarityResult sp = stationarity_check(
          runR1.quarters[static_cast<std::size_t>(ks)][static_cast<std::size_t>(qi)],
          runR1.quarters[static_cast<std::size_t>(ks) + 1][static_cast<std::size_t>(qi)], n_perm,
          key.sub("phase").sub(static_cast<std::uint64_t>(qi)));
      phases.push_back(sp.p_value);
      if (sp.reject_at_1pct) periodicity_ok = false;
    }
    stat["phase_pvalues"] = phases;
  }
  out.bundle.summary["stationarity"] = stat;
  out.bundle.summary["solver_failures"] = runA.failures + runB.failures + runR1.failures + runR2.failures;

  out.bundle.add_verdict("gamma_A_positive", fitA.measurable && fitA.gamma_ci_lo > 0);
  out.bundle.add_verdict("gamma_B_positive", fitB.measurable && fitB.gamma_ci_lo > 0);
  out.bundle.add_verdict("rates_jointly_consistent", joint_agree);
  out.bundle.add_verdict("stationary_after_burnin", !st.reject_at_1pct);
  out.bundle.add_verdict("negative_control_rejects", neg.reject_at_1pct);
  if (ecfg.quarter_times) out.bundle.add_verdict("one_periodicity_grid", periodicity_ok);
  return out;
}

int run_experiment(Json cfg, const std::string& out_override, int threads_override) {
  std::string scenario;
  std::string outdir;
  try {
    scenario = require_string(cfg, "scenario");
    long long seed = require_int(cfg, "seed");
    (void)seed;
    outdir = !out_override.empty() ? out_override : get_string(cfg, "out", "out/" + scenario);
  } catch (const ConfigError&) {
    throw;  // exit 2 at the CLI boundary
  }
  int threads = threads_override > 0
                    ? threads_override
                    : static_cast<int>(get_int(cfg, "threads", env_threads()));
  RngKey key = RngKey::root(static_cast<std::uint64_t>(require_int(cfg, "seed")));

  ScenarioResult result;
  try {
    if (scenario == "observability")
      result = scenario_observability(cfg, key, threads);
    else if (scenario == "smallball")
      result = scenario_smallball(cfg, key, threads);
    else if (scenario == "saturate")
      result = scenario_saturate(cfg, key, threads);
    else if (scenario == "gramian")
      result = scenario_gramian(cfg, key, threads);
    else if (scenario == "couple")
      result = scenario_couple(cfg, key, threads);
    else if (scenario == "ns_mixing" || scenario == "cgl_mixing" || scenario == "mixing")
      result = scenario_mixing(cfg, key, threads);
    else
      throw ConfigError("unknown scenario: " + scenario);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    ReportBundle partial;
    partial.outdir = outdir;
    partial.summary["error"] = e.what();
    write_bundle(partial, cfg, "failed");
    return 3;
  }
  result.bundle.outdir = outdir;
  write_bundle(result.bundle, cfg, "ok");
  return result.bundle.all_pass() ? 0 : 1;
}

}  // namespace degenmix
