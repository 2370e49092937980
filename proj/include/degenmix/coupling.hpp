#pragma once

#include <functional>
#include <memory>

#include "degenmix/linearization.hpp"
#include "degenmix/transport.hpp"

namespace degenmix {

// Parameter tuple of the coupled-step construction. b, N, B, eps and the
// weight plateau M_k are derived members; validate() enforces the
// smallness constraints on (q, gamma, nu) and the plateau bound.
struct CouplingConfig {
  double d = 0.02;      // close-pair threshold
  double q = 0.5;       // squeezing factor, in (0, 1/2]
  double a = 0.5;       // dissipation constant from (H2)
  double R = 1.0;       // radius of the invariant ball in the coupling norm
  double gamma = 0.8;   // Holder exponent of the TV bound
  double nu = 0.05;     // squeezing failure budget
  double p = 0.25;      // far-ring progress probability (estimated)
  double eps2 = 0.1;    // right-inverse tolerance; nu_eps2 = eps2^2/32
  double delta = 0.0;   // delta-norm parameter of the coupling metric

  double b() const { return 0.5 * (a + 1.0); }
  int levels_n() const;           // least N with b^N R <= d/2
  double big_b() const { return 2.0 / p; }
  double eps_weight() const;      // epsilon of the M_k ladder
  double m_k(int k) const;        // plateau weights, -N <= k <= -1
  void validate() const;
};

struct PairLevel {
  bool infinite = false;
  int n = 0;  // close levels n >= 0, far rings -N <= n <= -1

  bool close() const { return infinite || n >= 0; }
};

// Level of a pair in the disjoint partition: n = inf iff u = u'; close
// levels by dyadic distance rungs; far rings by the max norm. Throws
// std::domain_error when the pair lies outside the R-ball.
PairLevel classify_pair(const SpectralField& u, const SpectralField& uprime,
                        const CouplingConfig& cfg);

// Weight function F: 0 at infinity, (q^n d)^{gamma/2} on close levels,
// M_k on the far rings.
double coupling_weight(const CouplingConfig& cfg, const PairLevel& lvl);

// Everything the transformed branch needs, fixed once per experiment.
struct PhiContext {
  ModelParams params;
  SolverConfig cfg;
  const NoiseSpec* noise = nullptr;
  ObservationBasis obs;
  ControlBasis ctrl;
  double gamma_tik = 1e-3;
  GoodSetThresholds thresholds;
  double horizon = 1.0;
  int threads = 1;
};

struct PhiResult {
  bool zero = true;             // Phi = 0 (bad set or u' = u)
  Eigen::VectorXd coords;       // control coordinates of Phi
  double norm_e = 0.0;          // E-norm of Phi
  double f_gamma = 0.0;
  GoodSetClass cls = GoodSetClass::Bad;
  double cutoff = 0.0;          // smooth cutoff value h(F_gamma)
  double residual = 0.0;        // homological residual on the obs window
  double f_out = 0.0;           // out-of-window part of the target f
  std::shared_ptr<LinearizedSystem> sys;  // cached per-(u,eta) system
  std::shared_ptr<StateTrajectory> traj;  // base trajectory of u under eta
};

// Phi^{u,u'}(eta) = -h(F_gamma) R_{M,gamma} (D_u S)(u,eta)(u'-u); zero on
// the bad set and for u' = u.
PhiResult phi_map(const PhiContext& ctx, const SpectralField& u, const SpectralField& uprime,
                  const NoisePath& eta, std::shared_ptr<LinearizedSystem> reuse = nullptr,
                  std::shared_ptr<StateTrajectory> reuse_traj = nullptr);

enum class Branch { TrivialFar, TransformedGood, IdentityBad };

struct StepOutcome {
  SpectralField v, vprime;
  Branch branch = Branch::TrivialFar;
  PairLevel level_before, level_after;
  bool after_in_domain = true;
  double dist_before = 0.0, dist_after = 0.0;
  double phi_norm = 0.0, residual = 0.0, f_gamma = 0.0;
  int omega = 1;  // 1: good-set event, 3: bad-set event (the TV budget
                  // plays the role of the maximal-coupling mismatch)
};

// One coupled transition: far/identical pairs ride the same noise; close
// pairs get the homological correction eta' = eta + Phi.
StepOutcome coupled_step(const PhiContext& ctx, const CouplingConfig& cfg, const SpectralField& u,
                         const SpectralField& uprime, RngKey step_key);

// Kantorovich functional between equal-size empirical measures under a
// user cost; exact assignment optimum averaged per atom.
double kantorovich_functional(
    const std::vector<SpectralField>& mu, const std::vector<SpectralField>& nu,
    const std::function<double(const SpectralField&, const SpectralField&)>& cost);

// ---------- Total-variation estimate on the control slice ----------

struct TvEstimate {
  double tv = 0.0;
  double out_mass = 0.0;   // pushforward mass escaping the slice support
  double fail_rate = 0.0;  // preimage / Jacobian failures
  bool fallback = false;   // binned two-sample route was used
};

// Change-of-variables estimator of TV(l, Psi_* l) restricted to an M-dim
// decomposable slice with coordinate scales beta_k and the xi marginal law.
// `phi` maps slice coordinates to the M coordinates of Phi.
TvEstimate tv_slice_estimate(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& phi,
                             const std::vector<double>& beta, int n_mc, RngKey key);

// Dense tensor-grid quadrature of the same quantity (M <= 2): the oracle
// route for validating the Monte-Carlo estimator.
TvEstimate tv_slice_quadrature(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& phi,
                               const std::vector<double>& beta, int grid_per_dim);

// Binned two-sample L1 upper bound (the fallback when the slice map is not
// a contraction perturbation).
TvEstimate tv_binned_l1(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& phi,
                        const std::vector<double>& beta, int n_mc, int bins_per_dim, RngKey key);

struct TvSlopeReport {
  std::vector<double> deltas;
  std::vector<double> tv;        // averaged over eta samples
  double beta_hat = 0.0;         // log-log slope
  double beta_ci_lo = 0.0, beta_ci_hi = 0.0;
  bool monotone = true;          // tv non-increasing as delta halves
};

// Engine-level estimate: TV(l, Psi^{u,u+delta v}_* l) over dyadic delta
// levels, with the slice spanned by the control basis of ctx.
TvSlopeReport tv_distance_estimate(const PhiContext& ctx, const SpectralField& u,
                                   const SpectralField& dir_unit,
                                   const std::vector<double>& deltas, int n_eta, int n_mc,
                                   RngKey key);

// ---------- Contraction measurement ----------

struct ContractionSample {
  PairLevel before;
  PairLevel after;
  bool after_known = true;
  double f_before = 0.0;
  double f_after = 0.0;
};

struct LevelStats {
  int level = 0;  // INT_MIN sentinel unused; far rings negative
  int count = 0;
  double p_up = 0.0;     // level increased by >= 1
  double p_drop2 = 0.0;  // level dropped by >= 2
  double mean_ratio = 0.0;
};

struct ContractionReport {
  std::vector<LevelStats> levels;
  std::vector<ContractionSample> samples;
  double kappa_hat = 0.0;
  double kappa_ci_hi = 0.0;
  std::vector<int> empty_levels;
};

ContractionReport contraction_from_samples(const CouplingConfig& cfg,
                                           std::vector<ContractionSample> samples,
                                           int bootstrap_reps, RngKey key);

// Runs coupled steps over a supplied ensemble of pairs and reduces to the
// per-level statistics and the Kantorovich contraction factor.
ContractionReport contraction_estimate(
    const PhiContext& ctx, const CouplingConfig& cfg,
    const std::vector<std::pair<SpectralField, SpectralField>>& pairs, RngKey key,
    int bootstrap_reps = 200);

}  // namespace degenmix
