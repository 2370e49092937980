#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "degenmix/lattice.hpp"
#include "degenmix/noise.hpp"

namespace degenmix {

enum class Model { NS2D, CGL3D };

struct ModelParams {
  Model model = Model::NS2D;
  double nu = 0.5;
  double gamma = 1.0;  // CGL only
  double c = 1.0;      // CGL only
  int m = 2;           // CGL only, in {1,2}

  FieldKind field_kind() const { return model == Model::NS2D ? FieldKind::DivFree2D : FieldKind::Complex3D; }
  int nonlinearity_degree() const { return model == Model::NS2D ? 2 : 2 * m + 1; }
  void validate() const;
};

enum class Integrator { ImexCn, Etdrk2 };

struct SolverConfig {
  int cutoff = 8;
  int grid = 32;            // power of two, >= dealias_grid(cutoff, degree)
  int steps_per_unit = 256; // power of two so steps align with dyadic noise cells
  Integrator integrator = Integrator::ImexCn;
  double blowup_threshold = 1e6;
  double cfl_limit = 2.0;

  double dt() const { return 1.0 / steps_per_unit; }
  void validate(const ModelParams& p) const;
};

// Additive spatially-finite forcing given by per-step values on a list of
// basis fields; used for the coupling corrections and for control columns.
struct ControlPath {
  std::vector<SpectralField> basis;  // one spatial field per control channel
  Eigen::MatrixXd values;            // n_channels x n_steps, cell values on the solver grid
  double t0 = 0.0;
  double dt = 0.0;

  int n_channels() const { return static_cast<int>(basis.size()); }
  int n_steps() const { return static_cast<int>(values.cols()); }
  double l2_norm() const;  // L^2(J,H) norm of the piecewise-constant path
};

// Dense solver output: the base trajectory at every integrator step,
// as required by the tangent/adjoint solvers.
struct StateTrajectory {
  ModelParams params;
  SolverConfig cfg;
  double t0 = 0.0;
  std::vector<SpectralField> states;  // states[n] at time t0 + n dt

  int n_steps() const { return static_cast<int>(states.size()) - 1; }
  double dt() const { return cfg.dt(); }
  const SpectralField& at_step(int n) const { return states[static_cast<std::size_t>(n)]; }
  const SpectralField& final_state() const { return states.back(); }
  // Step index of a grid-aligned time.
  int step_of(double t) const;
};

struct ResolveOptions {
  double t0 = 0.0;
  double t1 = 1.0;
  bool keep_trajectory = true;
};

struct ResolveResult {
  SpectralField u1;
  StateTrajectory traj;  // empty when keep_trajectory is false
};

// Time-marching of u' + nu L u + B(u) = eta (NS) or
// u' + ((nu+i)(-Laplace) + gamma) u + i c |u|^{2m} u = eta (CGL) over
// [t0, t1] with the per-step forcing integrated exactly. Deterministic:
// identical inputs give bit-identical outputs. Throws SolverFailure on
// blow-up or CFL violation.
ResolveResult resolve(const ModelParams& params, const SolverConfig& cfg, const SpectralField& u0,
                      const NoisePath* eta, const ControlPath* extra = nullptr,
                      ResolveOptions opts = {});

// |u|_delta^2 = ||u||^2 + delta ||u||_1^2; delta = 0 gives the plain H-norm.
double delta_norm(const SpectralField& u, double delta);

struct DissipativityReport {
  double a_hat = 0.0;    // max |S(u,0)|_delta / |u|_delta over the sample
  double delta = 0.0;    // 0 for NS
  double q_hat = 0.0;    // CGL L^2 contraction factor
  double c_b = 0.0;      // CGL smoothing constant ||S(u)||_1 <= C_B ||u||
  bool pass = false;     // a_hat < 1
  int witness = -1;      // index of the max-ratio sample when failing
};

DissipativityReport dissipativity_constant(const ModelParams& params, const SolverConfig& cfg,
                                           const std::vector<SpectralField>& sample);

struct LipschitzReport {
  double lip_hat = 0.0;  // empirical max ||S(u1,z)-S(u2,z)|| / ||u1-u2||
  double q = 0.5;        // coupling q = min(1/2, 1/lip_hat)
};

LipschitzReport lipschitz_constant(const ModelParams& params, const SolverConfig& cfg,
                                   const std::vector<std::pair<SpectralField, SpectralField>>& pairs,
                                   const std::vector<NoisePath>& noises, double delta = 0.0);

struct AbsorbingReport {
  double radius_h = 0.0;   // coupling-norm radius (L^2 for NS, delta-norm for CGL)
  double radius_v = 0.0;   // H^2 radius
  int enter_step = 0;      // burn-in steps until entry
  bool absorbed = false;   // no exit during the check window
  // CGL Hamiltonian bound validation (empty for NS)
  double ham_c1 = 0.0;
  double ham_delta = 0.0;
  bool ham_bound_holds = true;
};

AbsorbingReport absorbing_radius(const ModelParams& params, const SolverConfig& cfg,
                                 const NoiseSpec& noise, int n_traj, int n_burnin, int n_check,
                                 RngKey key, double delta = 0.0);

// Post-burn-in states harvested from independent trajectories, the working
// stand-in for samples of the absorbing set.
std::vector<SpectralField> sample_absorbing_states(const ModelParams& params,
                                                   const SolverConfig& cfg, const NoiseSpec& noise,
                                                   int n_states, int n_burnin, RngKey key);

}  // namespace degenmix
