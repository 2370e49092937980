#pragma once

#include <Eigen/Dense>
#include <vector>

#include "degenmix/dynamics.hpp"
#include "degenmix/linearization.hpp"

namespace degenmix {

// Projection onto the P leading modes (ordered by Laplace eigenvalue, then
// lexicographically); distances between empirical laws are computed on
// these coordinates.
struct ModeProjector {
  std::vector<SpectralField> fields;  // orthonormal
  int dim() const { return static_cast<int>(fields.size()); }
  Eigen::VectorXd coords(const SpectralField& u) const;
};

ModeProjector make_projector(const ModelParams& params, const TorusSpec& torus, int cutoff,
                             int n_modes);

struct EnsembleConfig {
  int n_traj = 256;
  int k_max = 24;
  int proj_modes = 20;
  bool quarter_times = false;  // also store laws at k + {1/4, 1/2, 3/4}
};

struct EnsembleRun {
  // snapshots[k]: (n_traj x dim) projected coordinates at integer time k.
  std::vector<Eigen::MatrixXd> snapshots;
  // quarter snapshots[k][qi]: laws at k + (qi+1)/4 for qi = 0,1,2.
  std::vector<std::array<Eigen::MatrixXd, 3>> quarters;
  std::vector<double> mean_norm;  // mean H-norm per k
  int failures = 0;               // solver failures (trajectory frozen in place)
};

// Markov iteration of the ensemble; per-(trajectory, step) noise streams
// keyed off `key`, so runs are reproducible and order-independent.
EnsembleRun run_ensemble(const ModelParams& params, const SolverConfig& cfg,
                         const NoiseSpec& noise, const std::vector<SpectralField>& init,
                         const EnsembleConfig& ecfg, const ModeProjector& proj, RngKey key,
                         int threads);

// Truncated-metric W1 surrogate of the dual-Lipschitz distance between two
// equal-size empirical samples of projected coordinates:
// assignment optimum of cost min(|x - y|, 2).
double dual_lipschitz_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct RateFit {
  double gamma_hat = 0.0;
  double gamma_ci_lo = 0.0, gamma_ci_hi = 0.0;
  double c_hat = 0.0;
  double floor = 0.0;       // two-ensemble noise floor estimate
  int window = 0;           // points used in the fit
  bool measurable = true;   // false: series at floor from the start
};

// Log-linear fit of distance-vs-k over the pre-floor window.
RateFit mixing_rate_fit(const std::vector<double>& dist, const std::vector<double>& floor_dist);

struct StationarityResult {
  double p_value = 0.0;
  bool reject_at_1pct = false;
};

// Two-sample energy-distance permutation test between the empirical laws
// at consecutive integer times.
StationarityResult stationarity_check(const Eigen::MatrixXd& at_k, const Eigen::MatrixXd& at_k1,
                                      int n_perm, RngKey key);

}  // namespace degenmix
