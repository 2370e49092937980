#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "degenmix/dynamics.hpp"

namespace degenmix {

// Precomputed physical-space data of a base trajectory, shared read-only by
// tangent and adjoint solves along it.
class TangentWorkspace {
 public:
  explicit TangentWorkspace(const StateTrajectory& traj);
  ~TangentWorkspace();
  TangentWorkspace(TangentWorkspace&&) noexcept;

  const StateTrajectory& traj() const { return *traj_; }
  int n_steps() const { return traj_->n_steps(); }

  // Q(u~(n)) v: directional derivative of the nonlinearity at step n.
  SpectralField q_apply(int n, const SpectralField& v) const;
  // Real-L^2 adjoint of q_apply(n, .).
  SpectralField q_adjoint(int n, const SpectralField& w) const;

 private:
  struct StepData;
  const StateTrajectory* traj_;
  std::unique_ptr<NonlinearEvaluator> ev_;
  std::vector<StepData> steps_;
};

// Tangent flow along the stored trajectory: solves the linearised problem
//   v' + nu L v + Q(u~(t)) v = g,  v(s) = v0,
// discretised as the exact derivative of the nonlinear IMEX-CN stepping.
// v0 == nullptr means v(s) = 0 (control mode); g == nullptr means g = 0
// (state mode, D_u S).
SpectralField tangent_solve(const TangentWorkspace& ws, const SpectralField* v0,
                            const ControlPath* g, double s, double t);

struct AdjointSolution {
  // w cell values: w_cells[k] is the dual state paired with forcing on step
  // lo+k; exactly the discrete transpose of the tangent control map.
  std::vector<SpectralField> w_cells;
  // (D_u S)^* w1: gradient of <v(t), w1> with respect to v(s).
  SpectralField p0;
};

// Backward dual solve of the linear problem over [s,t] from terminal value
// w1 (the transpose of tangent_solve, so the duality identities hold to
// round-off). `record_cells` may be false when only p0 is needed.
AdjointSolution adjoint_solve(const TangentWorkspace& ws, const SpectralField& w1, double s,
                              double t, bool record_cells = true);

// (D_u S)^* with respect to the H^order inner product (order = 0 is L^2;
// CGL duality checks use order = 1).
SpectralField dus_adjoint(const TangentWorkspace& ws, const SpectralField& w1, double s, double t,
                          int order);

struct ObservationBasis {
  std::vector<SpectralField> fields;  // unit H-norm, mutually orthogonal
  std::vector<double> lambda;         // Laplace eigenvalue per field
  int v_order = 1;                    // V = H^{v_order}

  int size() const { return static_cast<int>(fields.size()); }
  double v_norm_of_basis(int m) const { return std::pow(1.0 + lambda[static_cast<std::size_t>(m)], 0.5 * v_order); }
};

// All nonzero modes |l_i| <= k_obs of the NS truncation (one e^a_l per l).
ObservationBasis ns_observation_basis(const TorusSpec& torus, int cutoff, int k_obs);
// CGL truncation: e^a_l and i e^a_l for |l_i| <= k_obs (including l = 0).
ObservationBasis cgl_observation_basis(const TorusSpec& torus, int cutoff, int k_obs);

struct GramianMatrix {
  Eigen::MatrixXd g;       // restriction of int R(1,t) P_H R(1,t)^* dt
  Eigen::MatrixXd z;       // G = Z^T Z by construction (rows: time x channel)
  Eigen::VectorXd eigs;    // ascending eigenvalues of g
  double min_eig = 0.0;    // sigma_min(Z)^2 >= 0
  double trace = 0.0;
};

// Observability Gramian on the observation basis: one adjoint solve per
// basis vector, cell quadrature on the solver grid (the quadrature is the
// one that makes G exactly A A^* for the discrete control map).
GramianMatrix gramian(const TangentWorkspace& ws, const ObservationBasis& obs,
                      const std::vector<SpectralField>& h_channels, double horizon, int threads);

// Time-tensor control basis: normalised Haar levels 0..time_levels on [0,1]
// tensorised with the listed noise channels. Dimension per channel is
// 2^(time_levels+1) - 1.
struct ControlBasis {
  std::vector<int> channels;           // indices into the noise spec
  int time_levels = 1;
  std::vector<SpectralField> fields;   // spatial factor per channel
  int time_dim() const { return (1 << (time_levels + 1)) - 1; }
  int dim() const { return static_cast<int>(channels.size()) * time_dim(); }
};

ControlBasis make_control_basis(const NoiseSpec& noise, std::vector<int> channels, int time_levels,
                                int cutoff);

// Cell values of the k-th normalised time-basis function on an S-step grid.
void control_time_profile(int k, int steps, double* out);

struct RightInverse {
  double gamma = 0.0;
  int m_ctrl = 0;
  Eigen::MatrixXd r;    // M x n_H: control coordinates of R_{M,gamma} f
  double norm = 0.0;    // operator norm (sigma_max)
  double a_norm = 0.0;  // ||A_M|| for the resolvent bound ||R|| <= ||A||/gamma
};

// Per-(u, eta) cache: Gramian, control columns A_M, and the Tikhonov
// machinery on top of them.
class LinearizedSystem {
 public:
  LinearizedSystem(const StateTrajectory& traj, const ObservationBasis& obs,
                   const NoiseSpec& noise, const ControlBasis& ctrl, double horizon, int threads);

  const TangentWorkspace& workspace() const { return ws_; }
  const ObservationBasis& obs() const { return obs_; }
  const GramianMatrix& gram() const { return gram_; }
  const ControlBasis& ctrl() const { return ctrl_; }
  const Eigen::MatrixXd& a_m() const { return a_m_; }

  Eigen::VectorXd h_coords(const SpectralField& f) const;
  SpectralField from_h_coords(const Eigen::VectorXd& c) const;
  ControlPath control_path(const Eigen::VectorXd& coords) const;

  // Net of V-unit-scaled basis vectors f_m = e_m / ||e_m||_V.
  // Residual functional F_gamma = sum_m gamma^2 ||(G+gamma)^-1 f_m||^2.
  double residual_functional(double gamma) const;
  // Residual of the full (untruncated) Tikhonov inverse on one vector:
  // ||G (G+gamma)^-1 f - f||.
  double full_residual(double gamma, const Eigen::VectorXd& f) const;
  // Residual of the truncated inverse ||A_M A_M^T (G+gamma)^-1 f - f||, and
  // the measured truncation term ||(G - A_M A_M^T)(G+gamma)^-1 f||.
  std::pair<double, double> truncated_residual(double gamma, const Eigen::VectorXd& f) const;

  RightInverse right_inverse(double gamma) const;
  Eigen::VectorXd apply_right_inverse(const RightInverse& ri, const Eigen::VectorXd& f) const;

 private:
  TangentWorkspace ws_;
  ObservationBasis obs_;
  ControlBasis ctrl_;
  GramianMatrix gram_;
  Eigen::MatrixXd a_m_;
  double horizon_;
};

struct GoodSetThresholds {
  double eps2 = 0.1;
  double nu() const { return eps2 * eps2 / 32.0; }
};

enum class GoodSetClass { Good, Boundary, Bad };

inline GoodSetClass classify_residual(double f_gamma, const GoodSetThresholds& th) {
  if (f_gamma <= th.nu()) return GoodSetClass::Good;
  if (f_gamma <= 2.0 * th.nu()) return GoodSetClass::Boundary;
  return GoodSetClass::Bad;
}

// Quintic smoothstep cutoff: 1 on [0, 3nu/2], 0 on [2nu, inf).
double smooth_cutoff(double t, double nu);

// Bisect gamma until the empirical good-set mass over the cached systems
// reaches 1 - eps1 (largest such gamma found within max_iter bisections).
struct GammaSelection {
  double gamma = 0.0;
  double mass = 0.0;
  bool converged = false;
};

GammaSelection select_gamma(const std::vector<std::unique_ptr<LinearizedSystem>>& systems,
                            const GoodSetThresholds& th, double eps1, int max_iter = 64);

}  // namespace degenmix
