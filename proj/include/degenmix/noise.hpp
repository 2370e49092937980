#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "degenmix/lattice.hpp"
#include "degenmix/rng.hpp"

namespace degenmix {

// L^infty-normalised Haar system on [0,1): h0 = 1 on [0,1); h_{jl} is +1 on
// the left half and -1 on the right half of [l 2^-j, (l+1) 2^-j). Intervals
// are left-closed, right-open. j = 0 addresses h0.
double haar_eval(int j, int l, double t);

enum class TemporalKind { HaarExp, HaarAlg, JumpShiftedHaar };

struct TemporalModel {
  TemporalKind kind = TemporalKind::HaarExp;
  double A = 2.0;  // HaarExp: c_j = A^-j, A > 1
  double C = 1.0;  // HaarAlg: c_j = C j^-q, q > 1
  double q = 2.0;
  std::vector<double> shifts;  // JumpShiftedHaar: per-channel time offset

  double cj(int j) const;
  bool shares_dyadic_jumps() const { return kind != TemporalKind::JumpShiftedHaar; }
};

// One spatial channel phi_i: a lattice basis field scaled to unit H-norm.
struct NoiseChannel {
  WaveVector l;
  bool imaginary = false;  // CGL: the i*e^a_l half of the basis
  double b = 1.0;          // amplitude b_i (nonzero)
};

struct NoiseSpec {
  FieldKind kind = FieldKind::DivFree2D;
  TorusSpec torus = TorusSpec::square2d();
  int cutoff = 8;
  std::vector<NoiseChannel> channels;
  TemporalModel temporal;
  int j_max = 10;  // Haar truncation level

  int n_channels() const { return static_cast<int>(channels.size()); }
  double cj_sum() const;
  // Triangle-inequality sup bound: sum_i |b_i| (1 + sum_j c_j) for
  // unit-norm spatial channels.
  double sup_bound() const;
  SpectralField phi(int i) const;  // unit H-norm spatial mode
  void validate() const;
};

// One sampled realisation of the coloured noise on [0,1). Coefficients are
// a pure function of the stream key, so identical (seed, ids) reproduce the
// path bit for bit.
class NoisePath {
 public:
  NoisePath(const NoiseSpec* spec, RngKey stream);

  const NoiseSpec& spec() const { return *spec_; }
  RngKey stream() const { return stream_; }

  // Coefficient xi^i_{jl} in [-1,1]; j = 0 addresses xi^i_0.
  double xi(int i, int j, int l) const;

  // Scalar channel process eta~^i(t) (without the amplitude b_i).
  double scalar(int i, double t) const;
  // Exact integral of the scalar channel over [t0,t1] subset [0,1].
  double scalar_integral(int i, double t0, double t1) const;
  // Exact one-sided limit difference eta~^i(t+) - eta~^i(t-), accumulated
  // level by level so shared levels cancel exactly.
  double scalar_jump(int i, double t) const;

  // eta(t) = sum_i b_i eta~^i(t) phi_i as a spectral field.
  SpectralField eval(double t) const;
  // Channel-wise b_i-weighted averages over [t0,t1] (solver forcing).
  std::vector<double> channel_averages(double t0, double t1) const;

  // sup_t ||eta(t)|| over the dyadic cells (exact for piecewise-constant
  // paths).
  double sup_norm() const;

  int n_cells() const { return 1 << (spec_->j_max + 1); }

 private:
  void materialize();
  double scalar_integral_base(int i, double t0, double t1) const;

  const NoiseSpec* spec_;
  RngKey stream_;
  // cells_[i][k]: value of the scalar channel on [k w, (k+1) w), w = 2^-(jmax+1)
  std::vector<std::vector<double>> cells_;
  std::vector<std::vector<double>> prefix_;  // prefix integrals, prefix[k] = int_0^{kw}
};

// N x N matrix of jumps R_eps(s) at consecutive dyadic midpoints inside
// [s-eps, s+eps]; defined for the shared-jump Haar models.
struct JumpMatrix {
  double s = 0.5;
  double eps = 0.25;
  int level = 1;   // dyadic level j of the midpoints
  int l0 = 0;      // first midpoint index minus one (points are l0+1..l0+N)
  Eigen::MatrixXd entries;
  double det = 0.0;
  double inv_norm = 0.0;  // ||R^-1||_2 = 1/sigma_min
  bool singular = false;
};

// Smallest dyadic level holding N consecutive midpoints inside [s-eps,s+eps];
// returns (j, l0) or nullopt when eps is too small for levels <= j_cap.
std::optional<std::pair<int, int>> jump_level(double s, double eps, int n, int j_cap);

// Entries computed from the coefficient expansion of the jumps (Eq-form),
// truncated at spec.j_max. Exactly equal to the evaluator limit route.
JumpMatrix jump_matrix(const NoisePath& path, double s, double eps, int n);

struct ObservabilityRow {
  double eps;
  int level;
  double median_inv_norm;
  double q95_inv_norm;
  double singular_rate;
};

struct ObservabilityReport {
  std::vector<ObservabilityRow> rows;
  double theta_median = 0.0;  // log-log slope of median ||R^-1|| vs 1/eps
  double theta_q95 = 0.0;
  bool pass = false;  // theta_q95 < 1
};

ObservabilityReport observability_statistic(const NoiseSpec& spec, int n_samples, double s,
                                            const std::vector<double>& eps_grid, RngKey key);

struct SmallBallFit {
  int level;
  std::vector<double> r;      // abscissae
  std::vector<double> p;      // empirical P{|Sigma(j)| <= r}
  double c_hat = 0.0;         // fitted exponent
  double c_ci_lo = 0.0;
  double c_ci_hi = 0.0;
};

// Empirical small-ball curves of the normalised determinant Sigma(j) of
// the jump matrix (paper-normalised: jumps divided by b_i c_j).
std::vector<SmallBallFit> small_ball_curve(const NoiseSpec& spec, const std::vector<int>& j_list,
                                           int n_samples, RngKey key);

}  // namespace degenmix
