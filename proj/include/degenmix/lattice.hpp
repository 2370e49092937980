#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "degenmix/fft.hpp"

namespace degenmix {

using Complex = std::complex<double>;

// Anisotropic torus T^d_a = R^d / (2 pi a_1 Z x ... x 2 pi a_d Z).
struct TorusSpec {
  int dims = 2;
  std::array<double, 3> a{1.0, 1.0, 1.0};

  static TorusSpec square2d(double a1 = 1.0, double a2 = 1.0) { return {2, {a1, a2, 1.0}}; }
  static TorusSpec cube3d(double a1 = 1.0, double a2 = 1.0, double a3 = 1.0) {
    return {3, {a1, a2, a3}};
  }
  bool operator==(const TorusSpec& o) const;
};

struct WaveVector {
  std::array<int, 3> l{0, 0, 0};

  WaveVector() = default;
  WaveVector(int l1, int l2) : l{l1, l2, 0} {}
  WaveVector(int l1, int l2, int l3) : l{l1, l2, l3} {}

  int operator[](int i) const { return l[i]; }
  int& operator[](int i) { return l[i]; }
  bool is_zero() const { return l[0] == 0 && l[1] == 0 && l[2] == 0; }
  WaveVector operator-() const { return {-l[0], -l[1], -l[2]}; }
  WaveVector operator+(const WaveVector& o) const { return {l[0] + o.l[0], l[1] + o.l[1], l[2] + o.l[2]}; }
  WaveVector operator-(const WaveVector& o) const { return {l[0] - o.l[0], l[1] - o.l[1], l[2] - o.l[2]}; }
  bool operator==(const WaveVector& o) const { return l == o.l; }
  bool operator<(const WaveVector& o) const { return l < o.l; }
};

// Eigenvalue of -Laplace on mode e^{i<l,x>_a}: sum_i (l_i/a_i)^2. In the
// 2D divergence-free setting this equals |l^{perp_a}|^2.
double laplace_eigenvalue(const TorusSpec& torus, const WaveVector& l);

// l^{perp_a} = (-l2/a2, l1/a1).
std::array<double, 2> perp_a(const TorusSpec& torus, const WaveVector& l);

enum class FieldKind { DivFree2D, Complex3D };

// Truncated Fourier representation of either a real divergence-free
// velocity field on T^2_a (coefficients of plain exponentials
// e^{i<l,x>_a}, conjugate-symmetric, zero mean) or a complex scalar on
// T^3_a. Norms and inner products use the spectral l^2 convention
// (Parseval up to the fixed torus volume factor).
class SpectralField {
 public:
  SpectralField() = default;
  SpectralField(FieldKind kind, const TorusSpec& torus, int cutoff);

  FieldKind kind() const { return kind_; }
  const TorusSpec& torus() const { return torus_; }
  int cutoff() const { return cutoff_; }
  int dims() const { return torus_.dims; }
  int ncomp() const { return kind_ == FieldKind::DivFree2D ? 2 : 1; }
  int extent() const { return 2 * cutoff_ + 1; }
  std::size_t n_modes() const;

  std::size_t mode_index(const WaveVector& l) const;
  bool in_window(const WaveVector& l) const;
  WaveVector mode_at(std::size_t idx) const;

  Complex& at(const WaveVector& l, int comp = 0);
  const Complex& at(const WaveVector& l, int comp = 0) const;

  std::vector<Complex>& raw() { return c_; }
  const std::vector<Complex>& raw() const { return c_; }

  // In-place algebra.
  SpectralField& operator+=(const SpectralField& o);
  SpectralField& operator-=(const SpectralField& o);
  SpectralField& operator*=(double s);
  void add_scaled(const SpectralField& o, double s);
  void add_scaled(const SpectralField& o, Complex s);
  void set_zero();

  // Symmetrise coefficients so the physical field is real (DivFree2D).
  void enforce_reality();
  // Max violation of u_{-l} = conj(u_l).
  double reality_defect() const;
  // Max spectral divergence |<a^{-1} l, u_l>| over retained modes.
  double divergence_defect() const;
  bool finite() const;

  friend double hdot(const SpectralField& u, const SpectralField& v);

 private:
  FieldKind kind_ = FieldKind::DivFree2D;
  TorusSpec torus_{};
  int cutoff_ = 0;
  std::vector<Complex> c_;
};

// Real inner product Re sum_l <u_l, conj(v_l)>; for real NS fields this is
// the L^2 pairing in the l^2 convention.
double hdot(const SpectralField& u, const SpectralField& v);
// Sobolev pairing with weight (1 + |l|_a^2)^s, s in {-1,0,1,2,3}.
double sobolev_dot(const SpectralField& u, const SpectralField& v, int s);
double sobolev_norm(const SpectralField& u, int s);
inline double hnorm(const SpectralField& u) { return sobolev_norm(u, 0); }

// Mode-wise Leray projection: u_l <- u_l - <u_l,k> k / |k|^2 with
// k = (l1/a1, l2/a2); the zero mode is annihilated. Idempotent,
// orthogonal, and exactly divergence-free on the retained window.
SpectralField leray_project(const SpectralField& v);

enum class TrigBranch { Cos, Sin };

// e^a_l selector: cosine branch iff l1>0, or l1=0 and l2>0, or (3D)
// l1=l2=0 and l3>0.
TrigBranch basis_branch(const WaveVector& l);

// Paper-normalised vector basis field e^a_l on T^2_a with amplitude
// l^{perp_a} (cos or sin branch by the sign convention). l must be nonzero.
SpectralField ns_basis_field(const TorusSpec& torus, int cutoff, const WaveVector& l);
// Explicit branch selection: c^a_l or s^a_l.
SpectralField ns_trig_field(const TorusSpec& torus, int cutoff, const WaveVector& l, TrigBranch b);

// CGL scalar basis field e^a_l (cos/sin branch; l = 0 gives the constant 1).
// `imaginary` multiplies by i, giving the i*e^a_l half of the real basis.
SpectralField cgl_basis_field(const TorusSpec& torus, int cutoff, const WaveVector& l,
                              bool imaginary = false);

// Dealiased pseudo-spectral evaluation of the model nonlinearities on a
// power-of-two grid. One instance per thread; instances share nothing.
class NonlinearEvaluator {
 public:
  NonlinearEvaluator(FieldKind kind, const TorusSpec& torus, int cutoff, int grid);

  int grid() const { return grid_; }
  int cutoff() const { return cutoff_; }

  // NS advection term B(u) = Pi(<u,grad>u), truncated to the window.
  SpectralField ns_b(const SpectralField& u);
  // Symmetrised bilinear term Q(z,x) = Pi(<z,grad>x + <x,grad>z) = D B(u)
  // direction pairing; Q(u,u) = 2 B(u).
  SpectralField ns_q(const SpectralField& z, const SpectralField& x);
  // L^2 adjoint of v -> Q(u,v): Q*(u)w = -Pi(<u,grad>w + (grad w)^T u)
  // with ((grad w)^T u)_i = sum_j u_j d_i w_j.
  SpectralField ns_q_adjoint(const SpectralField& u, const SpectralField& w);

  // CGL nonlinearity B(u) = i c |u|^{2m} u.
  SpectralField cgl_b(const SpectralField& u, double c, int m);
  // Directional derivative Q(u)v = B_1(u; v).
  SpectralField cgl_q(const SpectralField& u, const SpectralField& v, double c, int m);
  // Real-L^2 adjoint of v -> Q(u)v.
  SpectralField cgl_q_adjoint(const SpectralField& u, const SpectralField& w, double c, int m);
  // k-th derivative of B at u in directions dirs (k = dirs.size() <= 2m+1).
  SpectralField cgl_bk(const SpectralField& u, const std::vector<const SpectralField*>& dirs,
                       double c, int m);

  // Max pointwise speed on the grid (advective CFL diagnostics).
  double ns_max_speed(const SpectralField& u);
  // Grid mean of |u|^p (pointwise modulus; speed for 2D vector fields).
  double mean_abs_pow(const SpectralField& u, int p);

  // Physical-grid access for the tangent/adjoint machinery.
  void grid_of(const SpectralField& f, int comp, std::vector<Complex>& g) const;
  void grid_deriv_of(const SpectralField& f, int comp, int axis, std::vector<Complex>& g) const;
  void field_of(const std::vector<Complex>& g, SpectralField& f, int comp) const;

 private:
  using Grid = std::vector<Complex>;

  void to_grid(const SpectralField& f, int comp, Grid& g) const;
  void from_grid(const Grid& g, SpectralField& f, int comp) const;
  void to_grid_deriv(const SpectralField& f, int comp, int axis, Grid& g) const;
  std::size_t gidx_total() const;

  FieldKind kind_;
  TorusSpec torus_;
  int cutoff_;
  int grid_;
  FftNd fft_;
};

// Minimum dealiasing grid for a polynomial nonlinearity of degree `degree`
// at cutoff K: smallest power of two >= degree*K + K + 1.
int dealias_grid(int cutoff, int degree);

// Field snapshot file: header rows (dims, a, K, kind) then one row per
// retained mode (l1, l2[, l3], re, im) per component. Bit-exact round trip.
void write_field_csv(std::ostream& os, const SpectralField& f);
SpectralField read_field_csv(std::istream& is);
void save_field(const std::string& path, const SpectralField& f);
SpectralField load_field(const std::string& path);

}  // namespace degenmix
