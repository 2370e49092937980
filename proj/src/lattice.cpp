#include "degenmix/lattice.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "degenmix/util.hpp"

namespace degenmix {

bool TorusSpec::operator==(const TorusSpec& o) const {
  if (dims != o.dims) return false;
  for (int i = 0; i < dims; ++i)
    if (a[i] != o.a[i]) return false;
  return true;
}

double laplace_eigenvalue(const TorusSpec& torus, const WaveVector& l) {
  double s = 0;
  for (int i = 0; i < torus.dims; ++i) {
    double t = l[i] / torus.a[i];
    s += t * t;
  }
  return s;
}

std::array<double, 2> perp_a(const TorusSpec& torus, const WaveVector& l) {
  return {-l[1] / torus.a[1], l[0] / torus.a[0]};
}

SpectralField::SpectralField(FieldKind kind, const TorusSpec& torus, int cutoff)
    : kind_(kind), torus_(torus), cutoff_(cutoff) {
  DGM_REQUIRE(cutoff >= 0, "SpectralField: negative cutoff");
  DGM_REQUIRE((kind == FieldKind::DivFree2D) == (torus.dims == 2),
              "SpectralField: kind/torus dims mismatch");
  for (int i = 0; i < torus.dims; ++i) DGM_REQUIRE(torus.a[i] > 0, "SpectralField: a_i must be > 0");
  c_.assign(n_modes() * static_cast<std::size_t>(ncomp()), Complex(0, 0));
}

std::size_t SpectralField::n_modes() const {
  std::size_t n = 1;
  for (int i = 0; i < torus_.dims; ++i) n *= static_cast<std::size_t>(extent());
  return n;
}

bool SpectralField::in_window(const WaveVector& l) const {
  for (int i = 0; i < torus_.dims; ++i)
    if (l[i] < -cutoff_ || l[i] > cutoff_) return false;
  return true;
}

std::size_t SpectralField::mode_index(const WaveVector& l) const {
  std::size_t idx = 0;
  for (int i = 0; i < torus_.dims; ++i)
    idx = idx * static_cast<std::size_t>(extent()) + static_cast<std::size_t>(l[i] + cutoff_);
  return idx;
}

WaveVector SpectralField::mode_at(std::size_t idx) const {
  WaveVector l;
  for (int i = torus_.dims - 1; i >= 0; --i) {
    l[i] = static_cast<int>(idx % static_cast<std::size_t>(extent())) - cutoff_;
    idx /= static_cast<std::size_t>(extent());
  }
  return l;
}

Complex& SpectralField::at(const WaveVector& l, int comp) {
  return c_[mode_index(l) * static_cast<std::size_t>(ncomp()) + static_cast<std::size_t>(comp)];
}

const Complex& SpectralField::at(const WaveVector& l, int comp) const {
  return c_[mode_index(l) * static_cast<std::size_t>(ncomp()) + static_cast<std::size_t>(comp)];
}

SpectralField& SpectralField::operator+=(const SpectralField& o) {
  DGM_REQUIRE(c_.size() == o.c_.size(), "field +=: shape mismatch");
  for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
  return *this;
}

SpectralField& SpectralField::operator-=(const SpectralField& o) {
  DGM_REQUIRE(c_.size() == o.c_.size(), "field -=: shape mismatch");
  for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
  return *this;
}

SpectralField& SpectralField::operator*=(double s) {
  for (auto& z : c_) z *= s;
  return *this;
}

void SpectralField::add_scaled(const SpectralField& o, double s) {
  DGM_REQUIRE(c_.size() == o.c_.size(), "add_scaled: shape mismatch");
  for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += s * o.c_[i];
}

void SpectralField::add_scaled(const SpectralField& o, Complex s) {
  DGM_REQUIRE(c_.size() == o.c_.size(), "add_scaled: shape mismatch");
  for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += s * o.c_[i];
}

void SpectralField::set_zero() {
  for (auto& z : c_) z = Complex(0, 0);
}

void SpectralField::enforce_reality() {
  if (kind_ != FieldKind::DivFree2D) return;
  for (std::size_t i = 0; i < n_modes(); ++i) {
    WaveVector l = mode_at(i);
    WaveVector nl = -l;
    if (nl < l) continue;
    for (int comp = 0; comp < ncomp(); ++comp) {
      Complex z1 = at(l, comp);
      Complex z2 = at(nl, comp);
      Complex avg = 0.5 * (z1 + std::conj(z2));
      at(l, comp) = avg;
      at(nl, comp) = std::conj(avg);
    }
  }
}

double SpectralField::reality_defect() const {
  if (kind_ != FieldKind::DivFree2D) return 0.0;
  double worst = 0;
  for (std::size_t i = 0; i < n_modes(); ++i) {
    WaveVector l = mode_at(i);
    for (int comp = 0; comp < ncomp(); ++comp)
      worst = std::max(worst, std::abs(at(l, comp) - std::conj(at(-l, comp))));
  }
  return worst;
}

double SpectralField::divergence_defect() const {
  if (kind_ != FieldKind::DivFree2D) return 0.0;
  double worst = 0;
  for (std::size_t i = 0; i < n_modes(); ++i) {
    WaveVector l = mode_at(i);
    Complex d = (l[0] / torus_.a[0]) * at(l, 0) + (l[1] / torus_.a[1]) * at(l, 1);
    worst = std::max(worst, std::abs(d));
  }
  return worst;
}

bool SpectralField::finite() const {
  for (const auto& z : c_)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  return true;
}

double hdot(const SpectralField& u, const SpectralField& v) {
  DGM_REQUIRE(u.c_.size() == v.c_.size(), "hdot: shape mismatch");
  double s = 0;
  for (std::size_t i = 0; i < u.c_.size(); ++i)
    s += u.c_[i].real() * v.c_[i].real() + u.c_[i].imag() * v.c_[i].imag();
  return s;
}

double sobolev_dot(const SpectralField& u, const SpectralField& v, int s) {
  DGM_REQUIRE(s >= -1 && s <= 3, "sobolev_dot: order outside {-1..3}");
  DGM_REQUIRE(u.n_modes() == v.n_modes() && u.kind() == v.kind(), "sobolev_dot: shape mismatch");
  double acc = 0;
  int nc = u.ncomp();
  for (std::size_t i = 0; i < u.n_modes(); ++i) {
    double w = std::pow(1.0 + laplace_eigenvalue(u.torus(), u.mode_at(i)), s);
    for (int comp = 0; comp < nc; ++comp) {
      const Complex& a = u.raw()[i * nc + comp];
      const Complex& b = v.raw()[i * nc + comp];
      acc += w * (a.real() * b.real() + a.imag() * b.imag());
    }
  }
  return acc;
}

double sobolev_norm(const SpectralField& u, int s) { return std::sqrt(std::max(0.0, sobolev_dot(u, u, s))); }

SpectralField leray_project(const SpectralField& v) {
  DGM_REQUIRE(v.kind() == FieldKind::DivFree2D, "leray_project: 2D vector fields only");
  DGM_REQUIRE(v.finite(), "leray_project: non-finite coefficients");
  SpectralField out = v;
  for (std::size_t i = 0; i < v.n_modes(); ++i) {
    WaveVector l = v.mode_at(i);
    if (l.is_zero()) {
      out.at(l, 0) = 0;
      out.at(l, 1) = 0;
      continue;
    }
    double k0 = l[0] / v.torus().a[0];
    double k1 = l[1] / v.torus().a[1];
    double k2 = k0 * k0 + k1 * k1;
    Complex proj = (out.at(l, 0) * k0 + out.at(l, 1) * k1) / k2;
    out.at(l, 0) -= proj * k0;
    out.at(l, 1) -= proj * k1;
  }
  return out;
}

TrigBranch basis_branch(const WaveVector& l) {
  if (l[0] > 0) return TrigBranch::Cos;
  if (l[0] < 0) return TrigBranch::Sin;
  if (l[1] > 0) return TrigBranch::Cos;
  if (l[1] < 0) return TrigBranch::Sin;
  return l[2] > 0 ? TrigBranch::Cos : TrigBranch::Sin;
}

SpectralField ns_trig_field(const TorusSpec& torus, int cutoff, const WaveVector& l, TrigBranch b) {
  DGM_REQUIRE(!l.is_zero(), "ns_trig_field: l = 0 has no divergence-free mode");
  SpectralField f(FieldKind::DivFree2D, torus, cutoff);
  DGM_REQUIRE(f.in_window(l), "ns_trig_field: mode outside cutoff window");
  auto p = perp_a(torus, l);
  if (b == TrigBranch::Cos) {
    // cos<l,x>_a = (e^{i<l,x>} + e^{-i<l,x>})/2
    f.at(l, 0) = Complex(0.5 * p[0], 0);
    f.at(l, 1) = Complex(0.5 * p[1], 0);
    f.at(-l, 0) = Complex(0.5 * p[0], 0);
    f.at(-l, 1) = Complex(0.5 * p[1], 0);
  } else {
    // sin<l,x>_a = (e^{i<l,x>} - e^{-i<l,x>})/(2i)
    f.at(l, 0) = Complex(0, -0.5 * p[0]);
    f.at(l, 1) = Complex(0, -0.5 * p[1]);
    f.at(-l, 0) = Complex(0, 0.5 * p[0]);
    f.at(-l, 1) = Complex(0, 0.5 * p[1]);
  }
  return f;
}

SpectralField ns_basis_field(const TorusSpec& torus, int cutoff, const WaveVector& l) {
  return ns_trig_field(torus, cutoff, l, basis_branch(l));
}

SpectralField cgl_basis_field(const TorusSpec& torus, int cutoff, const WaveVector& l,
                              bool imaginary) {
  SpectralField f(FieldKind::Complex3D, torus, cutoff);
  DGM_REQUIRE(f.in_window(l), "cgl_basis_field: mode outside cutoff window");
  Complex unit = imaginary ? Complex(0, 1) : Complex(1, 0);
  if (l.is_zero()) {
    f.at(l, 0) = unit;
    return f;
  }
  if (basis_branch(l) == TrigBranch::Cos) {
    f.at(l, 0) = 0.5 * unit;
    f.at(-l, 0) = 0.5 * unit;
  } else {
    f.at(l, 0) = Complex(0, -0.5) * unit;
    f.at(-l, 0) = Complex(0, 0.5) * unit;
  }
  return f;
}

int dealias_grid(int cutoff, int degree) {
  int need = (degree + 1) * cutoff + 1;
  int m = 1;
  while (m < need) m <<= 1;
  return m;
}

NonlinearEvaluator::NonlinearEvaluator(FieldKind kind, const TorusSpec& torus, int cutoff, int grid)
    : kind_(kind), torus_(torus), cutoff_(cutoff), grid_(grid), fft_(torus.dims, grid) {
  DGM_REQUIRE(grid > 0 && (grid & (grid - 1)) == 0, "NonlinearEvaluator: grid must be a power of 2");
  DGM_REQUIRE(grid >= 2 * cutoff + 1, "NonlinearEvaluator: grid below mode window");
}

std::size_t NonlinearEvaluator::gidx_total() const {
  std::size_t t = 1;
  for (int i = 0; i < torus_.dims; ++i) t *= static_cast<std::size_t>(grid_);
  return t;
}

void NonlinearEvaluator::to_grid(const SpectralField& f, int comp, Grid& g) const {
  g.assign(gidx_total(), Complex(0, 0));
  int d = torus_.dims;
  for (std::size_t i = 0; i < f.n_modes(); ++i) {
    WaveVector l = f.mode_at(i);
    std::size_t gi = 0;
    for (int ax = 0; ax < d; ++ax) {
      int w = (l[ax] % grid_ + grid_) % grid_;
      gi = gi * static_cast<std::size_t>(grid_) + static_cast<std::size_t>(w);
    }
    g[gi] = f.at(l, comp);
  }
  fft_.inverse(const_cast<Complex*>(g.data()));
  // Convention: physical value u(x_j) = sum_l u_l e^{i<l,x_j>}; the inverse
  // transform carries 1/M^d, so rescale.
  double scale = static_cast<double>(gidx_total());
  for (auto& z : g) z *= scale;
}

void NonlinearEvaluator::to_grid_deriv(const SpectralField& f, int comp, int axis, Grid& g) const {
  g.assign(gidx_total(), Complex(0, 0));
  int d = torus_.dims;
  for (std::size_t i = 0; i < f.n_modes(); ++i) {
    WaveVector l = f.mode_at(i);
    std::size_t gi = 0;
    for (int ax = 0; ax < d; ++ax) {
      int w = (l[ax] % grid_ + grid_) % grid_;
      gi = gi * static_cast<std::size_t>(grid_) + static_cast<std::size_t>(w);
    }
    g[gi] = f.at(l, comp) * Complex(0, l[axis] / torus_.a[axis]);
  }
  fft_.inverse(const_cast<Complex*>(g.data()));
  double scale = static_cast<double>(gidx_total());
  for (auto& z : g) z *= scale;
}

void NonlinearEvaluator::from_grid(const Grid& g, SpectralField& f, int comp) const {
  Grid tmp = g;
  fft_.forward(tmp.data());
  double scale = 1.0 / static_cast<double>(gidx_total());
  int d = torus_.dims;
  for (std::size_t i = 0; i < f.n_modes(); ++i) {
    WaveVector l = f.mode_at(i);
    std::size_t gi = 0;
    for (int ax = 0; ax < d; ++ax) {
      int w = (l[ax] % grid_ + grid_) % grid_;
      gi = gi * static_cast<std::size_t>(grid_) + static_cast<std::size_t>(w);
    }
    f.at(l, comp) = tmp[gi] * scale;
  }
}

SpectralField NonlinearEvaluator::ns_b(const SpectralField& u) { return ns_q(u, u) *= 0.5; }

SpectralField NonlinearEvaluator::ns_q(const SpectralField& z, const SpectralField& x) {
  DGM_REQUIRE(kind_ == FieldKind::DivFree2D, "ns_q: NS evaluator required");
  DGM_REQUIRE(grid_ >= 3 * cutoff_ + 1, "ns_q: grid too small to absorb the quadratic product");
  Grid z0, z1, x0, x1, dx00, dx01, dx10, dx11, dz00, dz01, dz10, dz11;
  to_grid(z, 0, z0);
  to_grid(z, 1, z1);
  to_grid(x, 0, x0);
  to_grid(x, 1, x1);
  to_grid_deriv(x, 0, 0, dx00);  // d_0 x_0
  to_grid_deriv(x, 0, 1, dx01);  // d_1 x_0
  to_grid_deriv(x, 1, 0, dx10);  // d_0 x_1
  to_grid_deriv(x, 1, 1, dx11);  // d_1 x_1
  to_grid_deriv(z, 0, 0, dz00);
  to_grid_deriv(z, 0, 1, dz01);
  to_grid_deriv(z, 1, 0, dz10);
  to_grid_deriv(z, 1, 1, dz11);
  Grid r0(gidx_total()), r1(gidx_total());
  for (std::size_t i = 0; i < r0.size(); ++i) {
    // <z,grad>x + <x,grad>z
    r0[i] = z0[i] * dx00[i] + z1[i] * dx01[i] + x0[i] * dz00[i] + x1[i] * dz01[i];
    r1[i] = z0[i] * dx10[i] + z1[i] * dx11[i] + x0[i] * dz10[i] + x1[i] * dz11[i];
  }
  SpectralField out(FieldKind::DivFree2D, torus_, cutoff_);
  from_grid(r0, out, 0);
  from_grid(r1, out, 1);
  return leray_project(out);
}

SpectralField NonlinearEvaluator::ns_q_adjoint(const SpectralField& u, const SpectralField& w) {
  DGM_REQUIRE(kind_ == FieldKind::DivFree2D, "ns_q_adjoint: NS evaluator required");
  DGM_REQUIRE(grid_ >= 3 * cutoff_ + 1, "ns_q_adjoint: grid too small");
  Grid u0, u1, w0g, w1g, dw00, dw01, dw10, dw11;
  to_grid(u, 0, u0);
  to_grid(u, 1, u1);
  to_grid(w, 0, w0g);
  to_grid(w, 1, w1g);
  to_grid_deriv(w, 0, 0, dw00);  // d_0 w_0
  to_grid_deriv(w, 0, 1, dw01);  // d_1 w_0
  to_grid_deriv(w, 1, 0, dw10);  // d_0 w_1
  to_grid_deriv(w, 1, 1, dw11);  // d_1 w_1
  Grid r0(gidx_total()), r1(gidx_total());
  for (std::size_t i = 0; i < r0.size(); ++i) {
    // -(<u,grad>w)_i - ((grad w)^T u)_i, with ((grad w)^T u)_i = sum_j u_j d_i w_j
    r0[i] = -(u0[i] * dw00[i] + u1[i] * dw01[i]) - (u0[i] * dw00[i] + u1[i] * dw10[i]);
    r1[i] = -(u0[i] * dw10[i] + u1[i] * dw11[i]) - (u0[i] * dw01[i] + u1[i] * dw11[i]);
  }
  SpectralField out(FieldKind::DivFree2D, torus_, cutoff_);
  from_grid(r0, out, 0);
  from_grid(r1, out, 1);
  return leray_project(out);
}

SpectralField NonlinearEvaluator::cgl_b(const SpectralField& u, double c, int m) {
  std::vector<const SpectralField*> none;
  return cgl_bk(u, none, c, m);
}

SpectralField NonlinearEvaluator::cgl_q(const SpectralField& u, const SpectralField& v, double c,
                                        int m) {
  std::vector<const SpectralField*> dirs{&v};
  return cgl_bk(u, dirs, c, m);
}

SpectralField NonlinearEvaluator::cgl_q_adjoint(const SpectralField& u, const SpectralField& w,
                                                double c, int m) {
  DGM_REQUIRE(kind_ == FieldKind::Complex3D, "cgl_q_adjoint: CGL evaluator required");
  DGM_REQUIRE(grid_ >= (2 * m + 2) * cutoff_ + 1, "cgl_q_adjoint: grid too small");
  Grid ug, wg;
  to_grid(u, 0, ug);
  to_grid(w, 0, wg);
  Grid r(gidx_total());
  const Complex ic(0, c);
  for (std::size_t i = 0; i < r.size(); ++i) {
    double a2 = std::norm(ug[i]);                       // |u|^2
    double am = 1.0;                                    // |u|^{2(m-1)}
    for (int k = 0; k < m - 1; ++k) am *= a2;
    r[i] = -ic * ((m + 1.0) * am * a2 * wg[i]) + ic * (m * am * ug[i] * ug[i] * std::conj(wg[i]));
  }
  SpectralField out(FieldKind::Complex3D, torus_, cutoff_);
  from_grid(r, out, 0);
  return out;
}

SpectralField NonlinearEvaluator::cgl_bk(const SpectralField& u,
                                         const std::vector<const SpectralField*>& dirs, double c,
                                         int m) {
  DGM_REQUIRE(kind_ == FieldKind::Complex3D, "cgl_bk: CGL evaluator required");
  DGM_REQUIRE(m == 1 || m == 2, "cgl_bk: m in {1,2}");
  DGM_REQUIRE(grid_ >= (2 * m + 2) * cutoff_ + 1,
              "cgl_bk: grid too small to absorb the degree-(2m+1) product");
  int k = static_cast<int>(dirs.size());
  int nu = m + 1;  // holomorphic slots of B(u) = i c u^{m+1} conj(u)^m
  int nc = m;      // antiholomorphic slots
  DGM_REQUIRE(k <= nu + nc, "cgl_bk: derivative order exceeds polynomial degree");

  Grid ug;
  to_grid(u, 0, ug);
  std::vector<Grid> vg(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) to_grid(*dirs[static_cast<std::size_t>(i)], 0, vg[static_cast<std::size_t>(i)]);

  auto falling = [](int n, int r) {
    double f = 1;
    for (int i = 0; i < r; ++i) f *= n - i;
    return f;
  };

  Grid out(gidx_total(), Complex(0, 0));
  const Complex ic(0, c);
  for (unsigned mask = 0; mask < (1u << k); ++mask) {
    int na = __builtin_popcount(mask);  // directions placed in u-slots
    int nb = k - na;                    // directions placed in conj-slots
    if (na > nu || nb > nc) continue;
    double coef = falling(nu, na) * falling(nc, nb);
    int pu = nu - na, pc = nc - nb;
    for (std::size_t i = 0; i < out.size(); ++i) {
      Complex term(coef, 0);
      for (int p = 0; p < pu; ++p) term *= ug[i];
      for (int p = 0; p < pc; ++p) term *= std::conj(ug[i]);
      for (int d = 0; d < k; ++d)
        term *= (mask & (1u << d)) ? vg[static_cast<std::size_t>(d)][i]
                                   : std::conj(vg[static_cast<std::size_t>(d)][i]);
      out[i] += term;
    }
  }
  for (auto& z : out) z *= ic;
  SpectralField res(FieldKind::Complex3D, torus_, cutoff_);
  from_grid(out, res, 0);
  return res;
}

double NonlinearEvaluator::ns_max_speed(const SpectralField& u) {
  Grid g0, g1;
  to_grid(u, 0, g0);
  to_grid(u, 1, g1);
  double worst = 0;
  for (std::size_t i = 0; i < g0.size(); ++i)
    worst = std::max(worst, std::sqrt(std::norm(g0[i]) + std::norm(g1[i])));
  return worst;
}

void NonlinearEvaluator::grid_of(const SpectralField& f, int comp, std::vector<Complex>& g) const {
  to_grid(f, comp, g);
}

void NonlinearEvaluator::grid_deriv_of(const SpectralField& f, int comp, int axis,
                                       std::vector<Complex>& g) const {
  to_grid_deriv(f, comp, axis, g);
}

void NonlinearEvaluator::field_of(const std::vector<Complex>& g, SpectralField& f, int comp) const {
  from_grid(g, f, comp);
}

double NonlinearEvaluator::mean_abs_pow(const SpectralField& u, int p) {
  double acc = 0;
  if (u.ncomp() == 1) {
    Grid g;
    to_grid(u, 0, g);
    for (const auto& z : g) acc += std::pow(std::abs(z), p);
    return acc / static_cast<double>(g.size());
  }
  Grid g0, g1;
  to_grid(u, 0, g0);
  to_grid(u, 1, g1);
  for (std::size_t i = 0; i < g0.size(); ++i)
    acc += std::pow(std::sqrt(std::norm(g0[i]) + std::norm(g1[i])), p);
  return acc / static_cast<double>(g0.size());
}

void write_field_csv(std::ostream& os, const SpectralField& f) {
  os << "dims," << f.dims() << "\n";
  os << "a";
  for (int i = 0; i < f.dims(); ++i) os << "," << fmt_double(f.torus().a[i]);
  os << "\n";
  os << "K," << f.cutoff() << "\n";
  os << "kind," << (f.kind() == FieldKind::DivFree2D ? "divfree2d" : "complex3d") << "\n";
  for (std::size_t i = 0; i < f.n_modes(); ++i) {
    WaveVector l = f.mode_at(i);
    for (int comp = 0; comp < f.ncomp(); ++comp) {
      const Complex& z = f.at(l, comp);
      for (int ax = 0; ax < f.dims(); ++ax) os << l[ax] << ",";
      os << comp << "," << fmt_double(z.real()) << "," << fmt_double(z.imag()) << "\n";
    }
  }
}

SpectralField read_field_csv(std::istream& is) {
  auto next_line = [&is]() {
    std::string line;
    DGM_REQUIRE(static_cast<bool>(std::getline(is, line)), "field csv: truncated header");
    return line;
  };
  auto split = [](const std::string& line) {
    std::vector<std::string> parts;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) parts.push_back(tok);
    return parts;
  };

  auto dims_row = split(next_line());
  DGM_REQUIRE(dims_row.size() == 2 && dims_row[0] == "dims", "field csv: bad dims row");
  int dims = std::stoi(dims_row[1]);
  auto a_row = split(next_line());
  DGM_REQUIRE(a_row.size() == static_cast<std::size_t>(dims) + 1 && a_row[0] == "a",
              "field csv: bad a row");
  TorusSpec torus;
  torus.dims = dims;
  for (int i = 0; i < dims; ++i) torus.a[i] = std::stod(a_row[static_cast<std::size_t>(i) + 1]);
  auto k_row = split(next_line());
  DGM_REQUIRE(k_row.size() == 2 && k_row[0] == "K", "field csv: bad K row");
  int cutoff = std::stoi(k_row[1]);
  auto kind_row = split(next_line());
  DGM_REQUIRE(kind_row.size() == 2 && kind_row[0] == "kind", "field csv: bad kind row");
  FieldKind kind = kind_row[1] == "divfree2d" ? FieldKind::DivFree2D : FieldKind::Complex3D;

  SpectralField f(kind, torus, cutoff);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto parts = split(line);
    DGM_REQUIRE(parts.size() == static_cast<std::size_t>(dims) + 3, "field csv: bad mode row");
    WaveVector l;
    for (int i = 0; i < dims; ++i) l[i] = std::stoi(parts[static_cast<std::size_t>(i)]);
    int comp = std::stoi(parts[static_cast<std::size_t>(dims)]);
    double re = std::stod(parts[static_cast<std::size_t>(dims) + 1]);
    double im = std::stod(parts[static_cast<std::size_t>(dims) + 2]);
    f.at(l, comp) = Complex(re, im);
  }
  return f;
}

void save_field(const std::string& path, const SpectralField& f) {
  std::ofstream os(path);
  DGM_REQUIRE(os.good(), "save_field: cannot open " + path);
  write_field_csv(os, f);
}

SpectralField load_field(const std::string& path) {
  std::ifstream is(path);
  DGM_REQUIRE(is.good(), "load_field: cannot open " + path);
  return read_field_csv(is);
}

}  // namespace degenmix
