#include <cmath>
#include <sstream>

#include "degenmix/lattice.hpp"
#include "degenmix/rng.hpp"
#include "doctest.h"

using namespace degenmix;

namespace {

SpectralField random_ns_field(const TorusSpec& torus, int cutoff, RngKey key, bool project = true) {
  SpectralField f(FieldKind::DivFree2D, torus, cutoff);
  std::uint64_t ctr = 0;
  for (std::size_t i = 0; i < f.n_modes(); ++i) {
    WaveVector l = f.mode_at(i);
    for (int comp = 0; comp < 2; ++comp)
      f.at(l, comp) = Complex(key.sym(ctr++), key.sym(ctr++));
  }
  f.enforce_reality();
  return project ? leray_project(f) : f;
}

SpectralField random_cgl_field(const TorusSpec& torus, int cutoff, RngKey key) {
  SpectralField f(FieldKind::Complex3D, torus, cutoff);
  std::uint64_t ctr = 0;
  for (std::size_t i = 0; i < f.n_modes(); ++i) {
    WaveVector l = f.mode_at(i);
    f.at(l, 0) = Complex(key.sym(ctr++), key.sym(ctr++));
  }
  return f;
}

// Brute-force truncated convolution of two coefficient tables:
// (u * v)_l = sum_{l = l' + l''} u_{l'} v_{l''}.
SpectralField conv_oracle_product(const SpectralField& u, const SpectralField& v, int uc, int vc,
                                  SpectralField proto, int out_comp) {
  for (std::size_t i = 0; i < proto.n_modes(); ++i) {
    WaveVector l = proto.mode_at(i);
    Complex acc(0, 0);
    for (std::size_t j = 0; j < u.n_modes(); ++j) {
      WaveVector lp = u.mode_at(j);
      WaveVector lq = l - lp;
      if (!v.in_window(lq)) continue;
      acc += u.at(lp, uc) * v.at(lq, vc);
    }
    proto.at(l, out_comp) = acc;
  }
  return proto;
}

// Exact B(u) = Pi(<u,grad>u) by direct convolution (NS oracle).
SpectralField ns_b_oracle(const SpectralField& u) {
  SpectralField du[2][2] = {{u, u}, {u, u}};  // du[comp][axis]
  for (int comp = 0; comp < 2; ++comp)
    for (int axis = 0; axis < 2; ++axis) {
      for (std::size_t i = 0; i < u.n_modes(); ++i) {
        WaveVector l = u.mode_at(i);
        du[comp][axis].at(l, 0) = u.at(l, comp) * Complex(0, l[axis] / u.torus().a[axis]);
        du[comp][axis].at(l, 1) = 0;
      }
    }
  SpectralField out(FieldKind::DivFree2D, u.torus(), u.cutoff());
  for (int comp = 0; comp < 2; ++comp) {
    SpectralField term(FieldKind::DivFree2D, u.torus(), u.cutoff());
    // u_0 d_0 u_comp + u_1 d_1 u_comp
    for (std::size_t i = 0; i < out.n_modes(); ++i) {
      WaveVector l = out.mode_at(i);
      Complex acc(0, 0);
      for (std::size_t j = 0; j < u.n_modes(); ++j) {
        WaveVector lp = u.mode_at(j);
        WaveVector lq = l - lp;
        if (!u.in_window(lq)) continue;
        acc += u.at(lp, 0) * du[comp][0].at(lq, 0) + u.at(lp, 1) * du[comp][1].at(lq, 0);
      }
      term.at(l, comp) = acc;
    }
    out += term;
  }
  return leray_project(out);
}

// Exact CGL quintic/cubic by repeated convolution.
SpectralField cgl_b_oracle(const SpectralField& u, double c, int m) {
  // Work on an enlarged window so no intermediate mode is lost.
  int big = (2 * m + 1) * u.cutoff();
  SpectralField wide(FieldKind::Complex3D, u.torus(), big);
  for (std::size_t i = 0; i < u.n_modes(); ++i) {
    WaveVector l = u.mode_at(i);
    wide.at(l, 0) = u.at(l, 0);
  }
  SpectralField conj_wide = wide;
  for (std::size_t i = 0; i < wide.n_modes(); ++i) {
    WaveVector l = wide.mode_at(i);
    conj_wide.at(l, 0) = std::conj(wide.at(-l, 0));
  }
  SpectralField acc = wide;  // u^1
  for (int p = 1; p < m + 1; ++p)
    acc = conv_oracle_product(acc, wide, 0, 0, SpectralField(FieldKind::Complex3D, u.torus(), big), 0);
  for (int p = 0; p < m; ++p)
    acc = conv_oracle_product(acc, conj_wide, 0, 0,
                              SpectralField(FieldKind::Complex3D, u.torus(), big), 0);
  SpectralField out(FieldKind::Complex3D, u.torus(), u.cutoff());
  for (std::size_t i = 0; i < out.n_modes(); ++i) {
    WaveVector l = out.mode_at(i);
    out.at(l, 0) = Complex(0, c) * acc.at(l, 0);
  }
  return out;
}

}  // namespace

TEST_CASE("leray projection fixes divergence-free fields and kills gradients") {
  TorusSpec torus = TorusSpec::square2d(1.0, 1.5);
  int K = 4;
  SpectralField v = random_ns_field(torus, K, RngKey::root(5));
  CHECK(v.divergence_defect() < 1e-12);
  SpectralField pv = leray_project(v);
  SpectralField diff = pv;
  diff -= v;
  CHECK(hnorm(diff) < 1e-12);  // projection fixes its range

  // Pure gradient of a trig polynomial maps to zero: grad(cos<l,x>_a) has
  // coefficient i (l/a) at +-l.
  SpectralField grad(FieldKind::DivFree2D, torus, K);
  WaveVector l(2, 1);
  grad.at(l, 0) = Complex(0, l[0] / torus.a[0]);
  grad.at(l, 1) = Complex(0, l[1] / torus.a[1]);
  grad.at(-l, 0) = Complex(0, -l[0] / torus.a[0]);
  grad.at(-l, 1) = Complex(0, -l[1] / torus.a[1]);
  CHECK(hnorm(leray_project(grad)) < 1e-14);

  // a = (1,1), l = (1,0): the projector P(l^perp) annihilates (1,0).
  TorusSpec sq = TorusSpec::square2d();
  SpectralField w(FieldKind::DivFree2D, sq, K);
  WaveVector e1(1, 0);
  w.at(e1, 0) = 0.5;
  w.at(-e1, 0) = 0.5;  // (1,0) cos<e1,x>
  CHECK(hnorm(leray_project(w)) < 1e-14);
}

TEST_CASE("leray projection is orthogonal and idempotent on random input") {
  TorusSpec torus = TorusSpec::square2d(1.0, 2.0);
  for (int rep = 0; rep < 10; ++rep) {
    SpectralField v = random_ns_field(torus, 5, RngKey::root(100 + rep), false);
    SpectralField pv = leray_project(v);
    SpectralField ppv = leray_project(pv);
    SpectralField d = ppv;
    d -= pv;
    CHECK(hnorm(d) < 1e-12);
    SpectralField rem = v;
    rem -= pv;
    CHECK(std::abs(hdot(pv, rem)) < 1e-12);
    CHECK(pv.divergence_defect() < 1e-12);
  }
}

TEST_CASE("basis fields follow the branch/amplitude conventions") {
  TorusSpec torus = TorusSpec::square2d();
  // l = (0,1): l1 = 0, l2 > 0 selects the cosine branch; amplitude
  // l^{perp_a} = (-1, 0).
  WaveVector l(0, 1);
  CHECK(basis_branch(l) == TrigBranch::Cos);
  SpectralField e = ns_basis_field(torus, 3, l);
  CHECK(e.at(l, 0) == Complex(-0.5, 0.0));
  CHECK(e.at(l, 1) == Complex(0.0, 0.0));
  CHECK(e.at(-l, 0) == Complex(-0.5, 0.0));
  CHECK(e.reality_defect() < 1e-15);
  CHECK(e.divergence_defect() < 1e-15);

  // l and -l give the cosine/sine pair on the same ray.
  WaveVector r(2, -1);
  SpectralField ep = ns_basis_field(torus, 3, r);
  SpectralField em = ns_basis_field(torus, 3, -r);
  CHECK(basis_branch(r) == TrigBranch::Cos);
  CHECK(basis_branch(-r) == TrigBranch::Sin);
  CHECK(std::abs(hdot(ep, em)) < 1e-14);  // cos and sin are orthogonal

  // CGL, l = 0: the constant field 1.
  SpectralField one = cgl_basis_field(TorusSpec::cube3d(), 2, WaveVector(0, 0, 0));
  CHECK(one.at(WaveVector(0, 0, 0), 0) == Complex(1, 0));
  CHECK(hnorm(one) == doctest::Approx(1.0));
}

TEST_CASE("ns nonlinearity: skew symmetry, Q symmetry, convolution oracle") {
  TorusSpec torus = TorusSpec::square2d(1.0, 1.25);
  int K = 3;
  NonlinearEvaluator ev(FieldKind::DivFree2D, torus, K, dealias_grid(K, 2));
  for (int rep = 0; rep < 12; ++rep) {
    SpectralField u = random_ns_field(torus, K, RngKey::root(900 + rep));
    SpectralField b = ev.ns_b(u);
    // <B(u), u> = 0 (advection skew symmetry).
    CHECK(std::abs(hdot(b, u)) < 1e-10 * (1 + hdot(u, u)));
    // agreement with the exact convolution oracle
    SpectralField oracle = ns_b_oracle(u);
    SpectralField diff = b;
    diff -= oracle;
    CHECK(hnorm(diff) < 1e-12 * std::max(1.0, hnorm(oracle)));
  }
  // Q symmetry is exact by construction.
  SpectralField z = random_ns_field(torus, K, RngKey::root(31));
  SpectralField x = random_ns_field(torus, K, RngKey::root(32));
  SpectralField q1 = ev.ns_q(z, x);
  SpectralField q2 = ev.ns_q(x, z);
  SpectralField d = q1;
  d -= q2;
  CHECK(hnorm(d) < 1e-13);
  // B(u) = Q(u,u)/2.
  SpectralField b2 = ev.ns_q(z, z);
  b2 *= 0.5;
  SpectralField b1 = ev.ns_b(z);
  b2 -= b1;
  CHECK(hnorm(b2) < 1e-13);
}

TEST_CASE("cgl nonlinearity matches the convolution oracle (m = 1, 2)") {
  TorusSpec torus = TorusSpec::cube3d(1.0, 1.0, 1.5);
  int K = 1;
  for (int m : {1, 2}) {
    NonlinearEvaluator ev(FieldKind::Complex3D, torus, K, dealias_grid(K, 2 * m + 1));
    for (int rep = 0; rep < 4; ++rep) {
      SpectralField u = random_cgl_field(torus, K, RngKey::root(50 + 10 * m + rep));
      SpectralField b = ev.cgl_b(u, 0.7, m);
      SpectralField oracle = cgl_b_oracle(u, 0.7, m);
      SpectralField diff = b;
      diff -= oracle;
      CHECK(hnorm(diff) < 1e-12 * std::max(1.0, hnorm(oracle)));
    }
  }
}

TEST_CASE("cgl derivatives match finite differences and the B5 identity") {
  TorusSpec torus = TorusSpec::cube3d();
  int K = 1;
  int m = 2;
  double c = 1.3;
  NonlinearEvaluator ev(FieldKind::Complex3D, torus, K, dealias_grid(K, 2 * m + 1));
  SpectralField u = random_cgl_field(torus, K, RngKey::root(77));
  SpectralField v = random_cgl_field(torus, K, RngKey::root(78));

  // First derivative: finite-difference order >= 1.9.
  std::vector<double> errs, hs;
  for (double h : {1e-2, 1e-3, 1e-4}) {
    SpectralField up = u;
    up.add_scaled(v, h);
    SpectralField lhs = ev.cgl_b(up, c, m);
    lhs -= ev.cgl_b(u, c, m);
    SpectralField rhs = ev.cgl_q(u, v, c, m);
    rhs *= h;
    lhs -= rhs;
    errs.push_back(hnorm(lhs));
    hs.push_back(h);
  }
  double order = std::log(errs[0] / errs[2]) / std::log(hs[0] / hs[2]);
  CHECK(order >= 1.9);

  // B5(zeta, phi, 1, 1, 1) = 12 i c (3 zeta phi + conj(zeta) conj(phi)
  //                                  + 3 conj(zeta) phi + 3 zeta conj(phi)).
  SpectralField zeta = random_cgl_field(torus, K, RngKey::root(79));
  SpectralField phi = random_cgl_field(torus, K, RngKey::root(80));
  SpectralField one = cgl_basis_field(torus, K, WaveVector(0, 0, 0));
  std::vector<const SpectralField*> dirs{&zeta, &phi, &one, &one, &one};
  SpectralField b5 = ev.cgl_bk(u, dirs, c, m);

  // Right-hand side assembled from exact convolutions on a widened window.
  auto widen = [&](const SpectralField& f, int big) {
    SpectralField w(FieldKind::Complex3D, torus, big);
    for (std::size_t i = 0; i < f.n_modes(); ++i) w.at(f.mode_at(i), 0) = f.at(f.mode_at(i), 0);
    return w;
  };
  auto conj_field = [&](const SpectralField& f) {
    SpectralField w = f;
    for (std::size_t i = 0; i < f.n_modes(); ++i)
      w.at(f.mode_at(i), 0) = std::conj(f.at(-f.mode_at(i), 0));
    return w;
  };
  int big = 2 * K;
  SpectralField zw = widen(zeta, big), pw = widen(phi, big);
  SpectralField zc = conj_field(zw), pc = conj_field(pw);
  auto prod = [&](const SpectralField& a, const SpectralField& b) {
    return conv_oracle_product(a, b, 0, 0, SpectralField(FieldKind::Complex3D, torus, big), 0);
  };
  SpectralField rhs_big(FieldKind::Complex3D, torus, big);
  rhs_big.add_scaled(prod(zw, pw), 3.0);
  rhs_big.add_scaled(prod(zc, pc), 1.0);
  rhs_big.add_scaled(prod(zc, pw), 3.0);
  rhs_big.add_scaled(prod(zw, pc), 3.0);
  SpectralField rhs(FieldKind::Complex3D, torus, K);
  for (std::size_t i = 0; i < rhs.n_modes(); ++i)
    rhs.at(rhs.mode_at(i), 0) = Complex(0, 12.0 * c) * rhs_big.at(rhs.mode_at(i), 0);
  SpectralField diff = b5;
  diff -= rhs;
  CHECK(hnorm(diff) < 1e-11 * std::max(1.0, hnorm(rhs)));
}

TEST_CASE("sobolev norms: weights and monotonicity") {
  TorusSpec torus = TorusSpec::square2d(1.0, 2.0);
  SpectralField z(FieldKind::DivFree2D, torus, 4);
  CHECK(sobolev_norm(z, 0) == 0.0);

  // Single mode, unit coefficient: the squared-norm ratio between s = 2 and
  // s = 0 is (1 + |l^{perp_a}|^2)^2.
  WaveVector l(2, 1);
  SpectralField e = ns_basis_field(torus, 4, l);
  auto p = perp_a(torus, l);
  double lam = p[0] * p[0] + p[1] * p[1];
  double ratio2 = sobolev_dot(e, e, 2) / sobolev_dot(e, e, 0);
  CHECK(ratio2 == doctest::Approx((1.0 + lam) * (1.0 + lam)).epsilon(1e-12));

  for (int rep = 0; rep < 200; ++rep) {
    SpectralField u = random_ns_field(torus, 4, RngKey::root(4000 + rep));
    CHECK(sobolev_norm(u, 0) <= sobolev_norm(u, 2) * (1 + 1e-12));
  }
}

TEST_CASE("field csv snapshot round trips bit-exactly") {
  TorusSpec torus = TorusSpec::square2d(1.0, 1.0 / 3.0);
  SpectralField u = random_ns_field(torus, 3, RngKey::root(321));
  std::stringstream ss;
  write_field_csv(ss, u);
  SpectralField back = read_field_csv(ss);
  REQUIRE(back.n_modes() == u.n_modes());
  for (std::size_t i = 0; i < u.raw().size(); ++i) {
    CHECK(back.raw()[i].real() == u.raw()[i].real());
    CHECK(back.raw()[i].imag() == u.raw()[i].imag());
  }
  std::stringstream ss2;
  write_field_csv(ss2, back);
  CHECK(ss2.str() == [&] {
    std::stringstream s3;
    write_field_csv(s3, u);
    return s3.str();
  }());
}
