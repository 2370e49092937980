#include <cmath>

#include "degenmix/lattice.hpp"
#include "degenmix/rng.hpp"
#include "degenmix/saturation.hpp"
#include "doctest.h"

using namespace degenmix;

namespace {

ModeSet sym2(std::initializer_list<WaveVector> half) {
  ModeSet s;
  s.dims = 2;
  for (const auto& v : half) {
    s.elems.push_back(v);
    s.elems.push_back(-v);
  }
  return s;
}

}  // namespace

TEST_CASE("generator test via smith normal form") {
  CHECK(is_generator(sym2({WaveVector(1, 0), WaveVector(0, 1)})));
  CHECK_FALSE(is_generator(sym2({WaveVector(2, 0), WaveVector(0, 2)})));  // index-4 sublattice
  CHECK(is_generator(sym2({WaveVector(1, 0), WaveVector(1, 1)})));        // unimodular pair
  CHECK_FALSE(is_generator(sym2({WaveVector(2, 1), WaveVector(1, 2)})));  // determinant 3
  ModeSet line = sym2({WaveVector(1, 0)});
  CHECK_FALSE(is_generator(line));  // rank deficient

  ModeSet cube;
  cube.dims = 3;
  for (auto v : {WaveVector(1, 0, 0), WaveVector(0, 1, 0), WaveVector(0, 0, 1)}) {
    cube.elems.push_back(v);
    cube.elems.push_back(-v);
  }
  cube.elems.push_back(WaveVector(0, 0, 0));
  CHECK(is_generator(cube));
}

TEST_CASE("interaction coefficient: exact values and vanishing cases") {
  std::array<Rational, 2> unit{Rational(1), Rational(1)};
  // Parallel l, r: <l^{perp_a}, r>_a = 0.
  CHECK(interaction_coefficient(unit, WaveVector(2, 2), WaveVector(1, 1)).is_zero());
  // Equal perp norms: the norm factor vanishes.
  CHECK(interaction_coefficient(unit, WaveVector(1, 2), WaveVector(2, 1)).is_zero());
  // Worked example: a = (1,1), l = (1,1), r = (1,0) gives C = -1.
  Rational c = interaction_coefficient(unit, WaveVector(1, 1), WaveVector(1, 0));
  CHECK(c == Rational(-1));
  // Float fallback agrees.
  CHECK(interaction_coefficient(TorusSpec::square2d(), WaveVector(1, 1), WaveVector(1, 0)) ==
        doctest::Approx(-1.0));
  CHECK_THROWS(interaction_coefficient(unit, WaveVector(1, 1), WaveVector(1, 1)));
}

TEST_CASE("paper examples: saturating sets for square and rectangular tori") {
  // a = (1,1): {(1,0),(-1,0),(1,1),(-1,-1)} saturates.
  ModeSet s1 = sym2({WaveVector(1, 0), WaveVector(1, 1)});
  SaturationResult r1 = saturate_ns(TorusSpec::square2d(), s1, 6);
  CHECK(r1.verdict);
  CHECK(r1.window_full);
  CHECK(r1.agrees);

  // a = (lambda, 1), lambda != 1: axis modes saturate...
  ModeSet axes = sym2({WaveVector(1, 0), WaveVector(0, 1)});
  SaturationResult r2 = saturate_ns(TorusSpec::square2d(1.5, 1.0), axes, 6);
  CHECK(r2.verdict);
  CHECK(r2.agrees);
  // ...but not at lambda = 1 (all non-parallel pairs have equal perp norms).
  SaturationResult r3 = saturate_ns(TorusSpec::square2d(), axes, 6);
  CHECK_FALSE(r3.verdict);
  CHECK_FALSE(r3.window_full);
  CHECK(r3.agrees);

  // CGL: the 14-dimensional example.
  ModeSet cgl;
  cgl.dims = 3;
  cgl.elems.push_back(WaveVector(0, 0, 0));
  for (auto v : {WaveVector(1, 0, 0), WaveVector(0, 1, 0), WaveVector(0, 0, 1)}) {
    cgl.elems.push_back(v);
    cgl.elems.push_back(-v);
  }
  // dim H(I) = 2 * |I| with e_l and i e_l: 2 * 7 = 14.
  CHECK(2 * static_cast<int>(cgl.elems.size()) == 14);
  SaturationResult r4 = saturate_cgl(cgl, 4);
  CHECK(r4.verdict);
  CHECK(r4.window_full);
  CHECK(r4.agrees);

  // Non-generator CGL set stalls on the sublattice.
  ModeSet cgl2;
  cgl2.dims = 3;
  cgl2.elems.push_back(WaveVector(0, 0, 0));
  for (auto v : {WaveVector(2, 0, 0), WaveVector(0, 2, 0), WaveVector(0, 0, 2)}) {
    cgl2.elems.push_back(v);
    cgl2.elems.push_back(-v);
  }
  SaturationResult r5 = saturate_cgl(cgl2, 4);
  CHECK_FALSE(r5.verdict);
  CHECK_FALSE(r5.window_full);
  CHECK(r5.agrees);
}

TEST_CASE("coverage is monotone and rejects non-symmetric input") {
  ModeSet s = sym2({WaveVector(1, 0), WaveVector(1, 1)});
  SaturationResult r = saturate_ns(TorusSpec::square2d(), s, 5);
  for (std::size_t k = 1; k < r.coverage.size(); ++k) {
    for (const auto& l : r.coverage[k - 1]) CHECK(r.coverage[k].count(l) == 1);
    CHECK(r.coverage[k].size() >= r.coverage[k - 1].size());
  }
  ModeSet bad;
  bad.dims = 2;
  bad.elems = {WaveVector(1, 0)};
  CHECK_THROWS(saturate_ns(TorusSpec::square2d(), bad, 4));
}

TEST_CASE("exhaustive window oracle: closed form equals coverage for small symmetric sets") {
  // All symmetric I in {-2..2}^2 with |I| <= 6, window K = 6.
  std::vector<WaveVector> half;
  for (int x = -2; x <= 2; ++x)
    for (int y = -2; y <= 2; ++y) {
      WaveVector v(x, y);
      if (v.is_zero()) continue;
      bool seen = false;
      for (const auto& h : half)
        if (h == -v) seen = true;
      if (!seen) half.push_back(v);
    }
  REQUIRE(half.size() == 12);
  int checked = 0, disagreements = 0;
  for (std::size_t i = 0; i < half.size(); ++i)
    for (std::size_t j = i; j < half.size(); ++j)
      for (std::size_t k = j; k < half.size(); ++k) {
        ModeSet s;
        s.dims = 2;
        auto push_pair = [&](const WaveVector& v) {
          if (!s.contains(v)) {
            s.elems.push_back(v);
            s.elems.push_back(-v);
          }
        };
        push_pair(half[i]);
        push_pair(half[j]);
        push_pair(half[k]);
        SaturationResult r = saturate_ns(TorusSpec::square2d(), s, 6);
        ++checked;
        if (!r.agrees) ++disagreements;
      }
  CHECK(checked >= 298);
  CHECK(disagreements == 0);
}

TEST_CASE("Q-identities: combination rule sums against the lattice module") {
  // Q(c_l, 2 alpha c_r) + Q(s_l, 2 beta s_r) lands on the (l +- r) rays with
  // the interaction coefficients C_a(l, r), C_a(l, -r).
  TorusSpec torus = TorusSpec::square2d(1.0, 1.5);
  int K = 6;
  NonlinearEvaluator ev(FieldKind::DivFree2D, torus, K, dealias_grid(K, 2));
  RngKey key = RngKey::root(2718);
  int done = 0;
  for (int rep = 0; rep < 200 && done < 50; ++rep) {
    WaveVector l(static_cast<int>(key.below(5, 4 * rep)) - 2,
                 static_cast<int>(key.below(5, 4 * rep + 1)) - 2);
    WaveVector r(static_cast<int>(key.below(5, 4 * rep + 2)) - 2,
                 static_cast<int>(key.below(5, 4 * rep + 3)) - 2);
    if (l.is_zero() || r.is_zero()) continue;
    WaveVector sum = l + r, diff = l - r;
    if (diff.is_zero() || sum.is_zero()) continue;
    long long cross = static_cast<long long>(l[0]) * r[1] - static_cast<long long>(l[1]) * r[0];
    if (cross == 0) continue;
    double alpha = key.sym(10000 + rep), beta = key.sym(20000 + rep);

    SpectralField cl = ns_trig_field(torus, K, l, TrigBranch::Cos);
    SpectralField sl = ns_trig_field(torus, K, l, TrigBranch::Sin);
    SpectralField cr = ns_trig_field(torus, K, r, TrigBranch::Cos);
    SpectralField sr = ns_trig_field(torus, K, r, TrigBranch::Sin);
    SpectralField cr2 = cr;
    cr2 *= 2.0 * alpha;
    SpectralField sr2 = sr;
    sr2 *= 2.0 * beta;
    SpectralField lhs = ev.ns_q(cl, cr2);
    lhs += ev.ns_q(sl, sr2);

    double c_minus = interaction_coefficient(torus, l, r);
    double c_plus = interaction_coefficient(torus, l, -r);
    SpectralField rhs(FieldKind::DivFree2D, torus, K);
    rhs.add_scaled(ns_trig_field(torus, K, diff, TrigBranch::Sin), c_minus * (alpha + beta));
    rhs.add_scaled(ns_trig_field(torus, K, sum, TrigBranch::Sin), -c_plus * (alpha - beta));
    SpectralField d = lhs;
    d -= rhs;
    CHECK(hnorm(d) < 1e-12 * std::max(1.0, hnorm(rhs)));
    ++done;
  }
  CHECK(done == 50);
}

TEST_CASE("rationalize recovers small fractions and rejects irrationals") {
  auto r = rationalize(1.5);
  REQUIRE(r.has_value());
  CHECK(*r == Rational(3, 2));
  auto r2 = rationalize(1.0 / 3.0);
  REQUIRE(r2.has_value());
  CHECK(*r2 == Rational(1, 3));
  CHECK_FALSE(rationalize(std::sqrt(2.0)).has_value());
}
