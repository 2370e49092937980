#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <vector>

#include "degenmix/lattice.hpp"

namespace degenmix {

// Exact rational with normalised sign and gcd-reduced terms.
struct Rational {
  long long num = 0;
  long long den = 1;

  Rational() = default;
  Rational(long long n, long long d = 1);
  Rational operator+(const Rational& o) const;
  Rational operator-(const Rational& o) const;
  Rational operator*(const Rational& o) const;
  Rational operator/(const Rational& o) const;
  bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
  bool operator!=(const Rational& o) const { return !(*this == o); }
  bool is_zero() const { return num == 0; }
  double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
};

// Continued-fraction rationalisation with denominator cap; nullopt when x
// is not well approximated by a small fraction.
std::optional<Rational> rationalize(double x, long long max_den = 4096, double tol = 1e-12);

struct ModeSet {
  int dims = 2;
  std::vector<WaveVector> elems;

  bool symmetric() const;
  bool contains(const WaveVector& v) const;
};

// True iff the integer combinations of the elements span the full lattice
// Z^dims (Smith normal form of the stacked element matrix has unit
// invariant factors).
bool is_generator(const ModeSet& set);

// Smith normal form diagonal (invariant factors, non-negative) of an
// n x dims integer matrix.
std::vector<long long> smith_diagonal(std::vector<std::array<long long, 3>> rows, int dims);

// Interaction coefficient of Eq-level NS mode combination:
//   C_a(l,r) = |(l-r)^{perp_a}|^{-2} <l^{perp_a}, r>_a (|l^{perp_a}|^2 - |r^{perp_a}|^2),
// exact when the torus ratios are rational. l != r required.
Rational interaction_coefficient(const std::array<Rational, 2>& a, const WaveVector& l,
                                 const WaveVector& r);
double interaction_coefficient(const TorusSpec& torus, const WaveVector& l, const WaveVector& r);

struct SaturationResult {
  bool verdict = false;        // closed-form saturation decision
  bool window_full = false;    // coverage filled the |l_i| <= K window
  bool agrees = false;         // verdict == window_full
  int iterations = 0;
  std::vector<std::set<WaveVector>> coverage;  // coverage after each sweep
  bool used_rational = true;   // exact arithmetic for the norm comparisons
  bool near_tie_warning = false;
};

// NS saturation: closed form (generator with a non-parallel pair of
// distinct |.^{perp_a}| norms) plus the windowed interaction recursion.
SaturationResult saturate_ns(const TorusSpec& torus, const ModeSet& set, int window);

// CGL saturation: closed form (generator; 0 must belong to the set) plus
// the windowed product recursion l -> l +- r.
SaturationResult saturate_cgl(const ModeSet& set, int window);

}  // namespace degenmix
