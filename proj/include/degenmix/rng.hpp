#pragma once

#include <cstdint>
#include <string_view>

namespace degenmix {

// Counter-based random streams. A stream is identified by a 64-bit key
// derived from the master seed and a chain of tags/indices; the n-th draw
// is a pure function of (key, n). Streams never share state, so ensembles
// and worker threads can draw independently and reproducibly.
namespace rng {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

// SplitMix64 finalizer (Stafford mix13).
constexpr std::uint64_t mix(std::uint64_t z) {
  z += kGamma;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace rng

struct RngKey {
  std::uint64_t key = 0;

  static RngKey root(std::uint64_t seed) { return RngKey{rng::mix(seed)}; }
  RngKey sub(std::uint64_t id) const { return RngKey{rng::mix(key ^ rng::mix(id))}; }
  RngKey sub(std::string_view tag) const { return sub(rng::fnv1a64(tag)); }

  std::uint64_t u64(std::uint64_t counter) const { return rng::mix(key ^ (rng::kGamma * counter)); }

  // Uniform on [0,1) with 53-bit resolution; the sampling grid is 2^-53.
  double u53(std::uint64_t counter) const {
    return static_cast<double>(u64(counter) >> 11) * 0x1.0p-53;
  }

  // Uniform on [-1,1).
  double sym(std::uint64_t counter) const { return 2.0 * u53(counter) - 1.0; }

  std::uint64_t below(std::uint64_t n, std::uint64_t counter) const { return u64(counter) % n; }
};

// Law of the scalar noise coefficients xi: Lipschitz density supported in
// [-1,1] with 0 in the support. Default rho(x) = (3/4)(1-x^2)_+.
// Sampling is by inverse CDF, resolved with fixed-count bisection so the
// result is a pure arithmetic function of the 53-bit uniform draw.
struct XiLaw {
  static double density(double x) {
    if (x <= -1.0 || x >= 1.0) return 0.0;
    return 0.75 * (1.0 - x * x);
  }

  static double cdf(double x) {
    if (x <= -1.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return (3.0 * x - x * x * x + 2.0) * 0.25;
  }

  static double quantile(double u) {
    double lo = -1.0, hi = 1.0;
    for (int it = 0; it < 64; ++it) {
      double mid = 0.5 * (lo + hi);
      if (cdf(mid) < u)
        lo = mid;
      else
        hi = mid;
    }
    return 0.5 * (lo + hi);
  }

  static double sample(const RngKey& k, std::uint64_t counter) { return quantile(k.u53(counter)); }
};

}  // namespace degenmix
