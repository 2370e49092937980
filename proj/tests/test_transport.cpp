#include <algorithm>
#include <cmath>

#include "degenmix/rng.hpp"
#include "degenmix/transport.hpp"
#include "doctest.h"

using namespace degenmix;

namespace {

double brute_force_min(const Eigen::MatrixXd& cost) {
  int n = static_cast<int>(cost.rows());
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  double best = 1e300;
  do {
    double acc = 0;
    for (int i = 0; i < n; ++i) acc += cost(i, perm[static_cast<std::size_t>(i)]);
    best = std::min(best, acc);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST_CASE("assignment equals brute-force permutation minimum up to n = 6") {
  RngKey key = RngKey::root(7);
  std::uint64_t ctr = 0;
  for (int n = 1; n <= 6; ++n) {
    for (int rep = 0; rep < 8; ++rep) {
      Eigen::MatrixXd cost(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) cost(i, j) = 0.5 + key.u53(ctr++);
      AssignmentResult res = solve_assignment(cost);
      CHECK(res.total == doctest::Approx(brute_force_min(cost)).epsilon(1e-12));
      // the assignment is a permutation
      std::vector<char> used(static_cast<std::size_t>(n), 0);
      for (int i = 0; i < n; ++i) {
        REQUIRE(res.col_of_row[static_cast<std::size_t>(i)] >= 0);
        used[static_cast<std::size_t>(res.col_of_row[static_cast<std::size_t>(i)])] = 1;
      }
      for (char u : used) CHECK(u == 1);
    }
  }
}

TEST_CASE("identical samples give zero, single atoms give the pair cost") {
  Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(3, 3);
  CHECK(kantorovich_value(zero) == 0.0);
  Eigen::MatrixXd one(1, 1);
  one(0, 0) = 0.7312;
  CHECK(kantorovich_value(one) == doctest::Approx(0.7312));
}

TEST_CASE("assignment handles larger instances consistently") {
  // Doubling all costs doubles the optimum; permuting rows leaves it fixed.
  RngKey key = RngKey::root(17);
  int n = 64;
  Eigen::MatrixXd cost(n, n);
  std::uint64_t ctr = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) cost(i, j) = key.u53(ctr++);
  double base = solve_assignment(cost).total;
  Eigen::MatrixXd doubled = 2.0 * cost;
  CHECK(solve_assignment(doubled).total == doctest::Approx(2.0 * base).epsilon(1e-12));
  Eigen::MatrixXd shuffled = cost;
  shuffled.row(0).swap(shuffled.row(5));
  shuffled.row(2).swap(shuffled.row(9));
  CHECK(solve_assignment(shuffled).total == doctest::Approx(base).epsilon(1e-12));
}
