#pragma once

#include <Eigen/Dense>
#include <vector>

namespace degenmix {

struct AssignmentResult {
  std::vector<int> col_of_row;  // optimal permutation
  double total = 0.0;
};

// Exact minimum-cost perfect assignment for a square cost matrix
// (shortest augmenting paths with potentials, O(n^3)).
AssignmentResult solve_assignment(const Eigen::MatrixXd& cost);

// Kantorovich functional between equal-size empirical measures with ground
// cost `cost`: the assignment optimum averaged per atom.
double kantorovich_value(const Eigen::MatrixXd& cost);

}  // namespace degenmix
