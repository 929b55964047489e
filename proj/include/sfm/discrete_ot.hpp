#pragma once

#include <span>
#include <vector>

#include "sfm/matrix.hpp"

namespace sfm {

struct TransportPlan {
  Matrix plan;  // (n x m)
  double cost = 0.0;
  std::vector<double> a;
  std::vector<double> b;

  std::size_t nonzeros() const;
};

/// Validates nonnegative weights summing to 1 (tol 1e-9).
void check_marginal(std::span<const double> w, const char* which);

/// Exact Kantorovich solver (network simplex). Returns a vertex of the
/// transport polytope. Pivoting is deterministic: block-search pricing with
/// lowest index on ties, Cunningham's leaving-arc rule on a strongly feasible tree.
TransportPlan solve_emd(std::span<const double> a, std::span<const double> b, const Matrix& cost);

/// Squared Euclidean cost matrix between the rows of X and Y.
Matrix squared_cost(const Matrix& x, const Matrix& y);

double w2_squared(const Matrix& x, const Matrix& y, std::span<const double> a, std::span<const double> b);
/// Uniform weights on both sides.
double w2_squared(const Matrix& x, const Matrix& y);

/// 1-d uniform matching by sorted order; plan indices refer to the input order.
TransportPlan solve_1d_monotone(std::span<const double> x, std::span<const double> y);

/// Optimum by enumeration of basic feasible solutions (permutations when
/// marginals are uniform and square). Test oracle, n*m <= 36.
TransportPlan brute_force_emd(std::span<const double> a, std::span<const double> b, const Matrix& cost);

}  // namespace sfm
