#pragma once

#include <Eigen/Core>
#include <string_view>

#include "cgof/mixture.hpp"

namespace cgof {

/// n_b x p matrix whose rows are the centred moment vectors of one block.
using MomentMatrix = Matrix;

enum class ElStatus { kConverged, kHullViolation, kMaxIter };

std::string_view to_string(ElStatus status);

struct ElSolution {
  Eigen::VectorXd lambda;
  /// R = sum_i log(1 + lambda' psi_i); +infinity on hull violation.
  double log_ratio = 0.0;
  /// 2 R.
  double statistic = 0.0;
  /// xi_i = 1 / (n_b (1 + lambda' psi_i)).
  Eigen::VectorXd weights;
  ElStatus status = ElStatus::kConverged;
  int iterations = 0;
};

struct ElSettings {
  double tol = 1e-10;
  int max_iter = 100;
};

/// Empirical likelihood for the moment condition E[psi] = 0. Maximises the
/// dual sum_i log*(1 + lambda' psi_i), where log* is the logarithm extended
/// quadratically below 1/n_b, by damped Newton with backtracking. When the
/// origin is outside the convex hull of the rows the dual is unbounded; this
/// is reported as kHullViolation with an infinite statistic.
ElSolution solve_lambda(const MomentMatrix& moments, const ElSettings& settings = {});

/// 2 R for the block, or +infinity on hull violation.
double el_statistic(const MomentMatrix& moments);

}  // namespace cgof
