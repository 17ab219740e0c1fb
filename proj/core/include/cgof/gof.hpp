#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cgof/basis.hpp"
#include "cgof/el.hpp"
#include "cgof/mixture.hpp"
#include "cgof/rng.hpp"

namespace cgof {

struct GofConfig {
  /// Nominal level, 0 < alpha < 1/2.
  double alpha = 0.05;
  /// B = round(block_coefficient * n^(1 - rho)), so that n_b ~ n^rho / 4.
  double rho = 0.8;
  double block_coefficient = 4.0;
  /// p = floor(p_coefficient * n^p_exponent).
  double p_exponent = 1.0 / 9.0;
  double p_coefficient = 2.0;
  /// Monte Carlo draws for the centring expectation (and indicator cut-points).
  std::size_t mc_draws = 100000;
  BasisKind basis = BasisKind::kBernstein;
  BernsteinTerms bernstein_terms = BernsteinTerms::kIndependent;
  std::uint64_t seed = 0;
  /// 0 = resolve from the environment.
  int workers = 0;

  void validate() const;
};

struct Tuning {
  int B = 0;
  /// Near-equal split of n over B blocks, larger blocks first.
  std::vector<std::size_t> block_sizes;
  int p = 0;
};

/// Block count, block sizes and number of moment functions for sample size n.
Tuning tuning(std::size_t n, const GofConfig& config = {});

struct BlockPartition {
  int B = 0;
  /// 0-based block of every observation.
  std::vector<int> assignment;
  std::vector<std::size_t> sizes;
  /// Observation indices of every block, in permutation order.
  std::vector<std::vector<std::size_t>> members;
};

/// Uniformly random permutation of 0..n-1 cut into B contiguous runs whose
/// sizes differ by at most one (larger runs first).
BlockPartition partition_blocks(std::size_t n, int B, Rng& rng);

struct McExpectation {
  Eigen::VectorXd mean;
  /// Standard error of each coordinate of the mean.
  Eigen::VectorXd std_error;
  std::size_t draws = 0;
};

/// E[phi(c(X))] under X ~ model, estimated from M draws. The draws are split
/// into fixed-size chunks on streams derived from one output of `rng`, so the
/// estimate does not depend on `workers`.
McExpectation mc_expectation(const Mixture& model, const BasisSet& basis, std::size_t M, Rng& rng,
                             int workers = 1);

/// Mean of phi over rows of an already simulated posterior matrix.
McExpectation mc_expectation(const PosteriorMatrix& reference, const BasisSet& basis);

/// Row i = phi(posteriors_i) - expectation.
MomentMatrix moment_matrix(const PosteriorMatrix& posteriors, const BasisSet& basis,
                           const Eigen::VectorXd& expectation);
MomentMatrix moment_matrix(const Matrix& data, const Mixture& model, const BasisSet& basis,
                           const Eigen::VectorXd& expectation);

struct BlockResult {
  std::size_t size = 0;
  double statistic = 0.0;
  ElStatus status = ElStatus::kConverged;
  int iterations = 0;
};

struct GofReport {
  std::size_t n = 0;
  int K = 0;
  int B = 0;
  int p = 0;
  double alpha = 0.0;
  double alpha_n = 0.0;
  /// chi2_p quantile at 1 - alpha_n.
  double threshold = 0.0;
  double max_statistic = 0.0;
  bool reject = false;
  std::vector<BlockResult> blocks;
  BasisSet basis;
  std::string basis_description;
  McExpectation expectation;
  std::uint64_t seed = 0;
};

/// alpha_n = 1 - (1 - alpha)^(1/B), computed without cancellation.
double block_level(double alpha, int B);

/// Goodness-of-fit test of a fitted mixture on the data it was fitted to.
GofReport gof_test(const Matrix& data, const Mixture& model, const GofConfig& config);

/// Same test from externally computed posteriors. `reference` holds posterior
/// rows of draws from the fitted model; it supplies the centring expectation
/// and the indicator cut-points.
GofReport gof_test(const PosteriorMatrix& posteriors, const PosteriorMatrix& reference,
                   const GofConfig& config);

/// (empirical, theoretical) pairs: sorted `empirical` against the nearest-rank
/// quantiles of `reference` at probabilities (i - 1/2) / n.
std::vector<std::pair<double, double>> qq_table(std::vector<double> empirical,
                                                std::vector<double> reference);

/// QQ table of posterior coordinate k (0-based) on the data against M
/// posteriors of draws from the model.
std::vector<std::pair<double, double>> qq_export(const Matrix& data, const Mixture& model, int k,
                                                 std::size_t M, Rng& rng);

}  // namespace cgof
