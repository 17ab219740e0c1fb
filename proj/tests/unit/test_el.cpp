#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "cgof/el.hpp"
#include "cgof/error.hpp"
#include "support/oracles.hpp"

using namespace cgof;

namespace {

MomentMatrix column(std::initializer_list<double> values) {
  MomentMatrix m(static_cast<Eigen::Index>(values.size()), 1);
  Eigen::Index i = 0;
  for (double v : values) m(i++, 0) = v;
  return m;
}

}  // namespace

TEST(El, SymmetricPairHasZeroStatistic) {
  const ElSolution s = solve_lambda(column({1.0, -1.0}));
  EXPECT_EQ(s.status, ElStatus::kConverged);
  EXPECT_NEAR(s.lambda[0], 0.0, 1e-12);
  EXPECT_NEAR(s.statistic, 0.0, 1e-12);
  EXPECT_NEAR(s.weights[0], 0.5, 1e-12);
}

TEST(El, AsymmetricPairMatchesClosedFormAndGrid) {
  const ElSolution s = solve_lambda(column({1.0, -2.0}));
  EXPECT_EQ(s.status, ElStatus::kConverged);
  EXPECT_NEAR(s.lambda[0], -0.25, 1e-10);
  EXPECT_NEAR(s.statistic, 2.0 * std::log(9.0 / 8.0), 1e-9);
  const double lam = oracle::grid_argmax(
      [](double l) { return std::log1p(l) + std::log1p(-2.0 * l); }, -0.99, 0.49);
  EXPECT_NEAR(s.lambda[0], lam, 1e-6);
  EXPECT_NEAR(s.weights[0], 2.0 / 3.0, 1e-10);
  EXPECT_NEAR(s.weights[1], 1.0 / 3.0, 1e-10);
}

TEST(El, OriginOutsideHullIsReported) {
  const ElSolution s = solve_lambda(column({1.0, 2.0, 3.0}));
  EXPECT_EQ(s.status, ElStatus::kHullViolation);
  EXPECT_TRUE(std::isinf(s.statistic));
  EXPECT_TRUE(std::isinf(el_statistic(column({1.0, 2.0, 3.0}))));

  MomentMatrix planar(4, 2);
  planar << 1, 1, 2, -1, 1, 0.5, 3, 0;
  EXPECT_EQ(solve_lambda(planar).status, ElStatus::kHullViolation);
}

TEST(El, WilksCalibrationUnderNull) {
  std::mt19937_64 gen(2024);
  std::normal_distribution<double> normal;
  double sum = 0.0;
  const int reps = 500;
  for (int r = 0; r < reps; ++r) {
    MomentMatrix m(200, 1);
    for (int i = 0; i < 200; ++i) m(i, 0) = normal(gen);
    sum += el_statistic(m);
  }
  const double mean = sum / reps;
  EXPECT_GE(mean, 0.8);
  EXPECT_LE(mean, 1.2);
}

TEST(El, AffineInvariance) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 10; ++trial) {
    const auto inst = oracle::random_el_instance(gen, 60, 3);
    Eigen::MatrixXd A(3, 3);
    for (int i = 0; i < 9; ++i) A(i / 3, i % 3) = normal(gen);
    A += 3.0 * Eigen::MatrixXd::Identity(3, 3);
    const double a = el_statistic(inst.psi);
    const double b = el_statistic(inst.psi * A.transpose());
    const double c = el_statistic(inst.psi * 250.0);
    EXPECT_NEAR(a, b, 1e-6 * std::max(1.0, a));
    EXPECT_NEAR(a, c, 1e-6 * std::max(1.0, a));
  }
}

TEST(El, WeightsAreConsistentWithStatistic) {
  std::mt19937_64 gen(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto inst = oracle::random_el_instance(gen, 40, 2);
    const ElSolution s = solve_lambda(inst.psi);
    ASSERT_EQ(s.status, ElStatus::kConverged);
    const double n = 40.0;
    EXPECT_NEAR(s.weights.sum(), 1.0, 1e-6);
    EXPECT_NEAR((n * s.weights.array()).log().sum(), -s.log_ratio, 1e-6);
    EXPECT_LT((s.weights.transpose() * inst.psi).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_GE(s.weights.minCoeff(), 0.0);
  }
}

TEST(El, MatchesPrimalOracle) {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 25; ++trial) {
    const int p = 1 + trial % 4;
    const auto inst = oracle::random_el_instance(gen, 30 + 5 * p, p);
    const double primal = oracle::primal_el_statistic(inst.psi, inst.xi0);
    EXPECT_NEAR(el_statistic(inst.psi), primal, 1e-4) << "trial " << trial;
  }
}

TEST(El, DualObjectiveIsMaximised) {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> normal;
  const auto inst = oracle::random_el_instance(gen, 50, 2);
  const ElSolution s = solve_lambda(inst.psi);
  auto dual = [&](const Eigen::VectorXd& l) {
    return (1.0 + (inst.psi * l).array()).log().sum();
  };
  const double best = dual(s.lambda);
  EXPECT_NEAR(2.0 * best, s.statistic, 1e-9);
  for (int k = 0; k < 50; ++k) {
    Eigen::VectorXd step(2);
    step << normal(gen), normal(gen);
    const Eigen::VectorXd l = s.lambda + 1e-3 * step;
    if (((1.0 + (inst.psi * l).array()) > 0.0).all()) EXPECT_LE(dual(l), best + 1e-12);
  }
}

TEST(El, RejectsBadInput) {
  MomentMatrix m = column({1.0, -1.0, 0.5});
  m(1, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(solve_lambda(m), ArgumentError);
  m(1, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(solve_lambda(m), ArgumentError);
  EXPECT_THROW(solve_lambda(MomentMatrix(1, 1)), ArgumentError);
  EXPECT_THROW(solve_lambda(MomentMatrix(3, 0)), ArgumentError);
}

TEST(El, StatusNames) {
  EXPECT_EQ(to_string(ElStatus::kConverged), "converged");
  EXPECT_EQ(to_string(ElStatus::kHullViolation), "hull_violation");
  EXPECT_EQ(to_string(ElStatus::kMaxIter), "max_iter");
}
