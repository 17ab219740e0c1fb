#include "cgof/el.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>

#include "cgof/error.hpp"

namespace cgof {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Beyond this size of 1 + lambda' psi the dual is treated as unbounded.
constexpr double kDivergence = 1e12;

// Owen's pseudo-logarithm: log z above eps, its second-order Taylor expansion
// at eps below.
struct LogStar {
  double eps;
  double log_eps;

  [[nodiscard]] double value(double z) const {
    if (z >= eps) return std::log(z);
    const double r = z / eps;
    return log_eps - 1.5 + 2.0 * r - 0.5 * r * r;
  }
  [[nodiscard]] double first(double z) const { return z >= eps ? 1.0 / z : (2.0 - z / eps) / eps; }
  [[nodiscard]] double second(double z) const {
    return z >= eps ? -1.0 / (z * z) : -1.0 / (eps * eps);
  }
};

}  // namespace

std::string_view to_string(ElStatus status) {
  switch (status) {
    case ElStatus::kConverged:
      return "converged";
    case ElStatus::kHullViolation:
      return "hull_violation";
    case ElStatus::kMaxIter:
      return "max_iter";
  }
  return "unknown";
}

ElSolution solve_lambda(const MomentMatrix& moments, const ElSettings& settings) {
  const Eigen::Index n = moments.rows();
  const Eigen::Index p = moments.cols();
  if (p < 1) throw ArgumentError("solve_lambda: need at least one moment column");
  if (n <= p) {
    throw ArgumentError("solve_lambda: need more rows than columns (n_b = " + std::to_string(n) +
                        ", p = " + std::to_string(p) + ")");
  }
  if (!moments.allFinite()) throw ArgumentError("solve_lambda: moment matrix has non-finite entries");

  const double scale = std::max(moments.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  const LogStar logstar{1.0 / static_cast<double>(n), -std::log(static_cast<double>(n))};

  ElSolution sol;
  sol.lambda = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd z = Eigen::VectorXd::Ones(n);

  auto objective = [&](const Eigen::VectorXd& lambda, Eigen::VectorXd& zz) {
    zz.noalias() = moments * lambda;
    zz.array() += 1.0;
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) total += logstar.value(zz[i]);
    return total;
  };

  auto unit_mass = [&](const Eigen::VectorXd& zz) {
    return std::abs(zz.array().inverse().sum() / static_cast<double>(n) - 1.0) <= 1e-6;
  };

  double current = 0.0;
  bool converged = false;
  bool diverged = false;
  Eigen::VectorXd d1(n), d2(n), trial_z(n);
  int iter = 0;
  for (; iter < settings.max_iter; ++iter) {
    for (Eigen::Index i = 0; i < n; ++i) {
      d1[i] = logstar.first(z[i]);
      d2[i] = -logstar.second(z[i]);
    }
    const Eigen::VectorXd gradient = moments.transpose() * d1;
    // The gradient also fades along a divergent ray, so stationarity alone is
    // not enough: the implied weights must carry unit mass as well.
    if (gradient.cwiseAbs().maxCoeff() <= settings.tol * scale * static_cast<double>(n) &&
        unit_mass(z)) {
      converged = true;
      break;
    }
    Eigen::MatrixXd hessian = moments.transpose() * d2.asDiagonal() * moments;
    Eigen::LLT<Eigen::MatrixXd> llt(hessian);
    const double trace = hessian.trace();
    if (llt.info() != Eigen::Success ||
        llt.matrixLLT().diagonal().minCoeff() <= 1e-7 * std::sqrt(trace)) {
      hessian.diagonal().array() += 1e-12 * trace + std::numeric_limits<double>::min();
      llt.compute(hessian);
    }
    const Eigen::VectorXd step = llt.solve(gradient);
    const double decrement = gradient.dot(step);
    if (!std::isfinite(decrement)) {
      diverged = true;
      break;
    }
    double t = 1.0;
    bool moved = false;
    for (int halving = 0; halving < 60; ++halving) {
      const Eigen::VectorXd candidate = sol.lambda + t * step;
      const double value = objective(candidate, trial_z);
      if (value >= current + 1e-4 * t * decrement) {
        sol.lambda = candidate;
        z = trial_z;
        moved = value > current;
        current = value;
        break;
      }
      t *= 0.5;
    }
    if (!moved) {
      // No ascent possible at working precision.
      converged = unit_mass(z);
      diverged = !converged;
      break;
    }
    if (z.maxCoeff() > kDivergence) {
      diverged = true;
      break;
    }
  }
  sol.iterations = iter;

  const bool in_extension = (z.array() < logstar.eps).any();
  if (diverged || in_extension) {
    sol.status = ElStatus::kHullViolation;
    sol.log_ratio = kInf;
    sol.statistic = kInf;
    sol.weights = Eigen::VectorXd::Zero(n);
    return sol;
  }
  sol.status = converged ? ElStatus::kConverged : ElStatus::kMaxIter;
  double r = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) r += std::log(z[i]);
  sol.log_ratio = r;
  sol.statistic = 2.0 * r;
  sol.weights = (static_cast<double>(n) * z.array()).inverse().matrix();
  return sol;
}

double el_statistic(const MomentMatrix& moments) { return solve_lambda(moments).statistic; }

}  // namespace cgof
