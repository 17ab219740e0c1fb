#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cgof/rng.hpp"

namespace cgof {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Family {
  kGaussianDiagonal,
  kPoissonProduct,
  kBernoulliProduct,
  kMultinomialProduct,
  kGaussianFull,
  kStudent3Product,
  kLogGaussianProduct,
  kGaussianCopula,
};

/// Marginal law of a Gaussian-copula component.
enum class Marginal { kGaussian, kLogGaussian };

std::string_view to_string(Family family);
Family family_from_string(std::string_view name);
std::string_view to_string(Marginal marginal);
Marginal marginal_from_string(std::string_view name);

/// The model m = {K, family}: component count, dimension and family shape.
struct MixtureSpec {
  Family family = Family::kGaussianDiagonal;
  int K = 1;
  int d = 1;
  /// Category counts per variable; multinomial_product only.
  std::vector<int> categories;
  /// Marginal family; gaussian_copula only.
  Marginal copula_marginal = Marginal::kGaussian;

  void validate() const;
  /// Only gaussian_diagonal, poisson, bernoulli and multinomial products have
  /// an EM implementation; the other families are generation-only.
  [[nodiscard]] bool fittable() const;

  friend bool operator==(const MixtureSpec&, const MixtureSpec&) = default;
};

/// Parameter block of one component. Which fields are used depends on the
/// family:
///   gaussian_diagonal   location = means, scale = variances
///   poisson_product     location = rates
///   bernoulli_product   location = success probabilities
///   multinomial_product category_probs = one probability row per variable
///   gaussian_full       location = means, dependence = covariance
///   student3_product    location = centres (unit scale, 3 degrees of freedom)
///   log_gaussian_product location = meanlog, scale = sdlog
///   gaussian_copula     location/scale = marginal mean and sd (on the log
///                       scale for log-Gaussian marginals), dependence =
///                       copula correlation matrix
struct ComponentParams {
  std::vector<double> location;
  std::vector<double> scale;
  std::vector<std::vector<double>> category_probs;
  Eigen::MatrixXd dependence;
};

/// theta = (pi, vartheta_1, ..., vartheta_K).
struct MixtureParams {
  std::vector<double> proportions;
  std::vector<ComponentParams> components;
};

/// n x d observations; labels (0-based component indices) are present only
/// for simulated data.
struct Dataset {
  Matrix values;
  std::vector<int> labels;

  [[nodiscard]] std::size_t n() const { return static_cast<std::size_t>(values.rows()); }
  [[nodiscard]] std::size_t d() const { return static_cast<std::size_t>(values.cols()); }
};

/// n x K matrix of posterior membership probabilities; rows lie on the simplex.
using PosteriorMatrix = Matrix;

/// Throws ValidationError naming the offending rows when a posterior row is
/// negative or does not sum to one within `tolerance`.
void validate_posteriors(const PosteriorMatrix& posteriors, double tolerance);

/// AR(1) correlation matrix with entries rho^|j - j'|.
Eigen::MatrixXd ar1_correlation(int d, double rho);

/// A validated mixture with cached per-component quantities (Cholesky factors,
/// normalising constants). Immutable; all members are safe to call
/// concurrently.
class Mixture {
 public:
  Mixture(MixtureSpec spec, MixtureParams params);

  [[nodiscard]] const MixtureSpec& spec() const { return spec_; }
  [[nodiscard]] const MixtureParams& params() const { return params_; }
  [[nodiscard]] int K() const { return spec_.K; }
  [[nodiscard]] int d() const { return spec_.d; }

  /// Writes log(pi_k) + log f_k(x) for every component into `out`.
  void joint_log_densities(std::span<const double> x, std::span<double> out) const;

  /// ln sum_k pi_k f_k(x), or -infinity when every component density is 0.
  [[nodiscard]] double log_density(std::span<const double> x) const;

  /// Posterior membership probabilities c(x), computed in log space.
  /// Throws NumericalError when all component densities vanish.
  void posterior(std::span<const double> x, std::span<double> out) const;
  [[nodiscard]] std::vector<double> posterior(std::span<const double> x) const;

  /// Posterior matrix of every row of `x`.
  [[nodiscard]] PosteriorMatrix posteriors(const Matrix& x) const;

  /// Draws one observation into `out` and returns its 0-based label.
  int sample_one(Rng& rng, std::span<double> out) const;
  [[nodiscard]] Dataset sample(std::size_t n, Rng& rng) const;

 private:
  double component_log_density(int k, std::span<const double> x) const;
  void sample_component(int k, Rng& rng, std::span<double> out) const;

  MixtureSpec spec_;
  MixtureParams params_;
  std::vector<double> log_proportions_;
  std::vector<double> cumulative_proportions_;
  // Per component: lower Cholesky factor of the covariance / correlation and
  // the constant part of the log density.
  std::vector<Eigen::MatrixXd> chol_;
  std::vector<double> log_norm_;
  std::vector<std::vector<double>> inv_scale_;
};

/// Free-function forms of the Mixture members.
double log_density(const MixtureSpec& spec, const MixtureParams& params,
                   std::span<const double> x);
std::vector<double> posterior(const MixtureSpec& spec, const MixtureParams& params,
                              std::span<const double> x);
Dataset sample(const MixtureSpec& spec, const MixtureParams& params, std::size_t n,
               Rng& rng);

}  // namespace cgof
