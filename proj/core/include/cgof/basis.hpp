#pragma once

#include <span>
#include <string>
#include <vector>

#include "cgof/mixture.hpp"
#include "cgof/rng.hpp"

namespace cgof {

enum class BasisKind { kBernstein, kIndicatorPca };

std::string_view to_string(BasisKind kind);
BasisKind basis_kind_from_string(std::string_view name);

/// Which Bernstein polynomials enter the basis.
enum class BernsteinTerms {
  /// Walk the degree-ordered list and skip any polynomial that is a linear
  /// combination of the constant and the terms already kept, so the moment
  /// covariance stays invertible.
  kIndependent,
  /// Keep the degree-ordered list verbatim.
  kAll,
};

/// (s! / prod_k j_k!) * prod_k a_k^{j_k}.
struct BernsteinTerm {
  std::vector<int> exponents;
  double coefficient = 1.0;

  [[nodiscard]] int degree() const;
  [[nodiscard]] double operator()(std::span<const double> a) const;

  friend bool operator==(const BernsteinTerm&, const BernsteinTerm&) = default;
};

/// p bounded functions on the K-simplex.
struct BasisSet {
  BasisKind kind = BasisKind::kBernstein;
  int K = 2;
  int p = 1;
  std::vector<BernsteinTerm> terms;
  /// Indicator basis: p ascending cut-points on the first posterior
  /// coordinate. Region r is [cut_{r-1}, cut_r) with the last region closed.
  std::vector<double> cut_points;
  /// Indicator basis: (p+1) x p matrix with orthonormal columns orthogonal to
  /// the constant vector (Helmert contrasts). Region r maps to
  /// sqrt(p + 1) * contrasts.row(r).
  Matrix contrasts;

  /// Writes (phi_1(a), ..., phi_p(a)) into out. `a` must lie on the simplex
  /// within 1e-8.
  void evaluate(std::span<const double> a, std::span<double> out) const;
  [[nodiscard]] std::vector<double> evaluate(std::span<const double> a) const;

  /// Region index in [0, p] of a first posterior coordinate.
  [[nodiscard]] int region(double c1) const;

  [[nodiscard]] std::string describe() const;
};

/// All Bernstein polynomials of degree s in K variables, in descending
/// lexicographic order of the exponent vector.
std::vector<BernsteinTerm> bernstein_terms_of_degree(int K, int s);

/// Degree-1 terms a_1..a_{K-1}, then degree 2, 3, ... truncated at p.
BasisSet bernstein_basis(int K, int p, BernsteinTerms mode = BernsteinTerms::kIndependent);

/// (p+1) x p Helmert contrast matrix.
Matrix helmert_contrasts(int p);

/// Indicator basis for K = 2 from model-simulated values of c_1(X): cut-points
/// at the empirical j/(p+1) quantiles, functions = scaled orthonormal
/// contrasts of the region indicators.
BasisSet indicator_basis(std::span<const double> model_c1, int p);

/// Same, drawing `draws` observations from the fitted mixture.
BasisSet indicator_basis(const Mixture& model, int p, std::size_t draws, Rng& rng);

/// Free-function form of BasisSet::evaluate.
std::vector<double> evaluate(const BasisSet& basis, std::span<const double> a);

}  // namespace cgof
