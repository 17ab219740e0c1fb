#include "cgof/basis.hpp"

#include <algorithm>
#include <numeric>
#include <cmath>
#include <sstream>

#include "cgof/error.hpp"

namespace cgof {
namespace {

constexpr double kSimplexTolerance = 1e-8;
constexpr double kDependenceTolerance = 1e-9;

void exponents_of_degree(int K, int remaining, std::vector<int>& current,
                         std::vector<BernsteinTerm>& out) {
  const int position = static_cast<int>(current.size());
  if (position == K - 1) {
    current.push_back(remaining);
    BernsteinTerm term;
    term.exponents = current;
    const int s = std::accumulate(current.begin(), current.end(), 0);
    double coefficient = std::tgamma(s + 1.0);
    for (int j : current) coefficient /= std::tgamma(j + 1.0);
    term.coefficient = std::round(coefficient);
    out.push_back(std::move(term));
    current.pop_back();
    return;
  }
  for (int j = remaining; j >= 0; --j) {
    current.push_back(j);
    exponents_of_degree(K, remaining - j, current, out);
    current.pop_back();
  }
}

// Deterministic generic points in the interior of the simplex used to test
// linear independence of candidate polynomials.
Matrix probe_points(int K, int count) {
  Rng rng(0x5EEDB45150ull, static_cast<std::uint64_t>(K));
  Matrix points(count, K);
  for (int i = 0; i < count; ++i) {
    double s = 0.0;
    for (int k = 0; k < K; ++k) {
      points(i, k) = -std::log(rng.uniform_open());
      s += points(i, k);
    }
    points.row(i) /= s;
  }
  return points;
}

}  // namespace

std::string_view to_string(BasisKind kind) {
  return kind == BasisKind::kBernstein ? "bernstein" : "indicator";
}

BasisKind basis_kind_from_string(std::string_view name) {
  if (name == "bernstein") return BasisKind::kBernstein;
  if (name == "indicator" || name == "indicator_pca") return BasisKind::kIndicatorPca;
  throw ArgumentError("unknown basis kind '" + std::string(name) + "'");
}

int BernsteinTerm::degree() const { return std::accumulate(exponents.begin(), exponents.end(), 0); }

double BernsteinTerm::operator()(std::span<const double> a) const {
  double value = coefficient;
  for (std::size_t k = 0; k < exponents.size(); ++k) {
    for (int e = 0; e < exponents[k]; ++e) value *= a[k];
  }
  return value;
}

void BasisSet::evaluate(std::span<const double> a, std::span<double> out) const {
  if (static_cast<int>(a.size()) != K) {
    throw ArgumentError("basis evaluate: point has " + std::to_string(a.size()) +
                        " coordinates, expected " + std::to_string(K));
  }
  double sum = 0.0;
  for (double v : a) {
    if (!(v >= -kSimplexTolerance)) throw ArgumentError("basis evaluate: point is off the simplex");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kSimplexTolerance) {
    throw ArgumentError("basis evaluate: point is off the simplex");
  }
  if (kind == BasisKind::kBernstein) {
    for (int j = 0; j < p; ++j) out[j] = terms[j](a);
    return;
  }
  const int r = region(a[0]);
  const double scale = std::sqrt(static_cast<double>(p + 1));
  for (int j = 0; j < p; ++j) out[j] = scale * contrasts(r, j);
}

std::vector<double> BasisSet::evaluate(std::span<const double> a) const {
  std::vector<double> out(static_cast<std::size_t>(p));
  evaluate(a, out);
  return out;
}

int BasisSet::region(double c1) const {
  return static_cast<int>(std::upper_bound(cut_points.begin(), cut_points.end(), c1) -
                          cut_points.begin());
}

std::string BasisSet::describe() const {
  std::ostringstream out;
  out << to_string(kind) << " K=" << K << " p=" << p;
  if (kind == BasisKind::kBernstein) {
    out << " terms=";
    for (std::size_t j = 0; j < terms.size(); ++j) {
      out << (j == 0 ? "" : ",") << '(';
      for (std::size_t k = 0; k < terms[j].exponents.size(); ++k) {
        out << (k == 0 ? "" : " ") << terms[j].exponents[k];
      }
      out << ')';
    }
  } else {
    out.precision(6);
    out << " cuts=";
    for (std::size_t j = 0; j < cut_points.size(); ++j) out << (j == 0 ? "" : ",") << cut_points[j];
  }
  return out.str();
}

std::vector<BernsteinTerm> bernstein_terms_of_degree(int K, int s) {
  if (K < 1 || s < 0) throw ArgumentError("bernstein terms: need K >= 1 and s >= 0");
  std::vector<BernsteinTerm> out;
  std::vector<int> current;
  exponents_of_degree(K, s, current, out);
  return out;
}

BasisSet bernstein_basis(int K, int p, BernsteinTerms mode) {
  if (K < 2) throw ArgumentError("bernstein_basis: K must be >= 2");
  if (p < 1) throw ArgumentError("bernstein_basis: p must be >= 1");
  BasisSet basis;
  basis.kind = BasisKind::kBernstein;
  basis.K = K;
  basis.p = p;

  const int probes = 4 * (p + 1) + 20;
  const Matrix points = probe_points(K, probes);
  // Orthonormal columns spanning the constant and the kept terms.
  std::vector<Eigen::VectorXd> span_basis{Eigen::VectorXd::Constant(probes, 1.0 / std::sqrt(probes))};

  auto independent = [&](const BernsteinTerm& term) {
    Eigen::VectorXd v(probes);
    for (int i = 0; i < probes; ++i) {
      v[i] = term(std::span<const double>(points.row(i).data(), static_cast<std::size_t>(K)));
    }
    const double norm = v.norm();
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : span_basis) v -= q.dot(v) * q;
    }
    if (v.norm() <= kDependenceTolerance * norm) return false;
    span_basis.push_back(v.normalized());
    return true;
  };

  for (int s = 1; static_cast<int>(basis.terms.size()) < p; ++s) {
    std::vector<BernsteinTerm> candidates = bernstein_terms_of_degree(K, s);
    if (s == 1) candidates.pop_back();  // drop a_K
    for (BernsteinTerm& term : candidates) {
      if (static_cast<int>(basis.terms.size()) == p) break;
      if (mode == BernsteinTerms::kIndependent && !independent(term)) continue;
      basis.terms.push_back(std::move(term));
    }
  }
  return basis;
}

Matrix helmert_contrasts(int p) {
  if (p < 1) throw ArgumentError("helmert_contrasts: p must be >= 1");
  Matrix h = Matrix::Zero(p + 1, p);
  for (int j = 0; j < p; ++j) {
    const double norm = std::sqrt(static_cast<double>(j + 1) * (j + 2));
    for (int r = 0; r <= j; ++r) h(r, j) = 1.0 / norm;
    h(j + 1, j) = -static_cast<double>(j + 1) / norm;
  }
  return h;
}

BasisSet indicator_basis(std::span<const double> model_c1, int p) {
  if (p < 1) throw ArgumentError("indicator_basis: p must be >= 1");
  const std::size_t m = model_c1.size();
  if (m < 10 * static_cast<std::size_t>(p + 1)) {
    throw ArgumentError("indicator_basis: need at least 10 (p + 1) model draws");
  }
  std::vector<double> sorted(model_c1.begin(), model_c1.end());
  std::sort(sorted.begin(), sorted.end());
  BasisSet basis;
  basis.kind = BasisKind::kIndicatorPca;
  basis.K = 2;
  basis.p = p;
  basis.cut_points.resize(p);
  for (int j = 1; j <= p; ++j) {
    const auto index = static_cast<std::size_t>(
        std::llround(static_cast<double>(j) * static_cast<double>(m) / (p + 1)));
    basis.cut_points[j - 1] = sorted[std::min(index, m - 1)];
  }
  for (int j = 1; j < p; ++j) {
    if (!(basis.cut_points[j] > basis.cut_points[j - 1])) {
      throw NumericalError(
          "indicator_basis: degenerate partition, duplicate cut-points (atomic posterior values)");
    }
  }
  if (!(basis.cut_points.front() > sorted.front())) {
    throw NumericalError("indicator_basis: degenerate partition, empty first region");
  }
  basis.contrasts = helmert_contrasts(p);
  return basis;
}

BasisSet indicator_basis(const Mixture& model, int p, std::size_t draws, Rng& rng) {
  if (model.K() != 2) {
    throw UnsupportedError("indicator_basis: only K = 2 is supported");
  }
  std::vector<double> c1(draws);
  std::vector<double> x(static_cast<std::size_t>(model.d()));
  std::vector<double> c(2);
  for (std::size_t m = 0; m < draws; ++m) {
    model.sample_one(rng, x);
    model.posterior(x, c);
    c1[m] = c[0];
  }
  return indicator_basis(c1, p);
}

std::vector<double> evaluate(const BasisSet& basis, std::span<const double> a) {
  return basis.evaluate(a);
}

}  // namespace cgof
