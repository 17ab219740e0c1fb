#include "cgof/mixture.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "cgof/error.hpp"
#include "cgof/numerics.hpp"

namespace cgof {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454836;

constexpr std::array<std::pair<Family, std::string_view>, 8> kFamilyNames = {{
    {Family::kGaussianDiagonal, "gaussian_diagonal"},
    {Family::kPoissonProduct, "poisson_product"},
    {Family::kBernoulliProduct, "bernoulli_product"},
    {Family::kMultinomialProduct, "multinomial_product"},
    {Family::kGaussianFull, "gaussian_full"},
    {Family::kStudent3Product, "student3_product"},
    {Family::kLogGaussianProduct, "log_gaussian_product"},
    {Family::kGaussianCopula, "gaussian_copula"},
}};

// log of the standard t density with 3 degrees of freedom at 0.
const double kLogT3Norm = -numerics::log_gamma(1.5) - 0.5 * std::log(3.0 * std::numbers::pi);

std::string component_prefix(int k) { return "component " + std::to_string(k + 1) + ": "; }

void require_size(const std::vector<double>& v, int d, int k, const char* field) {
  if (static_cast<int>(v.size()) != d) {
    throw ArgumentError(component_prefix(k) + field + " must have " + std::to_string(d) +
                        " entries");
  }
}

void require_all(const std::vector<double>& v, int k, const char* field, auto predicate,
                 const char* rule) {
  for (double value : v) {
    if (!predicate(value)) {
      throw ArgumentError(component_prefix(k) + field + " " + rule);
    }
  }
}

Eigen::MatrixXd cholesky_or_throw(const Eigen::MatrixXd& m, int d, int k, const char* what) {
  if (m.rows() != d || m.cols() != d) {
    throw ArgumentError(component_prefix(k) + what + " must be " + std::to_string(d) + "x" +
                        std::to_string(d));
  }
  if (!m.allFinite() || (m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + m.cwiseAbs().maxCoeff())) {
    throw ArgumentError(component_prefix(k) + what + " must be finite and symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success || !(llt.matrixL().toDenseMatrix().diagonal().array() > 0.0).all()) {
    throw ArgumentError(component_prefix(k) + what + " is not positive definite");
  }
  return llt.matrixL().toDenseMatrix();
}

}  // namespace

std::string_view to_string(Family family) {
  for (const auto& [f, name] : kFamilyNames) {
    if (f == family) return name;
  }
  return "unknown";
}

Family family_from_string(std::string_view name) {
  for (const auto& [f, known] : kFamilyNames) {
    if (known == name) return f;
  }
  throw ArgumentError("unknown mixture family '" + std::string(name) + "'");
}

std::string_view to_string(Marginal marginal) {
  return marginal == Marginal::kGaussian ? "gaussian" : "log_gaussian";
}

Marginal marginal_from_string(std::string_view name) {
  if (name == "gaussian") return Marginal::kGaussian;
  if (name == "log_gaussian") return Marginal::kLogGaussian;
  throw ArgumentError("unknown copula marginal '" + std::string(name) + "'");
}

void MixtureSpec::validate() const {
  if (K < 1) throw ArgumentError("mixture spec: K must be >= 1");
  if (d < 1) throw ArgumentError("mixture spec: d must be >= 1");
  if (family == Family::kMultinomialProduct) {
    if (static_cast<int>(categories.size()) != d) {
      throw ArgumentError("mixture spec: multinomial_product needs one category count per variable");
    }
    for (int c : categories) {
      if (c < 2) throw ArgumentError("mixture spec: category counts must be >= 2");
    }
  }
}

bool MixtureSpec::fittable() const {
  return family == Family::kGaussianDiagonal || family == Family::kPoissonProduct ||
         family == Family::kBernoulliProduct || family == Family::kMultinomialProduct;
}

void validate_posteriors(const PosteriorMatrix& posteriors, double tolerance) {
  std::vector<Eigen::Index> bad;
  for (Eigen::Index i = 0; i < posteriors.rows(); ++i) {
    const auto row = posteriors.row(i);
    const bool ok = row.allFinite() && row.minCoeff() >= -tolerance &&
                    std::abs(row.sum() - 1.0) <= tolerance;
    if (!ok) bad.push_back(i);
  }
  if (bad.empty()) return;
  std::ostringstream msg;
  msg << bad.size() << " posterior row(s) off the simplex (tolerance " << tolerance
      << "); rows:";
  for (std::size_t j = 0; j < std::min<std::size_t>(bad.size(), 20); ++j) msg << ' ' << bad[j] + 1;
  if (bad.size() > 20) msg << " ...";
  throw ValidationError(msg.str());
}

Eigen::MatrixXd ar1_correlation(int d, double rho) {
  Eigen::MatrixXd r(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) r(i, j) = std::pow(rho, std::abs(i - j));
  }
  return r;
}

Mixture::Mixture(MixtureSpec spec, MixtureParams params)
    : spec_(std::move(spec)), params_(std::move(params)) {
  spec_.validate();
  const int K = spec_.K;
  const int d = spec_.d;
  if (static_cast<int>(params_.proportions.size()) != K ||
      static_cast<int>(params_.components.size()) != K) {
    throw ArgumentError("mixture params: expected " + std::to_string(K) + " components");
  }
  double total = 0.0;
  for (double pi : params_.proportions) {
    const bool ok = K == 1 ? pi > 0.0 : (pi > 0.0 && pi < 1.0);
    if (!ok || !std::isfinite(pi)) {
      throw ArgumentError("mixture params: proportions must lie in (0, 1)");
    }
    total += pi;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ArgumentError("mixture params: proportions must sum to 1");
  }

  log_proportions_.resize(K);
  cumulative_proportions_.resize(K);
  chol_.resize(K);
  log_norm_.assign(K, 0.0);
  inv_scale_.assign(K, {});
  double cumulative = 0.0;
  for (int k = 0; k < K; ++k) {
    log_proportions_[k] = std::log(params_.proportions[k]);
    cumulative += params_.proportions[k];
    cumulative_proportions_[k] = cumulative;
  }
  cumulative_proportions_.back() = 1.0;

  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  auto finite = [](double v) { return std::isfinite(v); };
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };

  for (int k = 0; k < K; ++k) {
    const ComponentParams& c = params_.components[k];
    std::vector<double>& cache = inv_scale_[k];
    switch (spec_.family) {
      case Family::kGaussianDiagonal: {
        require_size(c.location, d, k, "means");
        require_size(c.scale, d, k, "variances");
        require_all(c.location, k, "means", finite, "must be finite");
        require_all(c.scale, k, "variances", positive, "must be > 0");
        double norm = 0.0;
        cache.resize(d);
        for (int j = 0; j < d; ++j) {
          norm -= 0.5 * (kLog2Pi + std::log(c.scale[j]));
          cache[j] = 1.0 / c.scale[j];
        }
        log_norm_[k] = norm;
        break;
      }
      case Family::kPoissonProduct:
        require_size(c.location, d, k, "rates");
        require_all(c.location, k, "rates", positive, "must be > 0");
        cache.resize(d);
        for (int j = 0; j < d; ++j) {
          cache[j] = std::log(c.location[j]);
          log_norm_[k] -= c.location[j];
        }
        break;
      case Family::kBernoulliProduct:
        require_size(c.location, d, k, "probabilities");
        require_all(c.location, k, "probabilities", unit, "must lie in [0, 1]");
        cache.resize(2 * static_cast<std::size_t>(d));
        for (int j = 0; j < d; ++j) {
          cache[2 * j] = std::log1p(-c.location[j]);
          cache[2 * j + 1] = std::log(c.location[j]);
        }
        break;
      case Family::kMultinomialProduct: {
        if (static_cast<int>(c.category_probs.size()) != d) {
          throw ArgumentError(component_prefix(k) + "needs one category table per variable");
        }
        for (int j = 0; j < d; ++j) {
          const auto& row = c.category_probs[j];
          if (static_cast<int>(row.size()) != spec_.categories[j]) {
            throw ArgumentError(component_prefix(k) + "category table size mismatch for variable " +
                                std::to_string(j + 1));
          }
          double s = 0.0;
          for (double v : row) {
            if (!unit(v)) throw ArgumentError(component_prefix(k) + "category probabilities must lie in [0, 1]");
            s += v;
            cache.push_back(std::log(v));
          }
          if (std::abs(s - 1.0) > 1e-9) {
            throw ArgumentError(component_prefix(k) + "category probabilities must sum to 1");
          }
        }
        break;
      }
      case Family::kGaussianFull:
        require_size(c.location, d, k, "means");
        require_all(c.location, k, "means", finite, "must be finite");
        chol_[k] = cholesky_or_throw(c.dependence, d, k, "covariance");
        log_norm_[k] = -0.5 * d * kLog2Pi - chol_[k].diagonal().array().log().sum();
        break;
      case Family::kStudent3Product:
        require_size(c.location, d, k, "locations");
        require_all(c.location, k, "locations", finite, "must be finite");
        log_norm_[k] = d * kLogT3Norm;
        break;
      case Family::kLogGaussianProduct:
        require_size(c.location, d, k, "meanlog");
        require_size(c.scale, d, k, "sdlog");
        require_all(c.location, k, "meanlog", finite, "must be finite");
        require_all(c.scale, k, "sdlog", positive, "must be > 0");
        cache.resize(d);
        log_norm_[k] = -0.5 * d * kLog2Pi;
        for (int j = 0; j < d; ++j) {
          log_norm_[k] -= std::log(c.scale[j]);
          cache[j] = 1.0 / c.scale[j];
        }
        break;
      case Family::kGaussianCopula: {
        require_size(c.location, d, k, "marginal means");
        require_size(c.scale, d, k, "marginal sds");
        require_all(c.location, k, "marginal means", finite, "must be finite");
        require_all(c.scale, k, "marginal sds", positive, "must be > 0");
        if (c.dependence.rows() == d && c.dependence.cols() == d &&
            (c.dependence.diagonal().array() - 1.0).abs().maxCoeff() > 1e-12) {
          throw ArgumentError(component_prefix(k) + "copula correlation must have unit diagonal");
        }
        chol_[k] = cholesky_or_throw(c.dependence, d, k, "copula correlation");
        cache.resize(d);
        log_norm_[k] = -0.5 * d * kLog2Pi - chol_[k].diagonal().array().log().sum();
        for (int j = 0; j < d; ++j) {
          log_norm_[k] -= std::log(c.scale[j]);
          cache[j] = 1.0 / c.scale[j];
        }
        break;
      }
    }
  }
}

double Mixture::component_log_density(int k, std::span<const double> x) const {
  const ComponentParams& c = params_.components[k];
  const std::vector<double>& cache = inv_scale_[k];
  const int d = spec_.d;
  switch (spec_.family) {
    case Family::kGaussianDiagonal: {
      double q = 0.0;
      for (int j = 0; j < d; ++j) {
        const double r = x[j] - c.location[j];
        q += r * r * cache[j];
      }
      return log_norm_[k] - 0.5 * q;
    }
    case Family::kPoissonProduct: {
      // The -sum(lgamma(x + 1)) term is shared by all components; callers add it.
      double s = log_norm_[k];
      for (int j = 0; j < d; ++j) {
        if (x[j] != 0.0) s += x[j] * cache[j];
      }
      return s;
    }
    case Family::kBernoulliProduct: {
      double s = 0.0;
      for (int j = 0; j < d; ++j) s += cache[2 * j + (x[j] != 0.0 ? 1 : 0)];
      return s;
    }
    case Family::kMultinomialProduct: {
      double s = 0.0;
      std::size_t offset = 0;
      for (int j = 0; j < d; ++j) {
        s += cache[offset + static_cast<std::size_t>(x[j])];
        offset += static_cast<std::size_t>(spec_.categories[j]);
      }
      return s;
    }
    case Family::kGaussianFull: {
      Eigen::VectorXd r(d);
      for (int j = 0; j < d; ++j) r[j] = x[j] - c.location[j];
      chol_[k].triangularView<Eigen::Lower>().solveInPlace(r);
      return log_norm_[k] - 0.5 * r.squaredNorm();
    }
    case Family::kStudent3Product: {
      double s = log_norm_[k];
      for (int j = 0; j < d; ++j) {
        const double r = x[j] - c.location[j];
        s -= 2.0 * std::log1p(r * r / 3.0);
      }
      return s;
    }
    case Family::kLogGaussianProduct: {
      double s = log_norm_[k];
      for (int j = 0; j < d; ++j) {
        const double lx = std::log(x[j]);
        const double z = (lx - c.location[j]) * cache[j];
        s -= lx + 0.5 * z * z;
      }
      return s;
    }
    case Family::kGaussianCopula: {
      Eigen::VectorXd z(d);
      double s = log_norm_[k];
      const bool log_marginal = spec_.copula_marginal == Marginal::kLogGaussian;
      for (int j = 0; j < d; ++j) {
        double t = x[j];
        if (log_marginal) {
          t = std::log(t);
          s -= t;
        }
        z[j] = (t - c.location[j]) * cache[j];
      }
      chol_[k].triangularView<Eigen::Lower>().solveInPlace(z);
      return s - 0.5 * z.squaredNorm();
    }
  }
  return kNegInf;
}

void Mixture::joint_log_densities(std::span<const double> x, std::span<double> out) const {
  const int d = spec_.d;
  if (static_cast<int>(x.size()) != d) {
    throw ArgumentError("observation has " + std::to_string(x.size()) + " values, expected " +
                        std::to_string(d));
  }
  // Support checks shared by every component.
  double shared = 0.0;
  bool outside = false;
  for (int j = 0; j < d && !outside; ++j) {
    const double v = x[j];
    if (!std::isfinite(v)) {
      outside = true;
      break;
    }
    switch (spec_.family) {
      case Family::kPoissonProduct:
        if (v < 0.0 || v != std::floor(v)) {
          outside = true;
        } else if (v > 1.0) {
          shared -= numerics::log_gamma(v + 1.0);
        }
        break;
      case Family::kBernoulliProduct:
        if (v != 0.0 && v != 1.0) outside = true;
        break;
      case Family::kMultinomialProduct:
        if (v < 0.0 || v != std::floor(v) || v >= spec_.categories[j]) outside = true;
        break;
      case Family::kLogGaussianProduct:
        if (v <= 0.0) outside = true;
        break;
      case Family::kGaussianCopula:
        if (spec_.copula_marginal == Marginal::kLogGaussian && v <= 0.0) outside = true;
        break;
      default:
        break;
    }
  }
  for (int k = 0; k < spec_.K; ++k) {
    out[k] = outside ? kNegInf : log_proportions_[k] + shared + component_log_density(k, x);
  }
}

double Mixture::log_density(std::span<const double> x) const {
  std::vector<double> joint(static_cast<std::size_t>(spec_.K));
  joint_log_densities(x, joint);
  const double top = *std::max_element(joint.begin(), joint.end());
  if (top == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double v : joint) sum += std::exp(v - top);
  return top + std::log(sum);
}

void Mixture::posterior(std::span<const double> x, std::span<double> out) const {
  joint_log_densities(x, out);
  const double top = *std::max_element(out.begin(), out.end());
  if (top == -std::numeric_limits<double>::infinity() || std::isnan(top)) {
    throw NumericalError("posterior undefined: every component density is zero");
  }
  double sum = 0.0;
  for (double& v : out) {
    v = std::exp(v - top);
    sum += v;
  }
  for (double& v : out) v /= sum;
}

std::vector<double> Mixture::posterior(std::span<const double> x) const {
  std::vector<double> out(static_cast<std::size_t>(spec_.K));
  posterior(x, out);
  return out;
}

PosteriorMatrix Mixture::posteriors(const Matrix& x) const {
  PosteriorMatrix out(x.rows(), spec_.K);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    try {
      posterior(std::span<const double>(x.row(i).data(), static_cast<std::size_t>(x.cols())),
                std::span<double>(out.row(i).data(), static_cast<std::size_t>(spec_.K)));
    } catch (const NumericalError&) {
      throw NumericalError("posterior undefined for row " + std::to_string(i + 1) +
                           ": every component density is zero");
    }
  }
  return out;
}

void Mixture::sample_component(int k, Rng& rng, std::span<double> out) const {
  const ComponentParams& c = params_.components[k];
  const int d = spec_.d;
  switch (spec_.family) {
    case Family::kGaussianDiagonal:
      for (int j = 0; j < d; ++j) out[j] = c.location[j] + std::sqrt(c.scale[j]) * rng.normal();
      break;
    case Family::kPoissonProduct:
      for (int j = 0; j < d; ++j) {
        std::poisson_distribution<long> draw(c.location[j]);
        out[j] = static_cast<double>(draw(rng));
      }
      break;
    case Family::kBernoulliProduct:
      for (int j = 0; j < d; ++j) out[j] = rng.uniform() < c.location[j] ? 1.0 : 0.0;
      break;
    case Family::kMultinomialProduct:
      for (int j = 0; j < d; ++j) {
        const auto& probs = c.category_probs[j];
        const double u = rng.uniform();
        double acc = 0.0;
        int category = static_cast<int>(probs.size()) - 1;
        for (int m = 0; m < static_cast<int>(probs.size()); ++m) {
          acc += probs[m];
          if (u < acc) {
            category = m;
            break;
          }
        }
        out[j] = category;
      }
      break;
    case Family::kGaussianFull: {
      Eigen::VectorXd z(d);
      for (int j = 0; j < d; ++j) z[j] = rng.normal();
      const Eigen::VectorXd v = chol_[k].triangularView<Eigen::Lower>() * z;
      for (int j = 0; j < d; ++j) out[j] = c.location[j] + v[j];
      break;
    }
    case Family::kStudent3Product:
      for (int j = 0; j < d; ++j) {
        const double z = rng.normal();
        double chi2 = 0.0;
        for (int m = 0; m < 3; ++m) {
          const double e = rng.normal();
          chi2 += e * e;
        }
        out[j] = c.location[j] + z / std::sqrt(chi2 / 3.0);
      }
      break;
    case Family::kLogGaussianProduct:
      for (int j = 0; j < d; ++j) out[j] = std::exp(c.location[j] + c.scale[j] * rng.normal());
      break;
    case Family::kGaussianCopula: {
      Eigen::VectorXd z(d);
      for (int j = 0; j < d; ++j) z[j] = rng.normal();
      const Eigen::VectorXd v = chol_[k].triangularView<Eigen::Lower>() * z;
      constexpr double kMaxU = 1.0 - 0x1.0p-53;
      for (int j = 0; j < d; ++j) {
        // Correlated normal -> uniform -> marginal quantile.
        const double u = std::clamp(numerics::normal_cdf(v[j]), 1e-300, kMaxU);
        const double t = c.location[j] + c.scale[j] * numerics::normal_quantile(u);
        out[j] = spec_.copula_marginal == Marginal::kLogGaussian ? std::exp(t) : t;
      }
      break;
    }
  }
}

int Mixture::sample_one(Rng& rng, std::span<double> out) const {
  const double u = rng.uniform();
  int k = 0;
  while (k + 1 < spec_.K && u >= cumulative_proportions_[k]) ++k;
  sample_component(k, rng, out);
  return k;
}

Dataset Mixture::sample(std::size_t n, Rng& rng) const {
  Dataset data;
  data.values.resize(static_cast<Eigen::Index>(n), spec_.d);
  data.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    data.labels[i] = sample_one(
        rng, std::span<double>(data.values.row(static_cast<Eigen::Index>(i)).data(),
                               static_cast<std::size_t>(spec_.d)));
  }
  return data;
}

double log_density(const MixtureSpec& spec, const MixtureParams& params,
                   std::span<const double> x) {
  return Mixture(spec, params).log_density(x);
}

std::vector<double> posterior(const MixtureSpec& spec, const MixtureParams& params,
                              std::span<const double> x) {
  return Mixture(spec, params).posterior(x);
}

Dataset sample(const MixtureSpec& spec, const MixtureParams& params, std::size_t n, Rng& rng) {
  return Mixture(spec, params).sample(n, rng);
}

}  // namespace cgof
