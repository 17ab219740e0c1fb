#include "cgof/em.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cgof/parallel.hpp"

namespace cgof {
namespace {

constexpr double kSmoothing = 1e-10;
constexpr double kVarianceFloorFactor = 1e-6;
constexpr double kMinRate = 1e-10;

struct RunOutcome {
  MixtureParams params;
  std::vector<double> trace;
  bool converged = false;
  bool valid = false;  // false when every attempt degenerated
};

class EmRunner {
 public:
  EmRunner(const MixtureSpec& spec, const Matrix& x, const EmSettings& settings)
      : spec_(spec), x_(x), settings_(settings), n_(x.rows()), d_(x.cols()) {
    column_mean_ = x_.colwise().mean().transpose();
    column_var_.resize(d_);
    for (Eigen::Index j = 0; j < d_; ++j) {
      column_var_[j] = (x_.col(j).array() - column_mean_[j]).square().mean();
    }
    if (spec_.family == Family::kGaussianDiagonal) {
      for (Eigen::Index j = 0; j < d_; ++j) {
        if (!(column_var_[j] > 0.0)) {
          throw ArgumentError("fit_em: column " + std::to_string(j + 1) +
                              " has zero variance; gaussian_diagonal cannot be fitted");
        }
      }
    }
  }

  RunOutcome run(std::uint64_t master, std::uint64_t base, int start) const {
    RunOutcome outcome;
    for (int attempt = 0; attempt <= settings_.max_restarts; ++attempt) {
      Rng rng(master, derive_stream_id(base, StreamTag::kEmInit,
                                       {static_cast<std::uint64_t>(start),
                                        static_cast<std::uint64_t>(attempt)}));
      Matrix t = initial_posteriors(rng);
      outcome.trace.clear();
      outcome.converged = false;
      bool degenerate = false;
      for (int iter = 0; iter < settings_.max_iter; ++iter) {
        auto params = m_step(t);
        if (!params) {
          degenerate = true;
          break;
        }
        double loglik;
        try {
          const Mixture mixture(spec_, *params);
          loglik = e_step(mixture, t);
        } catch (const std::exception&) {
          degenerate = true;
          break;
        }
        if (!std::isfinite(loglik)) {
          degenerate = true;
          break;
        }
        outcome.params = std::move(*params);
        outcome.trace.push_back(loglik);
        const std::size_t m = outcome.trace.size();
        if (m >= 2) {
          const double previous = outcome.trace[m - 2];
          if (std::abs(loglik - previous) <= settings_.tol * std::abs(previous)) {
            outcome.converged = true;
            break;
          }
        }
      }
      if (!degenerate && !outcome.trace.empty()) {
        outcome.valid = true;
        return outcome;
      }
    }
    outcome.valid = false;
    return outcome;
  }

 private:
  Matrix initial_posteriors(Rng& rng) const {
    const int K = spec_.K;
    Matrix t(n_, K);
    if (K == 1) {
      t.setOnes();
      return t;
    }
    if (settings_.init == EmInit::kRandomPosterior) {
      for (Eigen::Index i = 0; i < n_; ++i) {
        double s = 0.0;
        for (int k = 0; k < K; ++k) {
          t(i, k) = -std::log(rng.uniform_open());
          s += t(i, k);
        }
        t.row(i) /= s;
      }
      return t;
    }
    // Random centres: K distinct observations (distinct by value when possible).
    std::vector<Eigen::Index> centres;
    for (int tries = 0; static_cast<int>(centres.size()) < K; ++tries) {
      const auto candidate = static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(n_));
      const bool duplicate = std::any_of(centres.begin(), centres.end(), [&](Eigen::Index c) {
        return tries < 50 * K ? (x_.row(c) - x_.row(candidate)).squaredNorm() == 0.0
                              : c == candidate;
      });
      if (!duplicate) centres.push_back(candidate);
    }
    std::vector<double> inv_sd(d_);
    for (Eigen::Index j = 0; j < d_; ++j) {
      inv_sd[j] = column_var_[j] > 0.0 ? 1.0 / std::sqrt(column_var_[j]) : 0.0;
    }
    std::vector<double> logits(K);
    for (Eigen::Index i = 0; i < n_; ++i) {
      for (int k = 0; k < K; ++k) {
        double dist = 0.0;
        for (Eigen::Index j = 0; j < d_; ++j) {
          const double r = (x_(i, j) - x_(centres[k], j)) * inv_sd[j];
          dist += r * r;
        }
        logits[k] = -0.5 * dist;
      }
      const double top = *std::max_element(logits.begin(), logits.end());
      double s = 0.0;
      for (int k = 0; k < K; ++k) {
        t(i, k) = std::exp(logits[k] - top);
        s += t(i, k);
      }
      // Blend with a random posterior so that tied centres still break symmetry.
      double noise_sum = 0.0;
      std::vector<double> noise(K);
      for (int k = 0; k < K; ++k) {
        noise[k] = -std::log(rng.uniform_open());
        noise_sum += noise[k];
      }
      for (int k = 0; k < K; ++k) t(i, k) = 0.9 * t(i, k) / s + 0.1 * noise[k] / noise_sum;
    }
    return t;
  }

  double e_step(const Mixture& mixture, Matrix& t) const {
    const int K = spec_.K;
    double loglik = 0.0;
    for (Eigen::Index i = 0; i < n_; ++i) {
      std::span<double> row(t.row(i).data(), static_cast<std::size_t>(K));
      mixture.joint_log_densities(
          std::span<const double>(x_.row(i).data(), static_cast<std::size_t>(d_)), row);
      const double top = *std::max_element(row.begin(), row.end());
      if (!std::isfinite(top)) return -std::numeric_limits<double>::infinity();
      double s = 0.0;
      for (double& v : row) {
        v = std::exp(v - top);
        s += v;
      }
      for (double& v : row) v /= s;
      loglik += top + std::log(s);
    }
    return loglik;
  }

  std::optional<MixtureParams> m_step(const Matrix& t) const {
    const int K = spec_.K;
    const double n = static_cast<double>(n_);
    const Eigen::VectorXd weight = t.colwise().sum().transpose();
    MixtureParams params;
    params.proportions.resize(K);
    params.components.resize(K);
    for (int k = 0; k < K; ++k) {
      if (weight[k] < 0.1) return std::nullopt;  // proportion below 1/(10 n)
      params.proportions[k] = weight[k] / n;
    }
    // Renormalise so the proportions sum to one to rounding.
    const double total = std::accumulate(params.proportions.begin(), params.proportions.end(), 0.0);
    for (double& pi : params.proportions) pi /= total;

    for (int k = 0; k < K; ++k) {
      ComponentParams& c = params.components[k];
      const double wk = weight[k];
      switch (spec_.family) {
        case Family::kGaussianDiagonal: {
          c.location.assign(d_, 0.0);
          c.scale.assign(d_, 0.0);
          for (Eigen::Index i = 0; i < n_; ++i) {
            const double w = t(i, k);
            for (Eigen::Index j = 0; j < d_; ++j) c.location[j] += w * x_(i, j);
          }
          for (double& m : c.location) m /= wk;
          for (Eigen::Index i = 0; i < n_; ++i) {
            const double w = t(i, k);
            for (Eigen::Index j = 0; j < d_; ++j) {
              const double r = x_(i, j) - c.location[j];
              c.scale[j] += w * r * r;
            }
          }
          for (Eigen::Index j = 0; j < d_; ++j) {
            c.scale[j] /= wk;
            if (c.scale[j] < kVarianceFloorFactor * column_var_[j]) return std::nullopt;
          }
          break;
        }
        case Family::kPoissonProduct:
        case Family::kBernoulliProduct: {
          c.location.assign(d_, 0.0);
          for (Eigen::Index i = 0; i < n_; ++i) {
            const double w = t(i, k);
            for (Eigen::Index j = 0; j < d_; ++j) c.location[j] += w * x_(i, j);
          }
          for (double& m : c.location) {
            if (spec_.family == Family::kPoissonProduct) {
              m = std::max(m / wk, kMinRate);
            } else {
              m = (m + kSmoothing) / (wk + 2.0 * kSmoothing);
            }
          }
          break;
        }
        case Family::kMultinomialProduct: {
          c.category_probs.resize(d_);
          for (Eigen::Index j = 0; j < d_; ++j) c.category_probs[j].assign(spec_.categories[j], 0.0);
          for (Eigen::Index i = 0; i < n_; ++i) {
            const double w = t(i, k);
            for (Eigen::Index j = 0; j < d_; ++j) {
              c.category_probs[j][static_cast<std::size_t>(x_(i, j))] += w;
            }
          }
          for (Eigen::Index j = 0; j < d_; ++j) {
            const double denom = wk + spec_.categories[j] * kSmoothing;
            for (double& p : c.category_probs[j]) p = (p + kSmoothing) / denom;
          }
          break;
        }
        default:
          throw UnsupportedError("fit_em: family is generation-only");
      }
    }
    return params;
  }

  const MixtureSpec& spec_;
  const Matrix& x_;
  const EmSettings& settings_;
  Eigen::Index n_;
  Eigen::Index d_;
  Eigen::VectorXd column_mean_;
  std::vector<double> column_var_;
};

void check_data_support(const MixtureSpec& spec, const Matrix& data) {
  if (data.cols() != spec.d) {
    throw ArgumentError("fit_em: data has " + std::to_string(data.cols()) +
                        " columns, spec expects " + std::to_string(spec.d));
  }
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      const double v = data(i, j);
      bool ok = std::isfinite(v);
      switch (spec.family) {
        case Family::kPoissonProduct:
          ok = ok && v >= 0.0 && v == std::floor(v);
          break;
        case Family::kBernoulliProduct:
          ok = ok && (v == 0.0 || v == 1.0);
          break;
        case Family::kMultinomialProduct:
          ok = ok && v >= 0.0 && v == std::floor(v) && v < spec.categories[j];
          break;
        default:
          break;
      }
      if (!ok) {
        throw ValidationError("fit_em: value at row " + std::to_string(i + 1) + ", column " +
                              std::to_string(j + 1) + " is outside the support of " +
                              std::string(to_string(spec.family)));
      }
    }
  }
}

std::vector<double> flatten_location(const ComponentParams& c) {
  if (!c.category_probs.empty()) {
    std::vector<double> flat;
    for (const auto& row : c.category_probs) flat.insert(flat.end(), row.begin(), row.end());
    return flat;
  }
  return c.location;
}

}  // namespace

FitResult fit_em(const MixtureSpec& spec, const Matrix& data, const EmSettings& settings,
                 Rng& rng) {
  spec.validate();
  if (!spec.fittable()) {
    throw UnsupportedError("fit_em: family " + std::string(to_string(spec.family)) +
                           " is generation-only");
  }
  if (data.rows() <= spec.K) {
    throw ArgumentError("fit_em: need n > K observations (n = " + std::to_string(data.rows()) +
                        ", K = " + std::to_string(spec.K) + ")");
  }
  if (settings.n_starts < 1 || settings.max_iter < 1 || !(settings.tol > 0.0)) {
    throw ArgumentError("fit_em: n_starts and max_iter must be >= 1 and tol > 0");
  }
  check_data_support(spec, data);

  const EmRunner runner(spec, data, settings);
  const std::uint64_t master = rng.seed().master_seed;
  const std::uint64_t base = rng();
  std::vector<RunOutcome> outcomes(static_cast<std::size_t>(settings.n_starts));
  parallel_for(outcomes.size(), settings.workers, [&](std::size_t s) {
    outcomes[s] = runner.run(master, base, static_cast<int>(s));
  });

  const RunOutcome* best = nullptr;
  const RunOutcome* best_partial = nullptr;
  for (const RunOutcome& o : outcomes) {
    if (!o.valid) continue;
    auto better = [](const RunOutcome* current, const RunOutcome& candidate) {
      return current == nullptr || candidate.trace.back() > current->trace.back();
    };
    if (o.converged && better(best, o)) best = &o;
    if (better(best_partial, o)) best_partial = &o;
  }

  auto to_result = [&](const RunOutcome& o) {
    FitResult fit;
    fit.spec = spec;
    fit.params = o.params;
    fit.log_likelihood = o.trace;
    fit.n_iterations = static_cast<int>(o.trace.size());
    fit.converged = o.converged;
    fit.bic = o.trace.back() -
              0.5 * free_parameter_count(spec) * std::log(static_cast<double>(data.rows()));
    return fit;
  };

  if (best == nullptr) {
    std::optional<FitResult> partial;
    if (best_partial != nullptr) partial = to_result(*best_partial);
    throw EmError("fit_em: none of the " + std::to_string(settings.n_starts) +
                      " EM starts converged within " + std::to_string(settings.max_iter) +
                      " iterations",
                  std::move(partial));
  }
  return to_result(*best);
}

int free_parameter_count(const MixtureSpec& spec) {
  const int d = spec.d;
  int per_component = 0;
  switch (spec.family) {
    case Family::kGaussianDiagonal:
    case Family::kLogGaussianProduct:
      per_component = 2 * d;
      break;
    case Family::kPoissonProduct:
    case Family::kBernoulliProduct:
    case Family::kStudent3Product:
      per_component = d;
      break;
    case Family::kMultinomialProduct:
      for (int c : spec.categories) per_component += c - 1;
      break;
    case Family::kGaussianFull:
      per_component = d + d * (d + 1) / 2;
      break;
    case Family::kGaussianCopula:
      per_component = 2 * d + d * (d - 1) / 2;
      break;
  }
  return (spec.K - 1) + spec.K * per_component;
}

double bic(const FitResult& fit, std::size_t n) {
  return fit.final_log_likelihood() -
         0.5 * free_parameter_count(fit.spec) * std::log(static_cast<double>(n));
}

ModelSelection select_K(const MixtureSpec& spec, const Matrix& data,
                        const std::vector<int>& k_range, const EmSettings& settings, Rng& rng) {
  if (k_range.empty()) throw ArgumentError("select_K: K range is empty");
  ModelSelection selection;
  std::optional<FitResult> best;
  for (int K : k_range) {
    MixtureSpec candidate = spec;
    candidate.K = K;
    Rng stream(rng.seed().master_seed,
               derive_stream_id(rng.seed().stream_id, StreamTag::kEmInit,
                                {static_cast<std::uint64_t>(K)}));
    FitResult fit = fit_em(candidate, data, settings, stream);
    selection.bic_table.emplace_back(K, fit.bic);
    if (!best || fit.bic > best->bic || (fit.bic == best->bic && K < best->spec.K)) {
      best = std::move(fit);
    }
  }
  selection.best = std::move(*best);
  return selection;
}

std::vector<int> align_components(const MixtureParams& fitted, const MixtureParams& reference) {
  const int K = static_cast<int>(reference.components.size());
  if (static_cast<int>(fitted.components.size()) != K) {
    throw ArgumentError("align_components: component counts differ");
  }
  std::vector<std::vector<double>> fit_loc(K), ref_loc(K);
  for (int k = 0; k < K; ++k) {
    fit_loc[k] = flatten_location(fitted.components[k]);
    ref_loc[k] = flatten_location(reference.components[k]);
  }
  std::vector<int> perm(K, -1);
  std::vector<bool> used(K, false);
  for (int step = 0; step < K; ++step) {
    double best = std::numeric_limits<double>::infinity();
    int best_ref = -1;
    int best_fit = -1;
    for (int r = 0; r < K; ++r) {
      if (perm[r] >= 0) continue;
      for (int f = 0; f < K; ++f) {
        if (used[f]) continue;
        double dist = 0.0;
        for (std::size_t j = 0; j < ref_loc[r].size() && j < fit_loc[f].size(); ++j) {
          const double diff = ref_loc[r][j] - fit_loc[f][j];
          dist += diff * diff;
        }
        if (dist < best) {
          best = dist;
          best_ref = r;
          best_fit = f;
        }
      }
    }
    perm[best_ref] = best_fit;
    used[best_fit] = true;
  }
  return perm;
}

}  // namespace cgof
