#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "cgof/error.hpp"
#include "cgof/mixture.hpp"
#include "cgof/rng.hpp"

namespace cgof {

enum class EmInit {
  /// Soft posteriors around K distinct, randomly chosen observations
  /// (standardised squared distance with a unit-variance kernel).
  kRandomCentres,
  /// Independent flat-Dirichlet posterior rows.
  kRandomPosterior,
};

struct EmSettings {
  EmInit init = EmInit::kRandomCentres;
  int n_starts = 20;
  /// Stop when the relative change of the log-likelihood falls below tol.
  double tol = 1e-8;
  int max_iter = 500;
  /// Fresh initialisations tried by one start after degenerate M-steps.
  int max_restarts = 10;
  int workers = 1;
};

struct FitResult {
  MixtureSpec spec;
  MixtureParams params;
  /// Log-likelihood after each E-step of the retained run.
  std::vector<double> log_likelihood;
  int n_iterations = 0;
  bool converged = false;
  double bic = std::numeric_limits<double>::quiet_NaN();

  [[nodiscard]] double final_log_likelihood() const {
    return log_likelihood.empty() ? -std::numeric_limits<double>::infinity()
                                  : log_likelihood.back();
  }
};

/// Raised when none of the EM starts converged; carries the best partial run
/// when one exists.
class EmError : public NumericalError {
 public:
  EmError(const std::string& what, std::optional<FitResult> best)
      : NumericalError(what), best_(std::move(best)) {}
  [[nodiscard]] const std::optional<FitResult>& best_partial() const { return best_; }

 private:
  std::optional<FitResult> best_;
};

/// Maximum-likelihood fit by EM: the best of settings.n_starts runs, each
/// alternating E-steps and closed-form M-steps. Variance floor
/// 1e-6 * (sample variance) and proportion floor 1/(10 n) mark a run as
/// degenerate, which restarts it from a new random initialisation.
FitResult fit_em(const MixtureSpec& spec, const Matrix& data, const EmSettings& settings,
                 Rng& rng);

/// Number of free parameters of the family.
int free_parameter_count(const MixtureSpec& spec);

/// log L - (nu / 2) ln n; larger is better.
double bic(const FitResult& fit, std::size_t n);

struct ModelSelection {
  FitResult best;
  /// (K, BIC) for every candidate, in the order of k_range.
  std::vector<std::pair<int, double>> bic_table;
};

/// Fits every K in k_range and keeps the largest BIC (ties: smaller K).
ModelSelection select_K(const MixtureSpec& spec, const Matrix& data,
                        const std::vector<int>& k_range, const EmSettings& settings, Rng& rng);

/// Greedy matching of fitted components to reference components by distance
/// between their location parameters. Returns perm with perm[k] = index of
/// the fitted component matched to reference component k.
std::vector<int> align_components(const MixtureParams& fitted, const MixtureParams& reference);

}  // namespace cgof
