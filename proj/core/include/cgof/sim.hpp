#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cgof/em.hpp"
#include "cgof/gof.hpp"
#include "cgof/mixture.hpp"
#include "cgof/rng.hpp"

namespace cgof {

/// One row of the simulation tables: a data-generating mixture, the model
/// fitted to its draws, and the test configuration.
struct ScenarioConfig {
  /// "table/row", e.g. "table2/gaussian/0.80".
  std::string id;
  std::string table;
  std::string row;
  MixtureSpec generator;
  MixtureParams truth;
  /// Model under test; always fittable by EM.
  MixtureSpec fit;
  /// Component separation; 0 when the row is not parametrised by delta.
  double delta = 0.0;
  GofConfig gof;
  /// Reference rejection proportions keyed by n (N = 1000 replicates).
  std::map<std::size_t, double> reference_rejection;
};

/// Sample sizes of the simulation tables.
const std::vector<std::size_t>& catalog_sizes();

/// mu_1(delta) = (2d, d, 0, 2d, d, 0), mu_2 and mu_3 are its cyclic shifts.
std::vector<double> pattern_mean(int k, double delta);

/// Every scenario of the four simulation tables.
const std::vector<ScenarioConfig>& scenario_catalog();

/// Throws LookupError listing the catalog when `id` is unknown.
const ScenarioConfig& find_scenario(const std::string& id);

struct SimOptions {
  std::size_t replicates = 200;
  std::uint64_t seed = 0;
  /// 0 = resolve from the environment.
  int workers = 0;
  EmSettings em;
  /// Overrides the scenario's Monte Carlo draw count when nonzero.
  std::size_t mc_draws = 0;
};

struct ReplicateRecord {
  std::size_t index = 0;
  std::uint64_t stream_id = 0;
  bool failed = false;
  std::string error;
  bool reject = false;
  double max_statistic = 0.0;
  double threshold = 0.0;
};

struct SimResult {
  std::string scenario;
  std::size_t n = 0;
  std::size_t requested = 0;
  /// Replicates that ran to a decision; failures are excluded from N.
  std::size_t N = 0;
  std::size_t failures = 0;
  std::size_t rejections = 0;
  double proportion = 0.0;
  /// sqrt(proportion (1 - proportion) / N).
  double std_error = 0.0;
  std::uint64_t seed = 0;
  std::vector<ReplicateRecord> replicates;
};

/// Stream id of one replicate: a hash of the scenario id, n and the index.
std::uint64_t replicate_stream(const std::string& scenario, std::size_t n, std::size_t index);

/// Generate, fit by EM and test `options.replicates` data sets of size n.
/// Replicates run in parallel on independent streams and are merged by
/// index, so the result does not depend on the worker count.
SimResult run_scenario(const ScenarioConfig& scenario, std::size_t n, const SimOptions& options);

/// Monte Carlo estimate of P(argmax_k c_k(X) = true label of X).
double estimate_classification_rate(const Mixture& generator, std::size_t M, Rng& rng);

}  // namespace cgof
