#include "cgof/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "cgof/error.hpp"
#include "cgof/parallel.hpp"

namespace cgof {
namespace {

constexpr int kDim = 6;
constexpr int kComponents = 3;

std::map<std::size_t, double> by_size(const std::vector<double>& values) {
  std::map<std::size_t, double> out;
  for (std::size_t i = 0; i < values.size(); ++i) out[catalog_sizes()[i]] = values[i];
  return out;
}

std::string fixed(double value, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, value);
  return buf;
}

MixtureParams equal_mixture(int K) {
  MixtureParams params;
  params.proportions.assign(static_cast<std::size_t>(K), 1.0 / K);
  params.components.resize(static_cast<std::size_t>(K));
  return params;
}

ScenarioConfig make(std::string table, std::string row, MixtureSpec generator, MixtureParams truth,
                    int fit_K, int fit_d, double delta, const std::vector<double>& reference) {
  ScenarioConfig s;
  s.table = std::move(table);
  s.row = std::move(row);
  s.id = s.table + "/" + s.row;
  s.generator = std::move(generator);
  s.truth = std::move(truth);
  s.fit = MixtureSpec{Family::kGaussianDiagonal, fit_K, fit_d, {}, Marginal::kGaussian};
  s.delta = delta;
  s.reference_rejection = by_size(reference);
  return s;
}

void add_table1(std::vector<ScenarioConfig>& out) {
  struct Row {
    BasisKind basis;
    bool student;
    int d;
    std::vector<double> reference;
  };
  const std::vector<Row> rows = {
      {BasisKind::kIndicatorPca, false, 5, {0.054, 0.047, 0.037, 0.041, 0.029, 0.064, 0.049}},
      {BasisKind::kIndicatorPca, false, 10, {0.052, 0.043, 0.044, 0.059, 0.056, 0.068, 0.078}},
      {BasisKind::kIndicatorPca, false, 20, {0.052, 0.043, 0.051, 0.059, 0.062, 0.047, 0.057}},
      {BasisKind::kIndicatorPca, true, 5, {0.141, 0.285, 0.510, 0.759, 0.990, 0.996, 0.999}},
      {BasisKind::kIndicatorPca, true, 10, {0.186, 0.446, 0.794, 0.970, 1.000, 1.000, 1.000}},
      {BasisKind::kIndicatorPca, true, 20, {0.268, 0.599, 0.901, 0.997, 1.000, 1.000, 1.000}},
      {BasisKind::kBernstein, false, 5, {0.149, 0.059, 0.051, 0.040, 0.046, 0.071, 0.061}},
      {BasisKind::kBernstein, false, 10, {0.143, 0.062, 0.042, 0.042, 0.069, 0.062, 0.091}},
      {BasisKind::kBernstein, false, 20, {0.169, 0.056, 0.062, 0.056, 0.064, 0.045, 0.075}},
      {BasisKind::kBernstein, true, 5, {0.966, 0.866, 0.871, 0.859, 1.000, 1.000, 1.000}},
      {BasisKind::kBernstein, true, 10, {0.965, 0.900, 0.954, 0.997, 1.000, 1.000, 1.000}},
      {BasisKind::kBernstein, true, 20, {0.993, 0.993, 1.000, 1.000, 1.000, 1.000, 1.000}},
  };
  for (const Row& r : rows) {
    const Family family = r.student ? Family::kStudent3Product : Family::kGaussianDiagonal;
    MixtureParams truth = equal_mixture(2);
    const double shift = 1.0 / std::sqrt(static_cast<double>(r.d));
    for (int k = 0; k < 2; ++k) {
      auto& c = truth.components[static_cast<std::size_t>(k)];
      c.location.assign(static_cast<std::size_t>(r.d), k == 0 ? shift : -shift);
      if (!r.student) c.scale.assign(static_cast<std::size_t>(r.d), 1.0);
    }
    const std::string row = std::string(to_string(r.basis)) + (r.student ? "/student" : "/gaussian") + "/d" + std::to_string(r.d);
    ScenarioConfig s = make("table1", row, MixtureSpec{family, 2, r.d, {}, Marginal::kGaussian},
                            std::move(truth), 2, r.d, 0.0, r.reference);
    s.gof.basis = r.basis;
    out.push_back(std::move(s));
  }
}

void add_table2(std::vector<ScenarioConfig>& out) {
  struct Row {
    Family family;
    const char* name;
    double rate;
    double delta;
    std::vector<double> reference;
  };
  const std::vector<Row> rows = {
      {Family::kGaussianDiagonal, "gaussian", 0.80, 0.675, {0.148, 0.050, 0.045, 0.041, 0.046, 0.047, 0.067}},
      {Family::kPoissonProduct, "poisson", 0.80, 0.859, {0.136, 0.058, 0.049, 0.057, 0.049, 0.060, 0.051}},
      {Family::kBernoulliProduct, "bernoulli", 0.80, 1.435, {0.156, 0.054, 0.042, 0.049, 0.051, 0.035, 0.042}},
      {Family::kGaussianDiagonal, "gaussian", 0.85, 0.780, {0.143, 0.063, 0.051, 0.042, 0.048, 0.060, 0.073}},
      {Family::kPoissonProduct, "poisson", 0.85, 1.139, {0.164, 0.060, 0.057, 0.052, 0.060, 0.060, 0.057}},
      {Family::kBernoulliProduct, "bernoulli", 0.85, 1.692, {0.191, 0.061, 0.050, 0.054, 0.040, 0.047, 0.057}},
      {Family::kGaussianDiagonal, "gaussian", 0.90, 0.911, {0.267, 0.102, 0.056, 0.047, 0.066, 0.057, 0.078}},
      {Family::kPoissonProduct, "poisson", 0.90, 1.552, {0.269, 0.084, 0.066, 0.059, 0.052, 0.065, 0.053}},
      {Family::kBernoulliProduct, "bernoulli", 0.90, 2.040, {0.334, 0.135, 0.083, 0.057, 0.038, 0.051, 0.052}},
  };
  for (const Row& r : rows) {
    MixtureParams truth = equal_mixture(kComponents);
    for (int k = 0; k < kComponents; ++k) {
      auto& c = truth.components[static_cast<std::size_t>(k)];
      const std::vector<double> mu = pattern_mean(k, r.delta);
      switch (r.family) {
        case Family::kGaussianDiagonal:
          c.location = mu;
          c.scale.assign(kDim, 1.0);
          break;
        case Family::kPoissonProduct:
          for (double m : mu) c.location.push_back(m + r.delta);
          break;
        default:
          for (double m : mu) c.location.push_back(1.0 / (1.0 + std::exp(-(m - r.delta))));
          break;
      }
    }
    ScenarioConfig s = make("table2", std::string(r.name) + "/" + fixed(r.rate, 2),
                            MixtureSpec{r.family, kComponents, kDim, {}, Marginal::kGaussian},
                            std::move(truth), kComponents, kDim, r.delta, r.reference);
    s.fit.family = r.family;
    out.push_back(std::move(s));
  }
}

void add_table3(std::vector<ScenarioConfig>& out) {
  constexpr double delta = 0.675;
  struct Row {
    Family family;
    const char* name;
    std::vector<double> reference;
  };
  const std::vector<Row> rows = {
      {Family::kGaussianFull, "gaussian_full", {0.449, 0.328, 0.487, 0.723, 0.997, 1.000, 1.000}},
      {Family::kLogGaussianProduct, "log_gaussian", {0.785, 0.588, 0.627, 0.816, 0.986, 0.998, 1.000}},
      {Family::kStudent3Product, "student3", {0.949, 0.823, 0.603, 0.632, 0.935, 0.984, 0.998}},
  };
  for (const Row& r : rows) {
    MixtureParams truth = equal_mixture(kComponents);
    for (int k = 0; k < kComponents; ++k) {
      auto& c = truth.components[static_cast<std::size_t>(k)];
      c.location = pattern_mean(k, delta);
      if (r.family == Family::kGaussianFull) c.dependence = ar1_correlation(kDim, 0.7);
      if (r.family == Family::kLogGaussianProduct) c.scale.assign(kDim, 1.0);
    }
    out.push_back(make("table3", r.name,
                       MixtureSpec{r.family, kComponents, kDim, {}, Marginal::kGaussian},
                       std::move(truth), kComponents, kDim, delta, r.reference));
  }
}

void add_table4(std::vector<ScenarioConfig>& out) {
  constexpr double delta = 0.675;
  struct Row {
    Marginal marginal;
    double c;
    std::vector<double> reference;
  };
  const std::vector<Row> rows = {
      {Marginal::kGaussian, 0.00, {0.153, 0.068, 0.063, 0.042, 0.061, 0.038, 0.052}},
      {Marginal::kGaussian, 0.25, {0.208, 0.068, 0.065, 0.054, 0.078, 0.069, 0.106}},
      {Marginal::kGaussian, 0.50, {0.230, 0.090, 0.096, 0.111, 0.318, 0.431, 0.565}},
      {Marginal::kGaussian, 0.75, {0.352, 0.267, 0.401, 0.589, 0.965, 0.989, 0.995}},
      {Marginal::kLogGaussian, 0.00, {0.263, 0.079, 0.054, 0.044, 0.067, 0.052, 0.062}},
      {Marginal::kLogGaussian, 0.25, {0.279, 0.098, 0.080, 0.066, 0.110, 0.099, 0.129}},
      {Marginal::kLogGaussian, 0.50, {0.310, 0.129, 0.078, 0.088, 0.231, 0.309, 0.406}},
      {Marginal::kLogGaussian, 0.75, {0.572, 0.415, 0.623, 0.851, 1.000, 1.000, 1.000}},
  };
  for (const Row& r : rows) {
    MixtureParams truth = equal_mixture(kComponents);
    for (int k = 0; k < kComponents; ++k) {
      auto& comp = truth.components[static_cast<std::size_t>(k)];
      comp.location = pattern_mean(k, delta);
      comp.scale.assign(kDim, 1.0);
      comp.dependence = ar1_correlation(kDim, r.c);
    }
    out.push_back(make("table4", std::string(to_string(r.marginal)) + "/c" + fixed(r.c, 2),
                       MixtureSpec{Family::kGaussianCopula, kComponents, kDim, {}, r.marginal},
                       std::move(truth), kComponents, kDim, delta, r.reference));
  }
}

}  // namespace

const std::vector<std::size_t>& catalog_sizes() {
  static const std::vector<std::size_t> sizes = {512, 1000, 1728, 2744, 5832, 8000, 10648};
  return sizes;
}

std::vector<double> pattern_mean(int k, double delta) {
  if (k < 0 || k >= kComponents) throw ArgumentError("pattern_mean: component must be 0, 1 or 2");
  static constexpr int kPattern[kComponents][kDim] = {
      {2, 1, 0, 2, 1, 0}, {1, 0, 2, 1, 0, 2}, {0, 2, 1, 0, 2, 1}};
  std::vector<double> out(kDim);
  for (int j = 0; j < kDim; ++j) out[static_cast<std::size_t>(j)] = kPattern[k][j] * delta;
  return out;
}

const std::vector<ScenarioConfig>& scenario_catalog() {
  static const std::vector<ScenarioConfig> catalog = [] {
    std::vector<ScenarioConfig> out;
    add_table1(out);
    add_table2(out);
    add_table3(out);
    add_table4(out);
    return out;
  }();
  return catalog;
}

const ScenarioConfig& find_scenario(const std::string& id) {
  for (const ScenarioConfig& s : scenario_catalog()) {
    if (s.id == id) return s;
  }
  std::ostringstream msg;
  msg << "unknown scenario '" << id << "'; known scenarios:";
  for (const ScenarioConfig& s : scenario_catalog()) msg << "\n  " << s.id;
  throw LookupError(msg.str());
}

std::uint64_t replicate_stream(const std::string& scenario, std::size_t n, std::size_t index) {
  return derive_stream_id(hash_string(scenario), StreamTag::kReplicate, {n, index});
}

SimResult run_scenario(const ScenarioConfig& scenario, std::size_t n, const SimOptions& options) {
  if (options.replicates < 1) throw ArgumentError("run_scenario: need at least one replicate");
  const Mixture generator(scenario.generator, scenario.truth);
  GofConfig gof = scenario.gof;
  if (options.mc_draws != 0) gof.mc_draws = options.mc_draws;
  gof.workers = 1;
  gof.validate();
  (void)tuning(n, gof);
  EmSettings em = options.em;
  em.workers = 1;

  SimResult result;
  result.scenario = scenario.id;
  result.n = n;
  result.requested = options.replicates;
  result.seed = options.seed;
  result.replicates.resize(options.replicates);

  parallel_for(options.replicates, resolve_workers(options.workers), [&](std::size_t r) {
    ReplicateRecord& rec = result.replicates[r];
    rec.index = r;
    rec.stream_id = replicate_stream(scenario.id, n, r);
    try {
      Rng data_rng(options.seed, derive_stream_id(rec.stream_id, StreamTag::kData));
      const Dataset data = generator.sample(n, data_rng);
      Rng em_rng(options.seed, derive_stream_id(rec.stream_id, StreamTag::kEmInit));
      const FitResult fit = fit_em(scenario.fit, data.values, em, em_rng);
      GofConfig config = gof;
      config.seed = mix64(options.seed ^ rec.stream_id);
      const GofReport report = gof_test(data.values, Mixture(fit.spec, fit.params), config);
      rec.reject = report.reject;
      rec.max_statistic = report.max_statistic;
      rec.threshold = report.threshold;
    } catch (const NumericalError& e) {
      rec.failed = true;
      rec.error = e.what();
    }
  });

  for (const ReplicateRecord& rec : result.replicates) {
    if (rec.failed) {
      ++result.failures;
      continue;
    }
    ++result.N;
    if (rec.reject) ++result.rejections;
  }
  if (result.N > 0) {
    const double N = static_cast<double>(result.N);
    result.proportion = static_cast<double>(result.rejections) / N;
    result.std_error = std::sqrt(result.proportion * (1.0 - result.proportion) / N);
  }
  return result;
}

double estimate_classification_rate(const Mixture& generator, std::size_t M, Rng& rng) {
  if (M < 1) throw ArgumentError("estimate_classification_rate: need at least one draw");
  std::vector<double> x(static_cast<std::size_t>(generator.d()));
  std::vector<double> post(static_cast<std::size_t>(generator.K()));
  std::size_t hits = 0;
  for (std::size_t m = 0; m < M; ++m) {
    const int label = generator.sample_one(rng, x);
    generator.posterior(x, post);
    const auto best = std::max_element(post.begin(), post.end()) - post.begin();
    if (best == label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(M);
}

}  // namespace cgof
