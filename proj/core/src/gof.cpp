#include "cgof/gof.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cgof/error.hpp"
#include "cgof/numerics.hpp"
#include "cgof/parallel.hpp"

namespace cgof {
namespace {

constexpr std::size_t kMcChunk = 4096;

struct Accumulator {
  Eigen::VectorXd sum;
  Eigen::VectorXd sum_sq;
};

McExpectation finish(const Accumulator& acc, std::size_t M) {
  McExpectation out;
  out.draws = M;
  const double m = static_cast<double>(M);
  out.mean = acc.sum / m;
  out.std_error.resize(acc.sum.size());
  for (Eigen::Index j = 0; j < acc.sum.size(); ++j) {
    const double ss = acc.sum_sq[j] - acc.sum[j] * acc.sum[j] / m;
    const double var = M > 1 ? std::max(ss, 0.0) / (m - 1.0) : 0.0;
    out.std_error[j] = std::sqrt(var / m);
  }
  return out;
}

// Bernstein basis for the requested K. With K = 1 the simplex is a single
// point and every function is constant, so the powers a_1^s stand in.
BasisSet bernstein_for(int K, int p, BernsteinTerms terms) {
  if (K >= 2) return bernstein_basis(K, p, terms);
  BasisSet basis;
  basis.kind = BasisKind::kBernstein;
  basis.K = 1;
  basis.p = p;
  for (int s = 1; s <= p; ++s) basis.terms.push_back(bernstein_terms_of_degree(1, s).front());
  return basis;
}

PosteriorMatrix renormalised(const PosteriorMatrix& posteriors) {
  PosteriorMatrix out = posteriors.cwiseMax(0.0);
  for (Eigen::Index i = 0; i < out.rows(); ++i) out.row(i) /= out.row(i).sum();
  return out;
}

GofReport run_blocks(const PosteriorMatrix& posteriors, const Tuning& tune,
                     const BlockPartition& partition, BasisSet basis, McExpectation expectation,
                     const GofConfig& config) {
  GofReport report;
  report.n = static_cast<std::size_t>(posteriors.rows());
  report.K = static_cast<int>(posteriors.cols());
  report.B = tune.B;
  report.p = tune.p;
  report.alpha = config.alpha;
  report.alpha_n = block_level(config.alpha, tune.B);
  report.threshold = numerics::chi2_upper_quantile(tune.p, report.alpha_n);
  report.seed = config.seed;
  report.blocks.resize(static_cast<std::size_t>(tune.B));

  const int workers = resolve_workers(config.workers);
  parallel_for(static_cast<std::size_t>(tune.B), workers, [&](std::size_t b) {
    const auto& members = partition.members[b];
    PosteriorMatrix block(static_cast<Eigen::Index>(members.size()), posteriors.cols());
    for (std::size_t i = 0; i < members.size(); ++i) {
      block.row(static_cast<Eigen::Index>(i)) = posteriors.row(static_cast<Eigen::Index>(members[i]));
    }
    const ElSolution sol = solve_lambda(moment_matrix(block, basis, expectation.mean));
    report.blocks[b] = BlockResult{members.size(), sol.statistic, sol.status, sol.iterations};
  });

  report.max_statistic = -std::numeric_limits<double>::infinity();
  for (const BlockResult& block : report.blocks) {
    report.max_statistic = std::max(report.max_statistic, block.statistic);
  }
  report.reject = report.max_statistic > report.threshold;
  report.basis_description = basis.describe();
  report.basis = std::move(basis);
  report.expectation = std::move(expectation);
  return report;
}

}  // namespace

void GofConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 0.5)) {
    throw ConfigError("alpha must lie in (0, 0.5), got " + std::to_string(alpha));
  }
  if (!(rho > 2.0 / 3.0 && rho < 1.0)) {
    throw ConfigError("rho must lie in (2/3, 1), got " + std::to_string(rho));
  }
  if (!(block_coefficient > 0.0) || !(p_coefficient > 0.0) || !(p_exponent > 0.0)) {
    throw ConfigError("tuning coefficients must be positive");
  }
  if (mc_draws < 1000) {
    throw ConfigError("mc_draws must be at least 1000, got " + std::to_string(mc_draws));
  }
}

double block_level(double alpha, int B) {
  if (B < 1) throw ArgumentError("block_level: B must be >= 1");
  return -std::expm1(std::log1p(-alpha) / static_cast<double>(B));
}

Tuning tuning(std::size_t n, const GofConfig& config) {
  config.validate();
  if (n < 64) throw ConfigError("sample size " + std::to_string(n) + " is below the minimum of 64");
  const double dn = static_cast<double>(n);
  Tuning out;
  out.B = std::max<int>(2, static_cast<int>(std::llround(config.block_coefficient *
                                                          std::pow(dn, 1.0 - config.rho))));
  if (static_cast<std::size_t>(out.B) > n / 2) {
    throw ConfigError("block count " + std::to_string(out.B) + " too large for n = " +
                      std::to_string(n));
  }
  const std::size_t base = n / static_cast<std::size_t>(out.B);
  const std::size_t extra = n % static_cast<std::size_t>(out.B);
  out.block_sizes.assign(static_cast<std::size_t>(out.B), base);
  for (std::size_t b = 0; b < extra; ++b) ++out.block_sizes[b];

  // The small offset keeps exact powers (2 * 512^(1/9) = 4) from rounding down.
  int p = static_cast<int>(std::floor(config.p_coefficient * std::pow(dn, config.p_exponent) + 1e-9));
  while (p > 1 && static_cast<std::size_t>(6 * p) >= base) --p;
  out.p = std::max(p, 1);
  if (base <= static_cast<std::size_t>(out.p)) {
    throw ConfigError("blocks of size " + std::to_string(base) + " cannot carry p = " +
                      std::to_string(out.p) + " moment functions");
  }
  return out;
}

BlockPartition partition_blocks(std::size_t n, int B, Rng& rng) {
  if (B < 2) throw ArgumentError("partition_blocks: B must be >= 2");
  if (static_cast<std::size_t>(B) > n / 2) {
    throw ArgumentError("partition_blocks: B = " + std::to_string(B) + " exceeds n / 2 for n = " +
                        std::to_string(n));
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(perm[i], perm[static_cast<std::size_t>(rng.below(i + 1))]);
  }
  BlockPartition out;
  out.B = B;
  out.assignment.assign(n, -1);
  out.members.resize(static_cast<std::size_t>(B));
  const std::size_t base = n / static_cast<std::size_t>(B);
  const std::size_t extra = n % static_cast<std::size_t>(B);
  std::size_t pos = 0;
  for (int b = 0; b < B; ++b) {
    const std::size_t size = base + (static_cast<std::size_t>(b) < extra ? 1 : 0);
    out.sizes.push_back(size);
    auto& members = out.members[static_cast<std::size_t>(b)];
    members.assign(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                   perm.begin() + static_cast<std::ptrdiff_t>(pos + size));
    for (std::size_t i : members) out.assignment[i] = b;
    pos += size;
  }
  return out;
}

McExpectation mc_expectation(const Mixture& model, const BasisSet& basis, std::size_t M, Rng& rng,
                             int workers) {
  if (M < 1000) throw ArgumentError("mc_expectation: need at least 1000 draws");
  if (basis.K != model.K()) throw ArgumentError("mc_expectation: basis and model disagree on K");
  const std::uint64_t master = rng.seed().master_seed;
  const std::uint64_t base = rng();
  const std::size_t chunks = (M + kMcChunk - 1) / kMcChunk;
  const Eigen::Index p = basis.p;
  std::vector<Accumulator> partial(chunks, Accumulator{Eigen::VectorXd::Zero(p), Eigen::VectorXd::Zero(p)});

  parallel_for(chunks, workers, [&](std::size_t c) {
    Rng stream(master, derive_stream_id(base, StreamTag::kMonteCarlo, {c}));
    const std::size_t count = std::min(kMcChunk, M - c * kMcChunk);
    std::vector<double> x(static_cast<std::size_t>(model.d()));
    std::vector<double> post(static_cast<std::size_t>(model.K()));
    Eigen::VectorXd phi(p);
    Accumulator& acc = partial[c];
    for (std::size_t m = 0; m < count; ++m) {
      model.sample_one(stream, x);
      model.posterior(x, post);
      basis.evaluate(post, std::span<double>(phi.data(), static_cast<std::size_t>(p)));
      acc.sum += phi;
      acc.sum_sq += phi.cwiseAbs2();
    }
  });

  Accumulator total{Eigen::VectorXd::Zero(p), Eigen::VectorXd::Zero(p)};
  for (const Accumulator& acc : partial) {
    total.sum += acc.sum;
    total.sum_sq += acc.sum_sq;
  }
  return finish(total, M);
}

McExpectation mc_expectation(const PosteriorMatrix& reference, const BasisSet& basis) {
  if (reference.cols() != basis.K) throw ArgumentError("mc_expectation: basis and posteriors disagree on K");
  if (reference.rows() < 1) throw ArgumentError("mc_expectation: empty reference sample");
  const Eigen::Index p = basis.p;
  Accumulator acc{Eigen::VectorXd::Zero(p), Eigen::VectorXd::Zero(p)};
  Eigen::VectorXd phi(p);
  for (Eigen::Index i = 0; i < reference.rows(); ++i) {
    basis.evaluate(std::span<const double>(reference.row(i).data(), static_cast<std::size_t>(basis.K)),
                   std::span<double>(phi.data(), static_cast<std::size_t>(p)));
    acc.sum += phi;
    acc.sum_sq += phi.cwiseAbs2();
  }
  return finish(acc, static_cast<std::size_t>(reference.rows()));
}

MomentMatrix moment_matrix(const PosteriorMatrix& posteriors, const BasisSet& basis,
                           const Eigen::VectorXd& expectation) {
  if (posteriors.cols() != basis.K) {
    throw ArgumentError("moment_matrix: posterior matrix has " + std::to_string(posteriors.cols()) +
                        " columns, basis expects K = " + std::to_string(basis.K));
  }
  if (expectation.size() != basis.p) {
    throw ArgumentError("moment_matrix: expectation length does not match the basis");
  }
  MomentMatrix out(posteriors.rows(), basis.p);
  for (Eigen::Index i = 0; i < posteriors.rows(); ++i) {
    basis.evaluate(std::span<const double>(posteriors.row(i).data(), static_cast<std::size_t>(basis.K)),
                   std::span<double>(out.row(i).data(), static_cast<std::size_t>(basis.p)));
    out.row(i) -= expectation.transpose();
  }
  return out;
}

MomentMatrix moment_matrix(const Matrix& data, const Mixture& model, const BasisSet& basis,
                           const Eigen::VectorXd& expectation) {
  return moment_matrix(model.posteriors(data), basis, expectation);
}

GofReport gof_test(const Matrix& data, const Mixture& model, const GofConfig& config) {
  config.validate();
  if (data.rows() == 0) throw ArgumentError("gof_test: empty data");
  if (data.cols() != model.d()) {
    throw ArgumentError("gof_test: data has " + std::to_string(data.cols()) +
                        " columns, model dimension is " + std::to_string(model.d()));
  }
  const auto n = static_cast<std::size_t>(data.rows());
  const Tuning tune = tuning(n, config);
  const int workers = resolve_workers(config.workers);

  Rng partition_rng(config.seed, derive_stream_id(0, StreamTag::kPartition));
  const BlockPartition partition = partition_blocks(n, tune.B, partition_rng);

  BasisSet basis;
  if (config.basis == BasisKind::kBernstein) {
    basis = bernstein_for(model.K(), tune.p, config.bernstein_terms);
  } else {
    Rng basis_rng(config.seed, derive_stream_id(0, StreamTag::kBasis));
    basis = indicator_basis(model, tune.p, config.mc_draws, basis_rng);
  }
  Rng mc_rng(config.seed, derive_stream_id(0, StreamTag::kMonteCarlo));
  McExpectation expectation = mc_expectation(model, basis, config.mc_draws, mc_rng, workers);
  return run_blocks(model.posteriors(data), tune, partition, std::move(basis), std::move(expectation),
                    config);
}

GofReport gof_test(const PosteriorMatrix& posteriors, const PosteriorMatrix& reference,
                   const GofConfig& config) {
  config.validate();
  if (posteriors.rows() == 0) throw ArgumentError("gof_test: empty posterior matrix");
  if (reference.cols() != posteriors.cols()) {
    throw ArgumentError("gof_test: reference posteriors have " + std::to_string(reference.cols()) +
                        " columns, data posteriors have " + std::to_string(posteriors.cols()));
  }
  validate_posteriors(posteriors, 1e-6);
  validate_posteriors(reference, 1e-6);
  const PosteriorMatrix data_post = renormalised(posteriors);
  const PosteriorMatrix ref_post = renormalised(reference);
  const auto K = static_cast<int>(posteriors.cols());
  const auto n = static_cast<std::size_t>(posteriors.rows());
  const Tuning tune = tuning(n, config);

  Rng partition_rng(config.seed, derive_stream_id(0, StreamTag::kPartition));
  const BlockPartition partition = partition_blocks(n, tune.B, partition_rng);

  BasisSet basis;
  if (config.basis == BasisKind::kBernstein) {
    basis = bernstein_for(K, tune.p, config.bernstein_terms);
  } else {
    if (K != 2) throw UnsupportedError("indicator basis: only K = 2 is supported");
    const Eigen::VectorXd c1 = ref_post.col(0);
    basis = indicator_basis(std::span<const double>(c1.data(), static_cast<std::size_t>(c1.size())),
                            tune.p);
  }
  McExpectation expectation = mc_expectation(ref_post, basis);
  return run_blocks(data_post, tune, partition, std::move(basis), std::move(expectation), config);
}

std::vector<std::pair<double, double>> qq_table(std::vector<double> empirical,
                                                std::vector<double> reference) {
  if (empirical.empty() || reference.empty()) throw ArgumentError("qq_table: empty sample");
  std::sort(empirical.begin(), empirical.end());
  std::sort(reference.begin(), reference.end());
  const double n = static_cast<double>(empirical.size());
  const double m = static_cast<double>(reference.size());
  std::vector<std::pair<double, double>> out;
  out.reserve(empirical.size());
  for (std::size_t i = 0; i < empirical.size(); ++i) {
    const double prob = (static_cast<double>(i) + 0.5) / n;
    auto rank = static_cast<std::size_t>(std::ceil(prob * m - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, reference.size());
    out.emplace_back(empirical[i], reference[rank - 1]);
  }
  return out;
}

std::vector<std::pair<double, double>> qq_export(const Matrix& data, const Mixture& model, int k,
                                                 std::size_t M, Rng& rng) {
  if (k < 0 || k >= model.K()) {
    throw ArgumentError("qq_export: component " + std::to_string(k + 1) + " outside 1.." +
                        std::to_string(model.K()));
  }
  if (M < 1) throw ArgumentError("qq_export: need at least one model draw");
  const PosteriorMatrix data_post = model.posteriors(data);
  std::vector<double> empirical(static_cast<std::size_t>(data_post.rows()));
  for (Eigen::Index i = 0; i < data_post.rows(); ++i) empirical[static_cast<std::size_t>(i)] = data_post(i, k);
  std::vector<double> reference(M);
  std::vector<double> x(static_cast<std::size_t>(model.d()));
  std::vector<double> post(static_cast<std::size_t>(model.K()));
  for (std::size_t m = 0; m < M; ++m) {
    model.sample_one(rng, x);
    model.posterior(x, post);
    reference[m] = post[static_cast<std::size_t>(k)];
  }
  return qq_table(std::move(empirical), std::move(reference));
}

}  // namespace cgof
