#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "cgof/error.hpp"
#include "cgof/gof.hpp"
#include "cgof/numerics.hpp"

using namespace cgof;

namespace {

Mixture two_gaussians(double separation = 2.0, double pi1 = 0.4) {
  MixtureParams params;
  params.proportions = {pi1, 1.0 - pi1};
  params.components = {ComponentParams{{0.0, 0.0}, {1.0, 1.0}, {}, {}},
                       ComponentParams{{separation, separation}, {1.0, 1.0}, {}, {}}};
  return Mixture(MixtureSpec{Family::kGaussianDiagonal, 2, 2, {}, {}}, params);
}

Mixture three_gaussians() {
  MixtureParams params;
  params.proportions = {0.2, 0.3, 0.5};
  for (int k = 0; k < 3; ++k) {
    params.components.push_back(ComponentParams{{1.5 * k}, {1.0}, {}, {}});
  }
  return Mixture(MixtureSpec{Family::kGaussianDiagonal, 3, 1, {}, {}}, params);
}

Matrix draw(const Mixture& model, std::size_t n, std::uint64_t seed) {
  Rng rng(seed, 1);
  Matrix x(static_cast<Eigen::Index>(n), model.d());
  std::vector<double> row(static_cast<std::size_t>(model.d()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    model.sample_one(rng, row);
    for (int j = 0; j < model.d(); ++j) x(i, j) = row[static_cast<std::size_t>(j)];
  }
  return x;
}

GofConfig quick_config(std::uint64_t seed = 11) {
  GofConfig config;
  config.mc_draws = 20000;
  config.seed = seed;
  config.workers = 1;
  return config;
}

}  // namespace

TEST(Tuning, Examples) {
  const Tuning t = tuning(1000);
  EXPECT_EQ(t.B, 16);
  EXPECT_EQ(t.p, 4);
  ASSERT_EQ(t.block_sizes.size(), 16u);
  EXPECT_EQ(std::accumulate(t.block_sizes.begin(), t.block_sizes.end(), std::size_t{0}), 1000u);
  EXPECT_EQ(t.block_sizes.front(), 63u);
  EXPECT_EQ(t.block_sizes.back(), 62u);

  const Tuning t512 = tuning(512);
  EXPECT_EQ(t512.B, 14);
  EXPECT_EQ(t512.p, 4);

  const Tuning t64 = tuning(64);
  EXPECT_GE(t64.B, 2);
  EXPECT_GT(t64.block_sizes.back(), static_cast<std::size_t>(t64.p));
  EXPECT_THROW(tuning(63), ConfigError);
}

TEST(Tuning, BlockSizesAreNearEqualAndNonIncreasing) {
  for (std::size_t n : {64u, 100u, 777u, 2744u, 10648u}) {
    const Tuning t = tuning(n);
    EXPECT_LE(t.block_sizes.front() - t.block_sizes.back(), 1u);
    EXPECT_TRUE(std::is_sorted(t.block_sizes.rbegin(), t.block_sizes.rend()));
    if (t.p > 1) EXPECT_LT(static_cast<std::size_t>(6 * t.p), t.block_sizes.back());
  }
}

TEST(Config, Validation) {
  GofConfig c;
  EXPECT_NO_THROW(c.validate());
  c.alpha = 0.7;
  EXPECT_THROW(c.validate(), ConfigError);
  c = GofConfig{};
  c.rho = 0.6;
  EXPECT_THROW(c.validate(), ConfigError);
  c = GofConfig{};
  c.mc_draws = 10;
  EXPECT_THROW(c.validate(), ConfigError);
  c = GofConfig{};
  c.block_coefficient = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(BlockLevel, MatchesDirectFormula) {
  EXPECT_NEAR(block_level(0.05, 13), 0.0039378643, 1e-10);
  for (int B : {1, 2, 13, 50}) {
    EXPECT_NEAR(block_level(0.05, B), 1.0 - std::pow(0.95, 1.0 / B), 1e-15);
  }
  EXPECT_NEAR(block_level(1e-12, 10), 1e-13, 1e-25);
  EXPECT_NEAR(numerics::chi2_upper_quantile(3, block_level(0.05, 13)), 13.3499, 1e-4);
}

TEST(Partition, CoversEveryIndexOnce) {
  Rng rng(3, 4);
  const BlockPartition part = partition_blocks(1000, 16, rng);
  ASSERT_EQ(part.members.size(), 16u);
  std::set<std::size_t> seen;
  for (int b = 0; b < 16; ++b) {
    EXPECT_EQ(part.members[b].size(), part.sizes[b]);
    for (std::size_t i : part.members[b]) {
      EXPECT_TRUE(seen.insert(i).second);
      EXPECT_EQ(part.assignment[i], b);
    }
  }
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_THROW(partition_blocks(10, 6, rng), ArgumentError);
}

TEST(Partition, IsRandomAndReproducible) {
  Rng a(3, 4);
  Rng b(3, 4);
  Rng c(3, 5);
  const auto pa = partition_blocks(200, 4, a);
  EXPECT_EQ(pa.assignment, partition_blocks(200, 4, b).assignment);
  EXPECT_NE(pa.assignment, partition_blocks(200, 4, c).assignment);
  // Index 0 lands in every block about equally often.
  std::vector<int> counts(4, 0);
  Rng r(9, 9);
  for (int t = 0; t < 4000; ++t) ++counts[partition_blocks(200, 4, r).assignment[0]];
  for (int v : counts) EXPECT_NEAR(v / 4000.0, 0.25, 0.03);
}

TEST(McExpectation, FirstBernsteinTermsEqualProportions) {
  const Mixture model = three_gaussians();
  const BasisSet basis = bernstein_basis(3, 2);
  Rng rng(5, 5);
  const McExpectation e = mc_expectation(model, basis, 100000, rng, 1);
  // E[c_k(X)] = pi_k.
  EXPECT_NEAR(e.mean[0], 0.2, 3.0 * e.std_error[0]);
  EXPECT_NEAR(e.mean[1], 0.3, 3.0 * e.std_error[1]);
  EXPECT_EQ(e.draws, 100000u);
}

TEST(McExpectation, IndependentOfWorkerCount) {
  const Mixture model = two_gaussians();
  const BasisSet basis = bernstein_basis(2, 4);
  Rng a(5, 6);
  Rng b(5, 6);
  const McExpectation one = mc_expectation(model, basis, 30000, a, 1);
  const McExpectation three = mc_expectation(model, basis, 30000, b, 3);
  EXPECT_EQ(one.mean, three.mean);
  EXPECT_EQ(one.std_error, three.std_error);
  EXPECT_THROW(mc_expectation(model, basis, 10, a, 1), ArgumentError);
}

TEST(MomentMatrix, IsCentred) {
  const Mixture model = two_gaussians();
  const BasisSet basis = bernstein_basis(2, 3);
  const Matrix x = draw(model, 50, 1);
  Eigen::VectorXd mean(3);
  mean << 0.1, 0.2, 0.3;
  const MomentMatrix m = moment_matrix(x, model, basis, mean);
  const PosteriorMatrix post = model.posteriors(x);
  for (Eigen::Index i = 0; i < 50; ++i) {
    const auto phi = basis.evaluate(std::span<const double>(post.row(i).data(), 2));
    for (int j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(m(i, j), phi[j] - mean[j]);
  }
  EXPECT_THROW(moment_matrix(post, bernstein_basis(3, 2), Eigen::VectorXd::Zero(2)), ArgumentError);
}

TEST(Gof, ReportIsConsistent) {
  const Mixture model = two_gaussians();
  const Matrix x = draw(model, 1000, 2);
  const GofReport r = gof_test(x, model, quick_config());
  EXPECT_EQ(r.n, 1000u);
  EXPECT_EQ(r.K, 2);
  EXPECT_EQ(r.B, 16);
  EXPECT_EQ(r.p, 4);
  ASSERT_EQ(r.blocks.size(), 16u);
  double max_stat = -1.0;
  std::size_t total = 0;
  for (const auto& b : r.blocks) {
    max_stat = std::max(max_stat, b.statistic);
    total += b.size;
    EXPECT_GE(b.statistic, 0.0);
  }
  EXPECT_EQ(total, 1000u);
  EXPECT_EQ(r.max_statistic, max_stat);
  EXPECT_EQ(r.reject, r.max_statistic > r.threshold);
  EXPECT_NEAR(r.threshold, numerics::chi2_upper_quantile(4, block_level(0.05, 16)), 1e-12);
  EXPECT_EQ(r.expectation.mean.size(), 4);
  EXPECT_FALSE(r.basis_description.empty());
}

TEST(Gof, ThresholdGrowsAsAlphaShrinks) {
  const Mixture model = two_gaussians();
  const Matrix x = draw(model, 500, 3);
  double previous = 0.0;
  for (double alpha : {0.2, 0.1, 0.05, 0.01}) {
    GofConfig c = quick_config();
    c.alpha = alpha;
    const GofReport r = gof_test(x, model, c);
    EXPECT_GT(r.threshold, previous);
    previous = r.threshold;
  }
}

TEST(Gof, DeterministicAcrossWorkers) {
  const Mixture model = two_gaussians();
  const Matrix x = draw(model, 2000, 4);
  GofConfig c1 = quick_config(77);
  GofConfig c4 = c1;
  c4.workers = 4;
  const GofReport a = gof_test(x, model, c1);
  const GofReport b = gof_test(x, model, c4);
  ASSERT_EQ(a.blocks.size(), b.blocks.size());
  for (std::size_t i = 0; i < a.blocks.size(); ++i) EXPECT_EQ(a.blocks[i].statistic, b.blocks[i].statistic);
  EXPECT_EQ(a.max_statistic, b.max_statistic);

  GofConfig other = c1;
  other.seed = 78;
  EXPECT_NE(gof_test(x, model, other).max_statistic, a.max_statistic);
}

TEST(Gof, ExternalPosteriorsAgreeWithInternalPath) {
  const Mixture model = two_gaussians();
  const Matrix x = draw(model, 1000, 5);
  GofConfig c = quick_config();
  c.mc_draws = 200000;
  const GofReport internal = gof_test(x, model, c);
  const PosteriorMatrix reference = model.posteriors(draw(model, 200000, 99));
  const GofReport external = gof_test(model.posteriors(x), reference, c);
  ASSERT_EQ(internal.blocks.size(), external.blocks.size());
  EXPECT_EQ(internal.threshold, external.threshold);
  for (std::size_t i = 0; i < internal.blocks.size(); ++i) {
    EXPECT_EQ(internal.blocks[i].size, external.blocks[i].size);
    EXPECT_NEAR(internal.blocks[i].statistic, external.blocks[i].statistic,
                0.5 + 0.1 * internal.blocks[i].statistic);
  }
  // Same inputs, same result.
  const GofReport again = gof_test(model.posteriors(x), reference, c);
  EXPECT_EQ(again.max_statistic, external.max_statistic);
}

TEST(Gof, ExternalPosteriorsAreValidated) {
  PosteriorMatrix post = PosteriorMatrix::Constant(100, 2, 0.5);
  post(7, 0) = 0.9;
  const PosteriorMatrix ref = PosteriorMatrix::Constant(2000, 2, 0.5);
  EXPECT_THROW(gof_test(post, ref, quick_config()), ValidationError);
  EXPECT_THROW(gof_test(PosteriorMatrix::Constant(100, 2, 0.5), PosteriorMatrix::Constant(10, 3, 1.0 / 3),
                        quick_config()),
               ArgumentError);
}

TEST(Gof, IndicatorBasisRuns) {
  const Mixture model = two_gaussians(1.5, 0.5);
  const Matrix x = draw(model, 1000, 6);
  GofConfig c = quick_config();
  c.basis = BasisKind::kIndicatorPca;
  const GofReport r = gof_test(x, model, c);
  EXPECT_EQ(r.basis.kind, BasisKind::kIndicatorPca);
  EXPECT_EQ(r.basis.cut_points.size(), 4u);
  for (double v : r.expectation.mean.head(4)) EXPECT_LT(std::abs(v), 0.05);
  EXPECT_THROW(gof_test(draw(three_gaussians(), 500, 1), three_gaussians(), c), UnsupportedError);
}

TEST(Gof, SingleComponentModel) {
  MixtureParams params;
  params.proportions = {1.0};
  params.components = {ComponentParams{{0.0}, {1.0}, {}, {}}};
  const Mixture model(MixtureSpec{Family::kGaussianDiagonal, 1, 1, {}, {}}, params);
  const Matrix x = draw(model, 500, 7);
  // Every posterior is the single point 1, so the moments are exactly
  // zero and every block sits at the origin.
  const GofReport r = gof_test(x, model, quick_config());
  EXPECT_EQ(r.K, 1);
  EXPECT_FALSE(r.reject);
}

TEST(Qq, IdenticalSamplesGiveDiagonal) {
  std::vector<double> v;
  for (int i = 0; i < 137; ++i) v.push_back(std::sin(i * 1.3));
  const auto table = qq_table(v, v);
  ASSERT_EQ(table.size(), v.size());
  for (const auto& [e, t] : table) EXPECT_EQ(e, t);
  EXPECT_TRUE(std::is_sorted(table.begin(), table.end()));
  EXPECT_THROW(qq_table({}, v), ArgumentError);
}

TEST(Qq, ExportFromModel) {
  const Mixture model = two_gaussians();
  const Matrix x = draw(model, 300, 8);
  Rng rng(1, 2);
  const auto table = qq_export(x, model, 1, 5000, rng);
  ASSERT_EQ(table.size(), 300u);
  for (const auto& [e, t] : table) {
    EXPECT_GE(e, 0.0);
    EXPECT_LE(t, 1.0);
  }
  // Data drawn from the model: median pair close.
  EXPECT_NEAR(table[150].first, table[150].second, 0.15);
  EXPECT_THROW(qq_export(x, model, 2, 100, rng), ArgumentError);
}
