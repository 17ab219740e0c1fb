#include <gtest/gtest.h>

#include <cmath>

#include "cgof/em.hpp"
#include "cgof/error.hpp"

using namespace cgof;

namespace {

MixtureParams two_gaussians(double sep, int d) {
  MixtureParams p;
  p.proportions = {0.4, 0.6};
  p.components = {ComponentParams{std::vector<double>(d, -sep), std::vector<double>(d, 1.0), {}, {}},
                  ComponentParams{std::vector<double>(d, sep), std::vector<double>(d, 1.0), {}, {}}};
  return p;
}

EmSettings quick(int starts = 5) {
  EmSettings s;
  s.n_starts = starts;
  return s;
}

void expect_monotone(const FitResult& fit) {
  for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i) {
    ASSERT_GE(fit.log_likelihood[i], fit.log_likelihood[i - 1] - 1e-8) << "step " << i;
  }
}

}  // namespace

TEST(Em, SingleGaussianIsSampleMoments) {
  Matrix x(6, 1);
  x << 1.0, 2.0, 4.0, 4.5, -1.0, 0.5;
  Rng rng(1, 1);
  const FitResult fit = fit_em(MixtureSpec{Family::kGaussianDiagonal, 1, 1}, x, quick(), rng);
  const double mean = x.mean();
  const double var = (x.array() - mean).square().mean();
  EXPECT_TRUE(fit.converged);
  EXPECT_NEAR(fit.params.components[0].location[0], mean, 1e-12);
  EXPECT_NEAR(fit.params.components[0].scale[0], var, 1e-12);
  EXPECT_LE(fit.n_iterations, 3);
}

TEST(Em, RecoversTwoGaussians) {
  const MixtureSpec spec{Family::kGaussianDiagonal, 2, 1};
  const MixtureParams truth = two_gaussians(1.0, 1);
  Rng data_rng(2, 1);
  const Dataset data = Mixture(spec, truth).sample(5000, data_rng);
  Rng rng(2, 2);
  const FitResult fit = fit_em(spec, data.values, EmSettings{}, rng);
  const auto perm = align_components(fit.params, truth);
  for (int k = 0; k < 2; ++k) {
    EXPECT_NEAR(fit.params.components[perm[k]].location[0], truth.components[k].location[0], 0.1);
  }
  expect_monotone(fit);
}

TEST(Em, ProportionsRecoveredOnLargeSample) {
  const MixtureSpec spec{Family::kGaussianDiagonal, 2, 3};
  const MixtureParams truth = two_gaussians(1.2, 3);
  Rng data_rng(3, 1);
  const Dataset data = Mixture(spec, truth).sample(10000, data_rng);
  Rng rng(3, 2);
  const FitResult fit = fit_em(spec, data.values, quick(), rng);
  const auto perm = align_components(fit.params, truth);
  for (int k = 0; k < 2; ++k) {
    EXPECT_NEAR(fit.params.proportions[perm[k]], truth.proportions[k], 0.05);
  }
}

TEST(Em, LikelihoodTraceIsMonotoneForEveryFittableFamily) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    {
      MixtureParams p;
      p.proportions = {0.3, 0.7};
      p.components = {ComponentParams{{1.0, 4.0}, {}, {}, {}}, ComponentParams{{5.0, 1.0}, {}, {}, {}}};
      const MixtureSpec spec{Family::kPoissonProduct, 2, 2};
      Rng r(seed, 1);
      const Dataset data = Mixture(spec, p).sample(400, r);
      Rng rng(seed, 2);
      expect_monotone(fit_em(spec, data.values, quick(3), rng));
    }
    {
      MixtureParams p;
      p.proportions = {0.5, 0.5};
      p.components = {ComponentParams{{0.2, 0.8, 0.3}, {}, {}, {}},
                      ComponentParams{{0.9, 0.1, 0.6}, {}, {}, {}}};
      const MixtureSpec spec{Family::kBernoulliProduct, 2, 3};
      Rng r(seed, 3);
      const Dataset data = Mixture(spec, p).sample(400, r);
      Rng rng(seed, 4);
      expect_monotone(fit_em(spec, data.values, quick(3), rng));
    }
    {
      MixtureParams p;
      p.proportions = {0.5, 0.5};
      p.components = {ComponentParams{{}, {}, {{0.7, 0.2, 0.1}, {0.5, 0.5}}, {}},
                      ComponentParams{{}, {}, {{0.1, 0.2, 0.7}, {0.1, 0.9}}, {}}};
      const MixtureSpec spec{Family::kMultinomialProduct, 2, 2, {3, 2}};
      Rng r(seed, 5);
      const Dataset data = Mixture(spec, p).sample(400, r);
      Rng rng(seed, 6);
      expect_monotone(fit_em(spec, data.values, quick(3), rng));
    }
    {
      const MixtureSpec spec{Family::kGaussianDiagonal, 3, 2};
      MixtureParams p;
      p.proportions = {0.2, 0.3, 0.5};
      for (int k = 0; k < 3; ++k) p.components.push_back(ComponentParams{{k * 1.5, -k * 1.0}, {1.0, 0.5}, {}, {}});
      Rng r(seed, 7);
      const Dataset data = Mixture(spec, p).sample(400, r);
      Rng rng(seed, 8);
      EmSettings s = quick(3);
      s.init = EmInit::kRandomPosterior;
      expect_monotone(fit_em(spec, data.values, s, rng));
    }
  }
}

TEST(Em, Preconditions) {
  Matrix one(1, 1);
  one << 0.0;
  Rng rng(1, 1);
  EXPECT_THROW(fit_em(MixtureSpec{Family::kGaussianDiagonal, 2, 1}, one, quick(), rng), ArgumentError);
  Matrix x = Matrix::Random(20, 2);
  EXPECT_THROW(fit_em(MixtureSpec{Family::kStudent3Product, 2, 2}, x, quick(), rng), UnsupportedError);
  Matrix counts(3, 1);
  counts << 1, 2.5, 3;
  EXPECT_THROW(fit_em(MixtureSpec{Family::kPoissonProduct, 1, 1}, counts, quick(), rng), ValidationError);
}

TEST(Em, NonConvergenceCarriesBestPartialRun) {
  const MixtureSpec spec{Family::kGaussianDiagonal, 2, 1};
  Rng data_rng(4, 1);
  const Dataset data = Mixture(spec, two_gaussians(0.5, 1)).sample(500, data_rng);
  EmSettings s = quick(2);
  s.max_iter = 2;
  s.tol = 1e-300;
  Rng rng(4, 2);
  try {
    (void)fit_em(spec, data.values, s, rng);
    FAIL() << "expected EmError";
  } catch (const EmError& e) {
    ASSERT_TRUE(e.best_partial().has_value());
    EXPECT_FALSE(e.best_partial()->converged);
  }
}

TEST(Em, IndependentOfWorkerCount) {
  const MixtureSpec spec{Family::kGaussianDiagonal, 3, 2};
  MixtureParams p;
  p.proportions = {0.2, 0.3, 0.5};
  for (int k = 0; k < 3; ++k) p.components.push_back(ComponentParams{{k * 2.0, 0.0}, {1.0, 1.0}, {}, {}});
  Rng r(5, 1);
  const Dataset data = Mixture(spec, p).sample(600, r);
  EmSettings one = quick(6);
  EmSettings many = one;
  many.workers = 4;
  Rng a(5, 2);
  Rng b(5, 2);
  const FitResult fa = fit_em(spec, data.values, one, a);
  const FitResult fb = fit_em(spec, data.values, many, b);
  EXPECT_EQ(fa.log_likelihood, fb.log_likelihood);
  EXPECT_EQ(fa.params.proportions, fb.params.proportions);
}

TEST(Bic, ParameterCounts) {
  EXPECT_EQ(free_parameter_count(MixtureSpec{Family::kGaussianDiagonal, 1, 1}), 2);
  EXPECT_EQ(free_parameter_count(MixtureSpec{Family::kGaussianDiagonal, 3, 6}), 2 + 3 * 12);
  EXPECT_EQ(free_parameter_count(MixtureSpec{Family::kPoissonProduct, 3, 6}), 2 + 18);
  EXPECT_EQ(free_parameter_count(MixtureSpec{Family::kBernoulliProduct, 2, 5}), 1 + 10);
  const MixtureSpec multi{Family::kMultinomialProduct, 4, 3, {3, 2, 4}};
  EXPECT_EQ(free_parameter_count(multi), 3 + 4 * (2 + 1 + 3));
}

TEST(Bic, Definition) {
  FitResult fit;
  fit.spec = MixtureSpec{Family::kGaussianDiagonal, 1, 1};
  fit.log_likelihood = {-100.0};
  EXPECT_DOUBLE_EQ(bic(fit, 50), -100.0 - std::log(50.0));
}

TEST(SelectK, SingleClusterPrefersOne) {
  const MixtureSpec spec{Family::kGaussianDiagonal, 1, 2};
  MixtureParams p;
  p.proportions = {1.0};
  p.components.push_back(ComponentParams{{0.0, 0.0}, {1.0, 1.0}, {}, {}});
  int ones = 0;
  const int reps = 20;
  for (int r = 0; r < reps; ++r) {
    Rng data_rng(100 + r, 1);
    const Dataset data = Mixture(spec, p).sample(300, data_rng);
    Rng rng(100 + r, 2);
    // An over-fitted K may fail to converge; that error propagates and
    // counts as a miss.
    try {
      ones += select_K(spec, data.values, {1, 2, 3}, EmSettings{}, rng).best.spec.K == 1;
    } catch (const EmError&) {
    }
  }
  EXPECT_GE(ones, 19);
}

TEST(SelectK, FindsThreeSeparatedClusters) {
  const MixtureSpec spec{Family::kGaussianDiagonal, 3, 2};
  MixtureParams p;
  p.proportions = {0.3, 0.3, 0.4};
  p.components = {ComponentParams{{0.0, 0.0}, {1.0, 1.0}, {}, {}},
                  ComponentParams{{6.0, 0.0}, {1.0, 1.0}, {}, {}},
                  ComponentParams{{0.0, 6.0}, {1.0, 1.0}, {}, {}}};
  Rng data_rng(6, 1);
  const Dataset data = Mixture(spec, p).sample(900, data_rng);
  Rng rng(6, 2);
  const ModelSelection sel = select_K(spec, data.values, {1, 2, 3, 4, 5}, quick(), rng);
  EXPECT_EQ(sel.best.spec.K, 3);
  EXPECT_EQ(sel.bic_table.size(), 5u);
  EXPECT_THROW(select_K(spec, data.values, {}, quick(), rng), ArgumentError);
}

TEST(Align, RecoversPermutation) {
  MixtureParams ref;
  ref.proportions = {0.2, 0.3, 0.5};
  for (double m : {0.0, 5.0, -5.0}) ref.components.push_back(ComponentParams{{m}, {1.0}, {}, {}});
  MixtureParams fitted;
  fitted.proportions = {0.5, 0.2, 0.3};
  for (double m : {-4.9, 0.1, 5.2}) fitted.components.push_back(ComponentParams{{m}, {1.0}, {}, {}});
  EXPECT_EQ(align_components(fitted, ref), (std::vector<int>{1, 2, 0}));
}
