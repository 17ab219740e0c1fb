#include <benchmark/benchmark.h>

#include "cgof/el.hpp"
#include "cgof/gof.hpp"
#include "cgof/sim.hpp"

using namespace cgof;

namespace {

const Mixture& null_model() {
  static const Mixture model = [] {
    const auto& s = find_scenario("table2/gaussian/0.80");
    return Mixture(s.generator, s.truth);
  }();
  return model;
}

Matrix null_data(std::size_t n) {
  Rng rng(1, 1);
  return null_model().sample(n, rng).values;
}

}  // namespace

static void BM_ElStatistic(benchmark::State& state) {
  const auto nb = static_cast<std::size_t>(state.range(0));
  const BasisSet basis = bernstein_basis(3, 5);
  Rng rng(2, 2);
  const McExpectation e = mc_expectation(null_model(), basis, 10000, rng, 1);
  const MomentMatrix m = moment_matrix(null_data(nb), null_model(), basis, e.mean);
  for (auto _ : state) benchmark::DoNotOptimize(el_statistic(m));
}
BENCHMARK(BM_ElStatistic)->Arg(63)->Arg(144)->Arg(410);

static void BM_Posteriors(benchmark::State& state) {
  const Matrix x = null_data(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(null_model().posteriors(x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Posteriors)->Arg(1000)->Arg(10648);

static void BM_McExpectation(benchmark::State& state) {
  const BasisSet basis = bernstein_basis(3, 5);
  for (auto _ : state) {
    Rng rng(3, 3);
    benchmark::DoNotOptimize(mc_expectation(null_model(), basis, static_cast<std::size_t>(state.range(0)), rng, 1));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_McExpectation)->Arg(10000)->Arg(100000);

static void BM_GofTest(benchmark::State& state) {
  const Matrix x = null_data(static_cast<std::size_t>(state.range(0)));
  GofConfig config;
  config.mc_draws = 10000;
  config.workers = 1;
  for (auto _ : state) benchmark::DoNotOptimize(gof_test(x, null_model(), config));
}
BENCHMARK(BM_GofTest)->Arg(1000)->Arg(2744)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
