#include <benchmark/benchmark.h>

#include "corpstat/allocation.hpp"
#include "corpstat/density.hpp"
#include "corpstat/mc_combine.hpp"

using namespace corpstat;

namespace {

Grid grid_for(const benchmark::State& state) {
  return Grid(static_cast<std::size_t>(state.range(0)));
}

GridDensity uniform_posterior(int n, int b, const Grid& g) {
  return posterior(binomial_likelihood(n, b, g), uniform_prior(g));
}

}  // namespace

static void BM_BinomialLikelihood(benchmark::State& state) {
  const Grid g = grid_for(state);
  for (auto _ : state) benchmark::DoNotOptimize(binomial_likelihood(200, 187, g));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.size()));
}
BENCHMARK(BM_BinomialLikelihood)->Arg(100'000)->Arg(1'000'000)->Unit(benchmark::kMillisecond);

static void BM_Posterior(benchmark::State& state) {
  const Grid g = grid_for(state);
  const auto like = binomial_likelihood(200, 187, g);
  const auto prior = uniform_prior(g);
  for (auto _ : state) benchmark::DoNotOptimize(posterior(like, prior));
}
BENCHMARK(BM_Posterior)->Arg(100'000)->Arg(1'000'000)->Unit(benchmark::kMillisecond);

static void BM_SplinePrior(benchmark::State& state) {
  const Grid g = grid_for(state);
  ElicitedPrior p;
  p.points = {{0.0, 0.1}, {0.2, 0.5}, {0.5, 2.0}, {0.8, 3.0}, {0.95, 1.0}, {1.0, 0.2}};
  for (auto _ : state) benchmark::DoNotOptimize(spline_prior(p, g));
}
BENCHMARK(BM_SplinePrior)->Arg(100'000)->Arg(1'000'000)->Unit(benchmark::kMillisecond);

static void BM_ExactInterval(benchmark::State& state) {
  const Grid g = grid_for(state);
  const auto post = uniform_posterior(200, 187, g);
  for (auto _ : state) benchmark::DoNotOptimize(credible_interval_exact(post, 0.95));
}
BENCHMARK(BM_ExactInterval)->Arg(100'000)->Arg(1'000'000)->Unit(benchmark::kMillisecond);

static void BM_MonteCarloCombine(benchmark::State& state) {
  const Grid g;
  const std::vector<GridDensity> posts{uniform_posterior(15, 0, g),
                                       uniform_posterior(185, 185, g)};
  const std::vector<double> w{3444.0 / 45820.0, 42376.0 / 45820.0};
  for (auto _ : state) benchmark::DoNotOptimize(monte_carlo_combine(posts, w, state.range(0), 1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MonteCarloCombine)->Arg(100'000)->Arg(1'000'000)->Unit(benchmark::kMillisecond);

static void BM_NewboldAllocate(benchmark::State& state) {
  std::vector<StratumState> strata;
  for (int i = 0; i < state.range(0); ++i) {
    StratumState s;
    s.label = "s" + std::to_string(i);
    s.fraction = 1.0 / static_cast<double>(state.range(0));
    s.presample_n = 10 + i % 7;
    s.posterior_mean = 0.1 + 0.8 * (i % 11) / 10.0;
    strata.push_back(std::move(s));
  }
  for (auto _ : state) benchmark::DoNotOptimize(newbold_allocate(strata, 10'000));
}
BENCHMARK(BM_NewboldAllocate)->Arg(2)->Arg(64);
BENCHMARK_MAIN();
