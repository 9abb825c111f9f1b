#include <benchmark/benchmark.h>

#include "circpred/baselines.hpp"
#include "circpred/conformal.hpp"
#include "circpred/data.hpp"

using namespace circpred;

static void BM_OobConformalFit(benchmark::State& state) {
  const Dataset d = generate_synthetic(static_cast<std::size_t>(state.range(0)), 5.0, 1);
  OobConformalConfig cfg;
  cfg.forest.trees = 100;
  cfg.forest.threads = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(OobConformalModel::fit(d.x, d.y, cfg));
  }
}
BENCHMARK(BM_OobConformalFit)->Arg(2000)->Unit(benchmark::kMillisecond);

static void BM_OobConformalPredict(benchmark::State& state) {
  const Dataset d = generate_synthetic(2000, 5.0, 1);
  OobConformalConfig cfg;
  cfg.forest.trees = 100;
  const auto model = OobConformalModel::fit(d.x, d.y, cfg);
  const Dataset probe = generate_synthetic(1000, 5.0, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.predict_batch(probe.x, 0.1, 1));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * probe.size()));
}
BENCHMARK(BM_OobConformalPredict)->Unit(benchmark::kMillisecond);

static void BM_PnLogLikelihood(benchmark::State& state) {
  const Dataset d = generate_synthetic(static_cast<std::size_t>(state.range(0)), 5.0, 1);
  ProjectedNormalModel m;
  m.beta_cos.assign(d.features() + 1, 0.1);
  m.beta_sin.assign(d.features() + 1, -0.2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(pn_log_likelihood(m, d.x, d.y));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * d.size()));
}
BENCHMARK(BM_PnLogLikelihood)->Arg(10000);

static void BM_PnFit(benchmark::State& state) {
  const Dataset d = generate_synthetic(5000, 5.0, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_projected_normal(d.x, d.y));
  }
}
BENCHMARK(BM_PnFit)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
