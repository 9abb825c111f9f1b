#include <benchmark/benchmark.h>

#include <cmath>
#include <memory>
#include <vector>

#include "circpred/data.hpp"
#include "circpred/forest.hpp"

using namespace circpred;

namespace {

std::vector<double> cosines(const Dataset& d) {
  std::vector<double> c(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) c[i] = std::cos(d.y[i].radians());
  return c;
}

}  // namespace

static void BM_FitTree(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Dataset d = generate_synthetic(n, 5.0, 1);
  const auto y = cosines(d);
  const FeatureOrder order(d.x);
  const auto plan = BootstrapPlan::generate(n, 1, 2);
  const auto counts = plan.counts(0);
  const ForestParams params;
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_tree(d.x, y, counts, params, 3, order));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_FitTree)->Arg(1000)->Arg(10000)->Arg(20000)->Unit(benchmark::kMillisecond);

static void BM_ForestPredict(benchmark::State& state) {
  const Dataset d = generate_synthetic(5000, 5.0, 1);
  const auto y = cosines(d);
  ForestParams params;
  params.threads = 1;
  const auto plan = std::make_shared<const BootstrapPlan>(
      BootstrapPlan::generate(d.size(), static_cast<std::size_t>(state.range(0)), 4));
  const Forest f = train_forest(d.x, y, plan, params);
  const Dataset probe = generate_synthetic(1000, 5.0, 9);
  for (auto _ : state) {
    double s = 0.0;
    for (std::size_t i = 0; i < probe.size(); ++i) s += f.predict(probe.x.row(i));
    benchmark::DoNotOptimize(s);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * probe.size()));
}
BENCHMARK(BM_ForestPredict)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);
